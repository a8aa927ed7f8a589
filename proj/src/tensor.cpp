#include "signflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace signflow {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void check_positive_extents(const Shape& shape) {
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor shape must have positive extents, got " + shape_str(shape));
    }
}

void check_finite(const char* op, const std::vector<double>& data) {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": produced a non-finite value");
        }
    }
}

void require_rank2(const char* op, const Tensor& t) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected rank-2 tensor, got shape " + shape_str(t.shape()));
    }
}

Tape* common_tape(const Tensor& a, const Tensor& b) {
    Tape* ta = a.tracked() ? a.tape() : nullptr;
    Tape* tb = b.tracked() ? b.tape() : nullptr;
    if (ta && tb && ta != tb) throw ValueError("operands recorded on different tapes");
    return ta ? ta : tb;
}

}  // namespace

// Shared construction path for every op: finiteness gate plus optional
// tape recording. Declared as a friend of Tensor.
Tensor make_op_result(Tape* tape, Shape shape, std::vector<double> data,
                      std::vector<int> parents, Tape::BackFn back, const char* op_name) {
    check_finite(op_name, data);
    Tensor out(std::move(shape), std::move(data));
    if (tape && !parents.empty()) {
        out.tape_ = tape;
        out.node_ = tape->record(std::move(parents), out.size(), std::move(back));
    }
    return out;
}

// ---- Tensor ----------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
    check_positive_extents(shape_);
    if (shape_numel(shape_) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape_));
    }
    data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, {v}); }

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
}

std::size_t Tensor::size() const { return data_ ? data_->size() : 0; }

int Tensor::extent(int axis) const {
    if (axis < 0 || axis >= rank()) throw ShapeError("axis out of range for shape " + shape_str(shape_));
    return shape_[static_cast<std::size_t>(axis)];
}

std::span<const double> Tensor::data() const {
    static const std::vector<double> empty;
    return data_ ? std::span<const double>(*data_) : std::span<const double>(empty);
}

double Tensor::value() const {
    if (size() != 1) throw ValueError("value(): tensor is not scalar, shape " + shape_str(shape_));
    return (*data_)[0];
}

double Tensor::at(int i) const {
    if (rank() != 1 || i < 0 || i >= shape_[0]) {
        throw ShapeError("at(i): index " + std::to_string(i) + " invalid for shape " + shape_str(shape_));
    }
    return (*data_)[static_cast<std::size_t>(i)];
}

double Tensor::at(int i, int j) const {
    if (rank() != 2 || i < 0 || i >= shape_[0] || j < 0 || j >= shape_[1]) {
        throw ShapeError("at(i,j): index invalid for shape " + shape_str(shape_));
    }
    return (*data_)[static_cast<std::size_t>(i) * shape_[1] + j];
}

std::vector<double> Tensor::to_vector() const { return data_ ? *data_ : std::vector<double>{}; }

Tensor Tensor::detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

// ---- Tape ------------------------------------------------------------

int Tape::record(std::vector<int> parents, std::size_t out_size, BackFn back) {
    nodes_.push_back(Node{std::move(parents), out_size, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::leaf(Shape shape, std::vector<double> data) {
    return leaf(Tensor(std::move(shape), std::move(data)));
}

Tensor Tape::leaf(const Tensor& values) {
    Tensor t = values.detached();
    t.tape_ = this;
    t.node_ = record({}, t.size(), BackFn{});
    return t;
}

GradMap Tape::backward(const Tensor& loss) {
    if (!loss.tracked() || loss.tape() != this) {
        throw ValueError("backward: loss is not recorded on this tape");
    }
    if (loss.size() != 1) {
        throw ValueError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    const int n = node_count();
    const int root = loss.node();

    // Restrict the walk to ancestors of the loss.
    std::vector<char> needed(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{root};
    needed[static_cast<std::size_t>(root)] = 1;
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        for (int p : nodes_[static_cast<std::size_t>(id)].parents) {
            if (!needed[static_cast<std::size_t>(p)]) {
                needed[static_cast<std::size_t>(p)] = 1;
                stack.push_back(p);
            }
        }
    }

    GradMap out;
    out.grads_.resize(static_cast<std::size_t>(n));
    out.grads_[static_cast<std::size_t>(root)] = {1.0};

    std::vector<std::vector<double>*> parent_bufs;
    for (int i = root; i >= 0; --i) {
        auto& node = nodes_[static_cast<std::size_t>(i)];
        if (!needed[static_cast<std::size_t>(i)] || node.parents.empty()) continue;
        auto& gout = out.grads_[static_cast<std::size_t>(i)];
        if (gout.empty()) continue;  // needed but disconnected via untracked branch
        parent_bufs.clear();
        for (int p : node.parents) {
            auto& buf = out.grads_[static_cast<std::size_t>(p)];
            if (buf.empty()) buf.assign(node_size(p), 0.0);
            parent_bufs.push_back(&buf);
        }
        node.back(gout, parent_bufs);
    }
    return out;
}

GradMap backward(const Tensor& loss) {
    if (!loss.tracked()) throw ValueError("backward: loss is not on a tape");
    return loss.tape()->backward(loss);
}

Tensor GradMap::grad(const Tensor& leaf) const {
    if (!leaf.tracked()) throw ValueError("grad: tensor is not on a tape");
    const auto id = static_cast<std::size_t>(leaf.node());
    if (id < grads_.size() && !grads_[id].empty()) {
        return Tensor(leaf.shape(), grads_[id]);
    }
    return Tensor::zeros(leaf.shape());
}

bool GradMap::reached(const Tensor& leaf) const {
    if (!leaf.tracked()) return false;
    const auto id = static_cast<std::size_t>(leaf.node());
    return id < grads_.size() && !grads_[id].empty();
}

// ---- matmul kernels ---------------------------------------------------

namespace {

// out[m x n] += a[m x k] * b[k x n]
void mm_nn(const double* a, const double* b, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* orow = out + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[static_cast<std::size_t>(i) * k + p];
            const double* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x n] += a[m x k] * bT[n x k]^T  (dot of rows)
void mm_nt(const double* a, const double* bt, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* orow = out + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = bt + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] += acc;
        }
    }
}

// out[k x n] += a[m x k]^T * g[m x n]
void mm_tn(const double* a, const double* g, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[static_cast<std::size_t>(i) * k + p];
            double* orow = out + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * grow[j];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2("matmul", a);
    require_rank2("matmul", b);
    const int m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);

    Tape* tape = common_tape(a, b);
    if (!tape) return make_op_result(nullptr, {m, n}, std::move(out), {}, {}, "matmul");

    const bool ta = a.tracked(), tb = b.tracked();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto back = [a, b, ta, tb, m, k, n](const std::vector<double>& g,
                                        const std::vector<std::vector<double>*>& pg) {
        int slot = 0;
        if (ta) mm_nt(g.data(), b.data().data(), pg[slot++]->data(), m, n, k);
        if (tb) mm_tn(a.data().data(), g.data(), pg[slot++]->data(), m, k, n);
    };
    return make_op_result(tape, {m, n}, std::move(out), std::move(parents), std::move(back), "matmul");
}

Tensor transpose(const Tensor& a) {
    require_rank2("transpose", a);
    const int m = a.extent(0), n = a.extent(1);
    std::vector<double> out(a.size());
    const auto src = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = src[static_cast<std::size_t>(i) * n + j];
    if (!a.tracked()) return Tensor({n, m}, std::move(out));
    auto back = [m, n](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        auto& ga = *pg[0];
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
    };
    return make_op_result(a.tape(), {n, m}, std::move(out), {a.node()}, std::move(back), "transpose");
}

Tensor softmax_lastdim(const Tensor& a) {
    if (a.rank() < 1) throw ShapeError("softmax_lastdim: requires rank >= 1");
    const int last = a.extent(a.rank() - 1);
    if (last < 1) throw ShapeError("softmax_lastdim: empty last dimension");
    const std::size_t rows = a.size() / static_cast<std::size_t>(last);
    std::vector<double> out(a.size());
    const auto src = a.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = src.data() + r * static_cast<std::size_t>(last);
        double* y = out.data() + r * static_cast<std::size_t>(last);
        double mx = x[0];
        for (int j = 1; j < last; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < last; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < last; ++j) y[j] /= sum;
    }
    if (!a.tracked()) return Tensor(a.shape(), std::move(out));
    Tensor result_holder(a.shape(), out);  // keep a copy of the softmax values for the backward pass
    auto back = [s = result_holder, last, rows](const std::vector<double>& g,
                                                const std::vector<std::vector<double>*>& pg) {
        auto& ga = *pg[0];
        const auto sv = s.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * static_cast<std::size_t>(last);
            double dot = 0.0;
            for (int j = 0; j < last; ++j) dot += g[off + j] * sv[off + j];
            for (int j = 0; j < last; ++j) ga[off + j] += sv[off + j] * (g[off + j] - dot);
        }
    };
    return make_op_result(a.tape(), a.shape(), std::move(out), {a.node()}, std::move(back),
                          "softmax_lastdim");
}

// ---- binary elementwise ----------------------------------------------

namespace {

enum class Bcast { kNone, kLeftScalar, kRightScalar };

Bcast binary_mode(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Bcast::kNone;
    if (a.size() == 1) return Bcast::kLeftScalar;
    if (b.size() == 1) return Bcast::kRightScalar;
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()) + " (only scalar broadcast is supported)");
}

}  // namespace

#define SIGNFLOW_BINARY_FORWARD(expr)                              \
    std::vector<double> out;                                       \
    const auto av = a.data();                                      \
    const auto bv = b.data();                                      \
    if (mode == Bcast::kNone) {                                    \
        out.resize(a.size());                                      \
        for (std::size_t i = 0; i < out.size(); ++i) {             \
            const double x = av[i], y = bv[i];                     \
            out[i] = (expr);                                       \
        }                                                          \
    } else if (mode == Bcast::kLeftScalar) {                       \
        out.resize(b.size());                                      \
        const double x = av[0];                                    \
        for (std::size_t i = 0; i < out.size(); ++i) {             \
            const double y = bv[i];                                \
            out[i] = (expr);                                       \
        }                                                          \
    } else {                                                       \
        out.resize(a.size());                                      \
        const double y = bv[0];                                    \
        for (std::size_t i = 0; i < out.size(); ++i) {             \
            const double x = av[i];                                \
            out[i] = (expr);                                       \
        }                                                          \
    }

Tensor add(const Tensor& a, const Tensor& b) {
    const Bcast mode = binary_mode("add", a, b);
    SIGNFLOW_BINARY_FORWARD(x + y)
    const Shape shape = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
    Tape* tape = common_tape(a, b);
    if (!tape) return make_op_result(nullptr, shape, std::move(out), {}, {}, "binary");
    const bool ta = a.tracked(), tb = b.tracked();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto back = [ta, tb, mode](const std::vector<double>& g,
                               const std::vector<std::vector<double>*>& pg) {
        int slot = 0;
        if (ta) {
            auto& ga = *pg[slot++];
            if (mode == Bcast::kLeftScalar) {
                for (double v : g) ga[0] += v;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
        }
        if (tb) {
            auto& gb = *pg[slot++];
            if (mode == Bcast::kRightScalar) {
                for (double v : g) gb[0] += v;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        }
    };
    return make_op_result(tape, shape, std::move(out), std::move(parents), std::move(back), "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const Bcast mode = binary_mode("sub", a, b);
    SIGNFLOW_BINARY_FORWARD(x - y)
    const Shape shape = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
    Tape* tape = common_tape(a, b);
    if (!tape) return make_op_result(nullptr, shape, std::move(out), {}, {}, "binary");
    const bool ta = a.tracked(), tb = b.tracked();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto back = [ta, tb, mode](const std::vector<double>& g,
                               const std::vector<std::vector<double>*>& pg) {
        int slot = 0;
        if (ta) {
            auto& ga = *pg[slot++];
            if (mode == Bcast::kLeftScalar) {
                for (double v : g) ga[0] += v;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
        }
        if (tb) {
            auto& gb = *pg[slot++];
            if (mode == Bcast::kRightScalar) {
                for (double v : g) gb[0] -= v;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        }
    };
    return make_op_result(tape, shape, std::move(out), std::move(parents), std::move(back), "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Bcast mode = binary_mode("mul", a, b);
    SIGNFLOW_BINARY_FORWARD(x * y)
    const Shape shape = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
    Tape* tape = common_tape(a, b);
    if (!tape) return make_op_result(nullptr, shape, std::move(out), {}, {}, "binary");
    const bool ta = a.tracked(), tb = b.tracked();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto back = [a, b, ta, tb, mode](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
        const auto av = a.data();
        const auto bv = b.data();
        int slot = 0;
        if (ta) {
            auto& ga = *pg[slot++];
            if (mode == Bcast::kLeftScalar) {
                for (std::size_t i = 0; i < g.size(); ++i) ga[0] += g[i] * bv[i];
            } else if (mode == Bcast::kRightScalar) {
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[0];
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
            }
        }
        if (tb) {
            auto& gb = *pg[slot++];
            if (mode == Bcast::kRightScalar) {
                for (std::size_t i = 0; i < g.size(); ++i) gb[0] += g[i] * av[i];
            } else if (mode == Bcast::kLeftScalar) {
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[0];
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
            }
        }
    };
    return make_op_result(tape, shape, std::move(out), std::move(parents), std::move(back), "mul");
}

Tensor div(const Tensor& a, const Tensor& b) {
    const Bcast mode = binary_mode("div", a, b);
    SIGNFLOW_BINARY_FORWARD(x / y)
    const Shape shape = mode == Bcast::kLeftScalar ? b.shape() : a.shape();
    Tape* tape = common_tape(a, b);
    if (!tape) return make_op_result(nullptr, shape, std::move(out), {}, {}, "binary");
    const bool ta = a.tracked(), tb = b.tracked();
    std::vector<int> parents;
    if (ta) parents.push_back(a.node());
    if (tb) parents.push_back(b.node());
    auto back = [a, b, ta, tb, mode](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
        const auto av = a.data();
        const auto bv = b.data();
        auto aval = [&](std::size_t i) { return mode == Bcast::kLeftScalar ? av[0] : av[i]; };
        auto bval = [&](std::size_t i) { return mode == Bcast::kRightScalar ? bv[0] : bv[i]; };
        int slot = 0;
        if (ta) {
            auto& ga = *pg[slot++];
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double contrib = g[i] / bval(i);
                ga[mode == Bcast::kLeftScalar ? 0 : i] += contrib;
            }
        }
        if (tb) {
            auto& gb = *pg[slot++];
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double bv_i = bval(i);
                const double contrib = -g[i] * aval(i) / (bv_i * bv_i);
                gb[mode == Bcast::kRightScalar ? 0 : i] += contrib;
            }
        }
    };
    return make_op_result(tape, shape, std::move(out), std::move(parents), std::move(back), "div");
}

#undef SIGNFLOW_BINARY_FORWARD

// ---- unary elementwise -------------------------------------------------

namespace {

template <class Fwd, class Dfn>
Tensor unary_op(const char* name, const Tensor& a, Fwd f, Dfn df) {
    std::vector<double> out(a.size());
    const auto av = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
    if (!a.tracked()) {
        check_finite(name, out);
        return Tensor(a.shape(), std::move(out));
    }
    Tensor result_copy(a.shape(), out);
    auto back = [a, result_copy, df](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
        auto& ga = *pg[0];
        const auto av = a.data();
        const auto yv = result_copy.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(av[i], yv[i]);
    };
    return make_op_result(a.tape(), a.shape(), std::move(out), {a.node()}, std::move(back), name);
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
    return unary_op(
        "scale", a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(
        "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor tanh(const Tensor& a) {
    return unary_op(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double v : a.data()) {
        if (v <= 0.0) throw ValueError("log: input must be strictly positive, got " + std::to_string(v));
    }
    return unary_op(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
    return unary_op(
        "abs", a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& a) {
    for (double v : a.data()) {
        if (v < 0.0) throw ValueError("sqrt: input must be non-negative, got " + std::to_string(v));
    }
    return unary_op(
        "sqrt", a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        "sigmoid", a,
        [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
        [](double, double y) { return y * (1.0 - y); });
}

// ---- reductions --------------------------------------------------------

namespace {

struct AxisSplit {
    std::size_t outer, ext, inner;
    Shape out_shape;
};

AxisSplit split_axis(const char* op, const Tensor& a, int axis) {
    if (axis < 0 || axis >= a.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(a.shape()));
    }
    AxisSplit s{1, static_cast<std::size_t>(a.shape()[static_cast<std::size_t>(axis)]), 1, {}};
    for (int i = 0; i < a.rank(); ++i) {
        if (i < axis) s.outer *= static_cast<std::size_t>(a.shape()[static_cast<std::size_t>(i)]);
        if (i > axis) s.inner *= static_cast<std::size_t>(a.shape()[static_cast<std::size_t>(i)]);
        if (i != axis) s.out_shape.push_back(a.shape()[static_cast<std::size_t>(i)]);
    }
    return s;
}

Tensor reduce_impl(const char* op, const Tensor& a, int axis, bool mean) {
    const AxisSplit s = split_axis(op, a, axis);
    std::vector<double> out(s.outer * s.inner, 0.0);
    const auto av = a.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t e = 0; e < s.ext; ++e)
            for (std::size_t i = 0; i < s.inner; ++i)
                out[o * s.inner + i] += av[(o * s.ext + e) * s.inner + i];
    if (mean) {
        for (double& v : out) v /= static_cast<double>(s.ext);
    }
    if (!a.tracked()) return make_op_result(nullptr, s.out_shape, std::move(out), {}, {}, op);
    const double w = mean ? 1.0 / static_cast<double>(s.ext) : 1.0;
    auto back = [s, w](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        auto& ga = *pg[0];
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t e = 0; e < s.ext; ++e)
                for (std::size_t i = 0; i < s.inner; ++i)
                    ga[(o * s.ext + e) * s.inner + i] += w * g[o * s.inner + i];
    };
    return make_op_result(a.tape(), s.out_shape, std::move(out), {a.node()}, std::move(back), op);
}

}  // namespace

Tensor reduce_mean(const Tensor& a, int axis) { return reduce_impl("reduce_mean", a, axis, true); }
Tensor reduce_sum(const Tensor& a, int axis) { return reduce_impl("reduce_sum", a, axis, false); }

Tensor reduce_mean_all(const Tensor& a) {
    Tensor flat = reshape(a, {static_cast<int>(a.size())});
    return reduce_mean(flat, 0);
}

Tensor reduce_sum_all(const Tensor& a) {
    Tensor flat = reshape(a, {static_cast<int>(a.size())});
    return reduce_sum(flat, 0);
}

// ---- rank-2 broadcasts --------------------------------------------------

namespace {

void require_vec_len(const char* op, const Tensor& v, int len) {
    if (v.rank() != 1 || v.extent(0) != len) {
        throw ShapeError(std::string(op) + ": vector shape " + shape_str(v.shape()) +
                         " does not match matrix extent " + std::to_string(len));
    }
}

}  // namespace

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    require_rank2("add_rowvec", m);
    require_vec_len("add_rowvec", v, m.extent(1));
    const int rows = m.extent(0), cols = m.extent(1);
    std::vector<double> out(m.size());
    const auto mv = m.data();
    const auto vv = v.data();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] = mv[static_cast<std::size_t>(i) * cols + j] + vv[j];
    Tape* tape = common_tape(m, v);
    if (!tape) return make_op_result(nullptr, {rows, cols}, std::move(out), {}, {}, "rowcol");
    const bool tm = m.tracked(), tv = v.tracked();
    std::vector<int> parents;
    if (tm) parents.push_back(m.node());
    if (tv) parents.push_back(v.node());
    auto back = [tm, tv, rows, cols](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
        int slot = 0;
        if (tm) {
            auto& gm = *pg[slot++];
            for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (tv) {
            auto& gv = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gv[j] += g[static_cast<std::size_t>(i) * cols + j];
        }
    };
    return make_op_result(tape, {rows, cols}, std::move(out), std::move(parents), std::move(back),
                          "add_rowvec");
}

Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
    require_rank2("mul_rowvec", m);
    require_vec_len("mul_rowvec", v, m.extent(1));
    const int rows = m.extent(0), cols = m.extent(1);
    std::vector<double> out(m.size());
    const auto mv = m.data();
    const auto vv = v.data();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] = mv[static_cast<std::size_t>(i) * cols + j] * vv[j];
    Tape* tape = common_tape(m, v);
    if (!tape) return make_op_result(nullptr, {rows, cols}, std::move(out), {}, {}, "rowcol");
    const bool tm = m.tracked(), tv = v.tracked();
    std::vector<int> parents;
    if (tm) parents.push_back(m.node());
    if (tv) parents.push_back(v.node());
    auto back = [m, v, tm, tv, rows, cols](const std::vector<double>& g,
                                           const std::vector<std::vector<double>*>& pg) {
        const auto mv = m.data();
        const auto vv = v.data();
        int slot = 0;
        if (tm) {
            auto& gm = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    gm[static_cast<std::size_t>(i) * cols + j] += g[static_cast<std::size_t>(i) * cols + j] * vv[j];
        }
        if (tv) {
            auto& gv = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    gv[j] += g[static_cast<std::size_t>(i) * cols + j] * mv[static_cast<std::size_t>(i) * cols + j];
        }
    };
    return make_op_result(tape, {rows, cols}, std::move(out), std::move(parents), std::move(back),
                          "mul_rowvec");
}

Tensor add_colvec(const Tensor& m, const Tensor& u) {
    require_rank2("add_colvec", m);
    require_vec_len("add_colvec", u, m.extent(0));
    const int rows = m.extent(0), cols = m.extent(1);
    std::vector<double> out(m.size());
    const auto mv = m.data();
    const auto uv = u.data();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] = mv[static_cast<std::size_t>(i) * cols + j] + uv[i];
    Tape* tape = common_tape(m, u);
    if (!tape) return make_op_result(nullptr, {rows, cols}, std::move(out), {}, {}, "rowcol");
    const bool tm = m.tracked(), tu = u.tracked();
    std::vector<int> parents;
    if (tm) parents.push_back(m.node());
    if (tu) parents.push_back(u.node());
    auto back = [tm, tu, rows, cols](const std::vector<double>& g,
                                     const std::vector<std::vector<double>*>& pg) {
        int slot = 0;
        if (tm) {
            auto& gm = *pg[slot++];
            for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (tu) {
            auto& gu = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) gu[i] += g[static_cast<std::size_t>(i) * cols + j];
        }
    };
    return make_op_result(tape, {rows, cols}, std::move(out), std::move(parents), std::move(back),
                          "add_colvec");
}

Tensor mul_colvec(const Tensor& m, const Tensor& u) {
    require_rank2("mul_colvec", m);
    require_vec_len("mul_colvec", u, m.extent(0));
    const int rows = m.extent(0), cols = m.extent(1);
    std::vector<double> out(m.size());
    const auto mv = m.data();
    const auto uv = u.data();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] = mv[static_cast<std::size_t>(i) * cols + j] * uv[i];
    Tape* tape = common_tape(m, u);
    if (!tape) return make_op_result(nullptr, {rows, cols}, std::move(out), {}, {}, "rowcol");
    const bool tm = m.tracked(), tu = u.tracked();
    std::vector<int> parents;
    if (tm) parents.push_back(m.node());
    if (tu) parents.push_back(u.node());
    auto back = [m, u, tm, tu, rows, cols](const std::vector<double>& g,
                                           const std::vector<std::vector<double>*>& pg) {
        const auto mv = m.data();
        const auto uv = u.data();
        int slot = 0;
        if (tm) {
            auto& gm = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    gm[static_cast<std::size_t>(i) * cols + j] += g[static_cast<std::size_t>(i) * cols + j] * uv[i];
        }
        if (tu) {
            auto& gu = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    gu[i] += g[static_cast<std::size_t>(i) * cols + j] * mv[static_cast<std::size_t>(i) * cols + j];
        }
    };
    return make_op_result(tape, {rows, cols}, std::move(out), std::move(parents), std::move(back),
                          "mul_colvec");
}

Tensor div_colvec(const Tensor& m, const Tensor& u) {
    require_rank2("div_colvec", m);
    require_vec_len("div_colvec", u, m.extent(0));
    const int rows = m.extent(0), cols = m.extent(1);
    std::vector<double> out(m.size());
    const auto mv = m.data();
    const auto uv = u.data();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] = mv[static_cast<std::size_t>(i) * cols + j] / uv[i];
    Tape* tape = common_tape(m, u);
    if (!tape) return make_op_result(nullptr, {rows, cols}, std::move(out), {}, {}, "rowcol");
    const bool tm = m.tracked(), tu = u.tracked();
    std::vector<int> parents;
    if (tm) parents.push_back(m.node());
    if (tu) parents.push_back(u.node());
    auto back = [m, u, tm, tu, rows, cols](const std::vector<double>& g,
                                           const std::vector<std::vector<double>*>& pg) {
        const auto mv = m.data();
        const auto uv = u.data();
        int slot = 0;
        if (tm) {
            auto& gm = *pg[slot++];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j)
                    gm[static_cast<std::size_t>(i) * cols + j] += g[static_cast<std::size_t>(i) * cols + j] / uv[i];
        }
        if (tu) {
            auto& gu = *pg[slot++];
            for (int i = 0; i < rows; ++i) {
                const double inv2 = 1.0 / (uv[i] * uv[i]);
                for (int j = 0; j < cols; ++j)
                    gu[i] -= g[static_cast<std::size_t>(i) * cols + j] * mv[static_cast<std::size_t>(i) * cols + j] * inv2;
            }
        }
    };
    return make_op_result(tape, {rows, cols}, std::move(out), std::move(parents), std::move(back),
                          "div_colvec");
}

// ---- assembly ops -------------------------------------------------------

namespace {

struct RowsView {
    int rows, cols;
};

RowsView as_rows(const char* op, const Tensor& t) {
    if (t.rank() == 1) return {1, t.extent(0)};
    if (t.rank() == 2) return {t.extent(0), t.extent(1)};
    throw ShapeError(std::string(op) + ": expected rank 1 or 2, got shape " + shape_str(t.shape()));
}

}  // namespace

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    const RowsView first = as_rows("concat_rows", parts[0]);
    int total_rows = 0;
    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        const RowsView v = as_rows("concat_rows", p);
        if (v.cols != first.cols) {
            throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(parts[0].shape()));
        }
        total_rows += v.rows;
        if (p.tracked()) {
            if (tape && tape != p.tape()) throw ValueError("concat_rows: mixed tapes");
            tape = p.tape();
        }
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(total_rows) * first.cols);
    for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());

    if (!tape) return Tensor({total_rows, first.cols}, std::move(out));

    std::vector<int> parents;
    std::vector<std::size_t> offsets;  // into the flat output, tracked parts only
    std::vector<std::size_t> sizes;
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        if (p.tracked()) {
            parents.push_back(p.node());
            offsets.push_back(off);
            sizes.push_back(p.size());
        }
        off += p.size();
    }
    auto back = [offsets, sizes](const std::vector<double>& g,
                                 const std::vector<std::vector<double>*>& pg) {
        for (std::size_t s = 0; s < offsets.size(); ++s) {
            auto& gp = *pg[s];
            for (std::size_t i = 0; i < sizes[s]; ++i) gp[i] += g[offsets[s] + i];
        }
    };
    return make_op_result(tape, {total_rows, first.cols}, std::move(out), std::move(parents),
                          std::move(back), "concat_rows");
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const int rows = as_rows("concat_cols", parts[0]).rows;
    int total_cols = 0;
    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        const RowsView v = as_rows("concat_cols", p);
        if (v.rows != rows) {
            throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(parts[0].shape()));
        }
        total_cols += v.cols;
        if (p.tracked()) {
            if (tape && tape != p.tape()) throw ValueError("concat_cols: mixed tapes");
            tape = p.tape();
        }
    }
    std::vector<double> out(static_cast<std::size_t>(rows) * total_cols);
    int col0 = 0;
    for (const Tensor& p : parts) {
        const int pc = as_rows("concat_cols", p).cols;
        const auto pv = p.data();
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pc; ++j)
                out[static_cast<std::size_t>(i) * total_cols + col0 + j] = pv[static_cast<std::size_t>(i) * pc + j];
        col0 += pc;
    }
    if (!tape) return Tensor({rows, total_cols}, std::move(out));

    std::vector<int> parents;
    std::vector<int> col_offsets;
    std::vector<int> col_counts;
    col0 = 0;
    for (const Tensor& p : parts) {
        const int pc = as_rows("concat_cols", p).cols;
        if (p.tracked()) {
            parents.push_back(p.node());
            col_offsets.push_back(col0);
            col_counts.push_back(pc);
        }
        col0 += pc;
    }
    auto back = [rows, total_cols, col_offsets, col_counts](
                    const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        for (std::size_t s = 0; s < col_offsets.size(); ++s) {
            auto& gp = *pg[s];
            const int pc = col_counts[s], c0 = col_offsets[s];
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < pc; ++j)
                    gp[static_cast<std::size_t>(i) * pc + j] += g[static_cast<std::size_t>(i) * total_cols + c0 + j];
        }
    };
    return make_op_result(tape, {rows, total_cols}, std::move(out), std::move(parents),
                          std::move(back), "concat_cols");
}

Tensor slice_rows(const Tensor& m, int r0, int r1) {
    require_rank2("slice_rows", m);
    const int rows = m.extent(0), cols = m.extent(1);
    if (r0 < 0 || r1 > rows || r0 >= r1) {
        throw ShapeError("slice_rows: range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                         ") invalid for shape " + shape_str(m.shape()));
    }
    const int n = r1 - r0;
    const auto mv = m.data();
    std::vector<double> out(mv.begin() + static_cast<std::size_t>(r0) * cols,
                            mv.begin() + static_cast<std::size_t>(r1) * cols);
    if (!m.tracked()) return Tensor({n, cols}, std::move(out));
    auto back = [r0, cols](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        auto& gm = *pg[0];
        const std::size_t base = static_cast<std::size_t>(r0) * cols;
        for (std::size_t i = 0; i < g.size(); ++i) gm[base + i] += g[i];
    };
    return make_op_result(m.tape(), {n, cols}, std::move(out), {m.node()}, std::move(back),
                          "slice_rows");
}

Tensor slice_cols(const Tensor& m, int c0, int c1) {
    require_rank2("slice_cols", m);
    const int rows = m.extent(0), cols = m.extent(1);
    if (c0 < 0 || c1 > cols || c0 >= c1) {
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") invalid for shape " + shape_str(m.shape()));
    }
    const int n = c1 - c0;
    std::vector<double> out(static_cast<std::size_t>(rows) * n);
    const auto mv = m.data();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = mv[static_cast<std::size_t>(i) * cols + c0 + j];
    if (!m.tracked()) return Tensor({rows, n}, std::move(out));
    auto back = [rows, cols, c0, n](const std::vector<double>& g,
                                    const std::vector<std::vector<double>*>& pg) {
        auto& gm = *pg[0];
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < n; ++j)
                gm[static_cast<std::size_t>(i) * cols + c0 + j] += g[static_cast<std::size_t>(i) * n + j];
    };
    return make_op_result(m.tape(), {rows, n}, std::move(out), {m.node()}, std::move(back),
                          "slice_cols");
}

Tensor take_row(const Tensor& m, int row) {
    require_rank2("take_row", m);
    const int rows = m.extent(0), cols = m.extent(1);
    if (row < 0 || row >= rows) {
        throw ShapeError("take_row: row " + std::to_string(row) + " invalid for shape " +
                         shape_str(m.shape()));
    }
    const auto mv = m.data();
    std::vector<double> out(mv.begin() + static_cast<std::size_t>(row) * cols,
                            mv.begin() + static_cast<std::size_t>(row + 1) * cols);
    if (!m.tracked()) return Tensor({cols}, std::move(out));
    auto back = [row, cols](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        auto& gm = *pg[0];
        const std::size_t base = static_cast<std::size_t>(row) * cols;
        for (int j = 0; j < cols; ++j) gm[base + j] += g[static_cast<std::size_t>(j)];
    };
    return make_op_result(m.tape(), {cols}, std::move(out), {m.node()}, std::move(back), "take_row");
}

Tensor take_rows(const Tensor& m, std::span<const int> rows) {
    require_rank2("take_rows", m);
    const int nrows = m.extent(0), cols = m.extent(1);
    if (rows.empty()) throw ShapeError("take_rows: empty index list");
    for (int r : rows) {
        if (r < 0 || r >= nrows) {
            throw ShapeError("take_rows: index " + std::to_string(r) + " invalid for shape " +
                             shape_str(m.shape()));
        }
    }
    std::vector<double> out;
    out.reserve(rows.size() * static_cast<std::size_t>(cols));
    const auto mv = m.data();
    for (int r : rows) {
        out.insert(out.end(), mv.begin() + static_cast<std::size_t>(r) * cols,
                   mv.begin() + static_cast<std::size_t>(r + 1) * cols);
    }
    const Shape out_shape{static_cast<int>(rows.size()), cols};
    if (!m.tracked()) return Tensor(out_shape, std::move(out));
    std::vector<int> idx(rows.begin(), rows.end());
    auto back = [idx, cols](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        auto& gm = *pg[0];
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t dst = static_cast<std::size_t>(idx[k]) * cols;
            const std::size_t src = k * static_cast<std::size_t>(cols);
            for (int j = 0; j < cols; ++j) gm[dst + j] += g[src + j];
        }
    };
    return make_op_result(m.tape(), out_shape, std::move(out), {m.node()}, std::move(back),
                          "take_rows");
}

Tensor reshape(const Tensor& a, Shape shape) {
    check_positive_extents(shape);
    if (shape_numel(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    if (!a.tracked()) return Tensor(std::move(shape), std::move(out));
    auto back = [](const std::vector<double>& g, const std::vector<std::vector<double>*>& pg) {
        auto& ga = *pg[0];
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return make_op_result(a.tape(), std::move(shape), std::move(out), {a.node()}, std::move(back),
                          "reshape");
}

Tensor random_uniform(Shape shape, RngStream& rng, double lo, double hi) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(data));
}

Tensor random_gaussian(Shape shape, RngStream& rng, double stddev) {
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = rng.gaussian() * stddev;
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace signflow
