#include "signflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "signflow/error.hpp"

namespace signflow {

using nlohmann::json;

std::string LossReport::to_json_line() const {
    json j{{"iteration", iteration},
           {"joint", joint},
           {"bone", bone},
           {"soft_dtw", soft_dtw},
           {"lambda", weights},
           {"total", total},
           {"flow", flow},
           {"flow_weight", flow_weight},
           {"conf", conf},
           {"conf_weight", conf_weight},
           {"objective", objective}};
    return j.dump();
}

LossReport LossReport::from_json_line(const std::string& line) {
    json j = json::parse(line);
    LossReport r;
    r.iteration = j.at("iteration").get<std::int64_t>();
    r.joint = j.at("joint").get<double>();
    r.bone = j.at("bone").get<double>();
    r.soft_dtw = j.at("soft_dtw").get<double>();
    auto w = j.at("lambda");
    for (int i = 0; i < 3; ++i) r.weights[static_cast<std::size_t>(i)] = w.at(i).get<double>();
    r.total = j.at("total").get<double>();
    r.flow = j.value("flow", 0.0);
    r.flow_weight = j.value("flow_weight", 1.0);
    r.conf = j.value("conf", 0.0);
    r.conf_weight = j.value("conf_weight", 0.0);
    r.objective = j.value("objective", r.total);
    return r;
}

namespace {

void require_same_layout(const char* op, std::span<const Tensor> pred, std::span<const Tensor> gt) {
    if (pred.empty() || gt.empty()) throw ShapeError(std::string(op) + ": empty sequence");
    if (pred.size() != gt.size()) {
        throw ShapeError(std::string(op) + ": sequence lengths differ, " +
                         std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
    }
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].shape() != gt[t].shape()) {
            throw ShapeError(std::string(op) + ": frame " + std::to_string(t) + " shapes differ, " +
                             shape_str(pred[t].shape()) + " vs " + shape_str(gt[t].shape()));
        }
    }
}

}  // namespace

Tensor joint_loss(std::span<const Tensor> pred, std::span<const Tensor> gt) {
    require_same_layout("joint_loss", pred, gt);
    Tensor acc;
    const double coords_per_joint = static_cast<double>(pred[0].extent(1));
    for (std::size_t t = 0; t < pred.size(); ++t) {
        Tensor per_frame = scale(reduce_mean_all(abs(sub(pred[t], gt[t]))), coords_per_joint);
        acc = acc.defined() ? add(acc, per_frame) : per_frame;
    }
    return scale(acc, 1.0 / static_cast<double>(pred.size()));
}

namespace {

struct BoneEnds {
    Tensor parents;  // [B, 2]
    Tensor children;
};

// Gathers bone endpoints for the bones listed in `keep`.
BoneEnds gather_bones(const Tensor& frame, const Skeleton& skeleton, std::span<const int> keep) {
    std::vector<int> parent_idx, child_idx;
    parent_idx.reserve(keep.size());
    child_idx.reserve(keep.size());
    for (int b : keep) {
        parent_idx.push_back(skeleton.bones[static_cast<std::size_t>(b)].first);
        child_idx.push_back(skeleton.bones[static_cast<std::size_t>(b)].second);
    }
    return BoneEnds{take_rows(frame, parent_idx), take_rows(frame, child_idx)};
}

Tensor unit_directions(const BoneEnds& ends) {
    Tensor d = sub(ends.children, ends.parents);             // [B, 2]
    Tensor len = sqrt(reduce_sum(mul(d, d), 1));             // [B]
    return div_colvec(d, len);
}

bool bone_is_degenerate(const Tensor& frame, int parent, int child) {
    return frame.at(parent, 0) == frame.at(child, 0) && frame.at(parent, 1) == frame.at(child, 1);
}

}  // namespace

Tensor bone_loss(std::span<const Tensor> pred, std::span<const Tensor> gt, const Skeleton& skeleton,
                 int* degenerate_bones) {
    require_same_layout("bone_loss", pred, gt);
    if (skeleton.bones.empty()) throw ValueError("bone_loss: skeleton has no bones");
    int skipped = 0;
    int valid_total = 0;
    Tensor acc;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        std::vector<int> keep;
        keep.reserve(skeleton.bones.size());
        for (std::size_t b = 0; b < skeleton.bones.size(); ++b) {
            const auto [parent, child] = skeleton.bones[b];
            if (bone_is_degenerate(pred[t], parent, child) ||
                bone_is_degenerate(gt[t], parent, child)) {
                ++skipped;
                continue;
            }
            keep.push_back(static_cast<int>(b));
        }
        if (keep.empty()) continue;
        valid_total += static_cast<int>(keep.size());
        Tensor dir_pred = unit_directions(gather_bones(pred[t], skeleton, keep));
        Tensor dir_gt = unit_directions(gather_bones(gt[t], skeleton, keep));
        Tensor diff = sub(dir_pred, dir_gt);
        Tensor frame_sum = reduce_sum_all(mul(diff, diff));
        acc = acc.defined() ? add(acc, frame_sum) : frame_sum;
    }
    if (degenerate_bones) *degenerate_bones = skipped;
    if (valid_total == 0) throw ValueError("bone_loss: no valid bones (all degenerate)");
    return scale(acc, 1.0 / static_cast<double>(valid_total));
}

// ---- smooth minimum -----------------------------------------------------

double softmin(std::span<const double> values, double gamma) {
    if (values.empty()) throw ValueError("softmin: empty value list");
    if (gamma <= 0.0) throw ValueError("softmin: gamma must be positive");
    double m = std::numeric_limits<double>::infinity();
    for (double v : values) m = std::min(m, v);
    if (!std::isfinite(m)) return m;  // all paths blocked
    double sum = 0.0;
    for (double v : values) {
        if (std::isinf(v)) continue;
        sum += std::exp(-(v - m) / gamma);
    }
    return m - gamma * std::log(sum);
}

Tensor softmin(std::span<const Tensor> values, double gamma) {
    if (values.empty()) throw ValueError("softmin: empty value list");
    if (gamma <= 0.0) throw ValueError("softmin: gamma must be positive");
    double m = std::numeric_limits<double>::infinity();
    for (const Tensor& v : values) m = std::min(m, v.value());
    Tensor sum;
    for (const Tensor& v : values) {
        Tensor term = exp(scale(add_scalar(v, -m), -1.0 / gamma));
        sum = sum.defined() ? add(sum, term) : term;
    }
    return add_scalar(scale(log(sum), -gamma), m);
}

// ---- soft dynamic time warping -------------------------------------------

namespace {

void require_descriptors(const char* op, std::span<const Tensor> seq) {
    if (seq.empty()) throw ValueError(std::string(op) + ": empty sequence");
    for (const Tensor& f : seq) {
        if (f.rank() != 1 || f.shape() != seq[0].shape()) {
            throw ShapeError(std::string(op) + ": descriptors must be rank-1 tensors of equal width");
        }
    }
}

Tensor squared_distance(const Tensor& a, const Tensor& b) {
    Tensor d = sub(a, b);
    return reduce_sum_all(mul(d, d));
}

}  // namespace

Tensor soft_dtw(std::span<const Tensor> x, std::span<const Tensor> y, double gamma) {
    require_descriptors("soft_dtw", x);
    require_descriptors("soft_dtw", y);
    if (gamma <= 0.0) throw ValueError("soft_dtw: gamma must be positive");
    if (x[0].shape() != y[0].shape()) {
        throw ShapeError("soft_dtw: descriptor widths differ, " + shape_str(x[0].shape()) + " vs " +
                         shape_str(y[0].shape()));
    }
    const std::size_t n = x.size(), m = y.size();
    std::vector<Tensor> row(m);       // R(i, *)
    std::vector<Tensor> prev_row(m);  // R(i-1, *)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            Tensor cost = squared_distance(x[i], y[j]);
            Tensor best;
            if (i == 0 && j == 0) {
                row[j] = cost;
                continue;
            }
            if (i == 0) {
                best = row[j - 1];
            } else if (j == 0) {
                best = prev_row[j];
            } else {
                std::array<Tensor, 3> choices{prev_row[j], row[j - 1], prev_row[j - 1]};
                best = softmin(choices, gamma);
            }
            row[j] = add(cost, best);
        }
        std::swap(prev_row, row);
    }
    return prev_row[m - 1];
}

SoftDtwResult soft_dtw_value(const std::vector<std::vector<double>>& x,
                             const std::vector<std::vector<double>>& y, double gamma) {
    if (x.empty() || y.empty()) throw ValueError("soft_dtw_value: empty sequence");
    if (gamma <= 0.0) throw ValueError("soft_dtw_value: gamma must be positive");
    const std::size_t n = x.size(), m = y.size(), w = x[0].size();
    for (const auto& f : x) {
        if (f.size() != w) throw ShapeError("soft_dtw_value: ragged descriptors in x");
    }
    for (const auto& f : y) {
        if (f.size() != w) throw ShapeError("soft_dtw_value: descriptor width mismatch");
    }
    const double inf = std::numeric_limits<double>::infinity();

    auto cell_cost = [&](std::size_t i, std::size_t j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) {
            const double d = x[i][k] - y[j][k];
            acc += d * d;
        }
        return acc;
    };

    // Forward DP over an (n+2) x (m+2) lattice; index 0 and n+1/m+1 are borders.
    std::vector<std::vector<double>> r(n + 2, std::vector<double>(m + 2, inf));
    std::vector<std::vector<double>> d(n + 2, std::vector<double>(m + 2, 0.0));
    r[0][0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            d[i][j] = cell_cost(i - 1, j - 1);
            const std::array<double, 3> prev{r[i - 1][j], r[i][j - 1], r[i - 1][j - 1]};
            r[i][j] = d[i][j] + softmin(prev, gamma);
        }
    }
    const double value = r[n][m];

    // Standard backward recursion for the alignment-expectation matrix E.
    std::vector<std::vector<double>> e(n + 2, std::vector<double>(m + 2, 0.0));
    for (std::size_t i = 1; i <= n; ++i) r[i][m + 1] = -inf;
    for (std::size_t j = 1; j <= m; ++j) r[n + 1][j] = -inf;
    r[n + 1][m + 1] = r[n][m];
    e[n + 1][m + 1] = 1.0;
    for (std::size_t i = n; i >= 1; --i) {
        for (std::size_t j = m; j >= 1; --j) {
            const double a = std::exp((r[i + 1][j] - r[i][j] - d[i + 1][j]) / gamma);
            const double b = std::exp((r[i][j + 1] - r[i][j] - d[i][j + 1]) / gamma);
            const double c = std::exp((r[i + 1][j + 1] - r[i][j] - d[i + 1][j + 1]) / gamma);
            e[i][j] = a * e[i + 1][j] + b * e[i][j + 1] + c * e[i + 1][j + 1];
        }
    }

    SoftDtwResult out;
    out.value = value;
    out.grad_x.assign(n, std::vector<double>(w, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double weight = e[i + 1][j + 1];
            if (weight == 0.0) continue;
            for (std::size_t k = 0; k < w; ++k) {
                out.grad_x[i][k] += weight * 2.0 * (x[i][k] - y[j][k]);
            }
        }
    }
    return out;
}

// ---- adaptive weighting ---------------------------------------------------

EmaState ema_update(EmaState state, std::span<const double> fresh) {
    if (fresh.size() != 3) throw ValueError("ema_update: expected 3 loss terms");
    for (double v : fresh) {
        if (v < 0.0) throw ValueError("ema_update: losses must be non-negative, got " + std::to_string(v));
    }
    if (!state.initialized) {
        for (int i = 0; i < 3; ++i) state.means[static_cast<std::size_t>(i)] = fresh[static_cast<std::size_t>(i)];
        state.initialized = true;
        return state;
    }
    for (int i = 0; i < 3; ++i) {
        auto& mean = state.means[static_cast<std::size_t>(i)];
        mean = state.rho * mean + (1.0 - state.rho) * fresh[static_cast<std::size_t>(i)];
    }
    return state;
}

std::array<double, 3> adaptive_weights(const EmaState& state) {
    if (!state.initialized) throw ValueError("adaptive_weights: EMA state not initialized");
    std::array<double, 3> inv{};
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
        inv[static_cast<std::size_t>(i)] = 1.0 / (state.means[static_cast<std::size_t>(i)] + state.eps);
        sum += inv[static_cast<std::size_t>(i)];
    }
    for (double& v : inv) v /= sum;
    return inv;
}

LossReport total_loss(double joint, double bone, double soft_dtw_term, EmaState& state,
                      std::int64_t iteration) {
    const std::array<double, 3> fresh{joint, bone, soft_dtw_term};
    for (double v : fresh) {
        if (!std::isfinite(v)) throw ValueError("total_loss: non-finite loss term");
    }
    if (!state.initialized) state = ema_update(state, fresh);
    LossReport report;
    report.iteration = iteration;
    report.joint = joint;
    report.bone = bone;
    report.soft_dtw = soft_dtw_term;
    report.weights = adaptive_weights(state);
    report.total = report.weights[0] * joint + report.weights[1] * bone + report.weights[2] * soft_dtw_term;
    report.objective = report.total;
    state = ema_update(state, fresh);
    return report;
}

}  // namespace signflow
