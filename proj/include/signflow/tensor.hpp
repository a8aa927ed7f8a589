#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "signflow/error.hpp"
#include "signflow/rng.hpp"

namespace signflow {

// Dense row-major tensor of 64-bit floats with an optional handle onto a
// reverse-mode tape. Tensors are cheap values: copies share the underlying
// buffer, every op allocates a fresh result. A rank-0 tensor is a scalar.
//
// Forward ops validate that every produced value is finite; NaN/Inf raises
// NumericError instead of propagating.

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;
class GradMap;

class Tensor {
  public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const;
    int extent(int axis) const;

    std::span<const double> data() const;
    double value() const;                  // requires size() == 1
    double at(int i) const;                // rank 1
    double at(int i, int j) const;         // rank 2
    std::vector<double> to_vector() const;

    bool tracked() const { return node_ >= 0; }
    int node() const { return node_; }
    Tape* tape() const { return tape_; }
    Tensor detached() const;               // same buffer, no tape handle

    bool defined() const { return static_cast<bool>(data_); }

  private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;

    friend class Tape;
    friend Tensor make_op_result(Tape* tape, Shape shape, std::vector<double> data,
                                 std::vector<int> parents,
                                 std::function<void(const std::vector<double>&,
                                                    const std::vector<std::vector<double>*>&)> back,
                                 const char* op_name);
};

// Gradients keyed by tape node id, produced by Tape::backward. Leaves that
// the loss never reached report a zero gradient of the right shape.
class GradMap {
  public:
    Tensor grad(const Tensor& leaf) const;
    bool reached(const Tensor& leaf) const;

  private:
    friend class Tape;
    std::vector<std::vector<double>> grads_;
};

// Gradient tape, rebuilt per forward pass. Nodes are appended in execution
// order, so parents always precede children; backward walks the list once
// in reverse. A tape is confined to a single thread.
class Tape {
  public:
    using BackFn = std::function<void(const std::vector<double>& grad_out,
                                      const std::vector<std::vector<double>*>& parent_grads)>;

    // Registers values as a differentiable leaf. The returned tensor must be
    // used in place of the original to participate in backward().
    Tensor leaf(const Tensor& values);
    Tensor leaf(Shape shape, std::vector<double> data);

    GradMap backward(const Tensor& loss);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    std::size_t node_size(int id) const { return nodes_[static_cast<std::size_t>(id)].size; }
    int record(std::vector<int> parents, std::size_t out_size, BackFn back);

  private:
    struct Node {
        std::vector<int> parents;
        std::size_t size;
        BackFn back;
    };
    std::vector<Node> nodes_;
};

// Free-function form of the tape walk; loss must be a tracked scalar.
GradMap backward(const Tensor& loss);

// ---- operations ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);

// Binary elementwise; shapes must match exactly or one side must be scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // domain error on values <= 0
Tensor abs(const Tensor& a);   // subgradient 0 at ties
Tensor sqrt(const Tensor& a);  // domain error on values < 0
Tensor sigmoid(const Tensor& a);

Tensor reduce_mean(const Tensor& a, int axis);
Tensor reduce_sum(const Tensor& a, int axis);
Tensor reduce_mean_all(const Tensor& a);
Tensor reduce_sum_all(const Tensor& a);

// Explicit row/column broadcasts over rank-2 tensors. v spans columns
// (applied to every row), u spans rows (applied across each row).
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul_rowvec(const Tensor& m, const Tensor& v);
Tensor add_colvec(const Tensor& m, const Tensor& u);
Tensor mul_colvec(const Tensor& m, const Tensor& u);
Tensor div_colvec(const Tensor& m, const Tensor& u);

Tensor concat_rows(std::span<const Tensor> parts);  // rank-1 parts count as single rows
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& m, int r0, int r1);
Tensor slice_cols(const Tensor& m, int c0, int c1);
Tensor take_row(const Tensor& m, int row);              // rank-1 result
Tensor take_rows(const Tensor& m, std::span<const int> rows);  // gather, scatter-add gradient

Tensor reshape(const Tensor& a, Shape shape);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor random_uniform(Shape shape, RngStream& rng, double lo, double hi);
Tensor random_gaussian(Shape shape, RngStream& rng, double stddev = 1.0);

}  // namespace signflow
