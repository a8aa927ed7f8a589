#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "signflow/pose.hpp"
#include "signflow/tensor.hpp"

namespace signflow {

// Composite training objective: joint L1 + bone orientation + soft-DTW,
// balanced by inverse-EMA adaptive weights. The flow-matching term rides
// along with a fixed weight outside the adaptive trio.

struct EmaState {
    std::array<double, 3> means{0.0, 0.0, 0.0};
    bool initialized = false;
    double rho = 0.99;
    double eps = 1e-8;
};

struct LossReport {
    std::int64_t iteration = 0;
    double joint = 0.0;
    double bone = 0.0;
    double soft_dtw = 0.0;
    std::array<double, 3> weights{0.0, 0.0, 0.0};
    double total = 0.0;      // weighted sum of the adaptive trio
    double flow = 0.0;       // flow-matching term (fixed weight, reported separately)
    double flow_weight = 1.0;
    double conf = 0.0;       // predicted-confidence supervision term
    double conf_weight = 0.0;
    double objective = 0.0;  // total + flow_weight * flow + conf_weight * conf

    std::string to_json_line() const;
    static LossReport from_json_line(const std::string& line);
};

// Mean absolute joint error: per frame (1/J) sum_j ||p_j - p_hat_j||_1,
// averaged over frames. Frames are [J, D] tensors.
Tensor joint_loss(std::span<const Tensor> pred, std::span<const Tensor> gt);

// Squared distance between unit bone directions, averaged over valid bones
// and frames. Bones degenerate in either pose (zero length) are skipped;
// the skip count is reported through `degenerate_bones` when non-null.
Tensor bone_loss(std::span<const Tensor> pred, std::span<const Tensor> gt,
                 const Skeleton& skeleton, int* degenerate_bones = nullptr);

// Smooth minimum: -gamma * log sum_i exp(-a_i / gamma), max-shifted for
// stability. Always <= min(values); approaches min as gamma -> 0.
double softmin(std::span<const double> values, double gamma);
Tensor softmin(std::span<const Tensor> values, double gamma);  // scalar tensors

// Soft-DTW over per-frame descriptors (rank-1 tensors of equal width),
// squared Euclidean cell cost, recorded on the tape via the unrolled DP.
Tensor soft_dtw(std::span<const Tensor> x, std::span<const Tensor> y, double gamma);

// Value-route soft-DTW: forward DP plus the standard backward recursion for
// the gradient w.r.t. x. Independent of the tape implementation.
struct SoftDtwResult {
    double value = 0.0;
    std::vector<std::vector<double>> grad_x;  // per frame, per descriptor coordinate
};
SoftDtwResult soft_dtw_value(const std::vector<std::vector<double>>& x,
                             const std::vector<std::vector<double>>& y, double gamma);

// EMA of per-term losses (Eq. updates L <- rho L + (1 - rho) fresh; the
// first call initializes L to the fresh values).
EmaState ema_update(EmaState state, std::span<const double> fresh);

// lambda_i = (L_i + eps)^-1 / sum_j (L_j + eps)^-1; strictly positive,
// sums to one, anti-monotone in each EMA.
std::array<double, 3> adaptive_weights(const EmaState& state);

// Weights from the current EMA state, weighted sum, then the EMA absorbs the
// fresh (pre-weight) values. Weights are constants w.r.t. gradients.
LossReport total_loss(double joint, double bone, double soft_dtw_term, EmaState& state,
                      std::int64_t iteration);

}  // namespace signflow
