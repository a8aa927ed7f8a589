#pragma once

#include <functional>
#include <string>

#include "signflow/tensor.hpp"

namespace signflow {

// Velocity-target convention for flow-matching training. Both are built on
// the linear interpolant x_t = (1 - t) z + t x0:
//   kDisplacement   — target x0 - z, finite for all t (the default).
//   kEndpointRatio  — target (x0 - x_t) / t, singular at t = 0; under the
//                     same interpolant it equals ((1 - t) / t) (x0 - z).
enum class FlowTarget { kDisplacement, kEndpointRatio };

std::string to_string(FlowTarget target);
FlowTarget flow_target_from_string(const std::string& name);

// Smallest interpolation time sampled during training; keeps kEndpointRatio
// finite when selected.
inline constexpr double kFlowTimeMin = 0.01;

struct SamplerConfig {
    int n_steps = 8;
    FlowTarget target = FlowTarget::kDisplacement;

    void validate() const;
};

struct FlowSample {
    Tensor x0;
    Tensor z;
    Tensor xt;
    double t = 0.0;
};

// x_t = (1 - t) z + t x0, with t in [0, 1].
Tensor interpolate(const Tensor& z, const Tensor& x0, double t);

FlowSample make_flow_sample(const Tensor& z, const Tensor& x0, double t);

Tensor fm_target(const Tensor& z, const Tensor& x0, const Tensor& xt, double t, FlowTarget target);

// Mean squared error between predicted and target velocity.
Tensor fm_loss(const Tensor& predicted, const Tensor& target);

// Deterministic forward Euler from t=0 (state z) to t=1 with uniform steps.
using VelocityField = std::function<Tensor(const Tensor& x, double t)>;
Tensor euler_sample(const VelocityField& field, const Tensor& z, int n_steps);

}  // namespace signflow
