#include "signflow/flow.hpp"

#include "signflow/error.hpp"

namespace signflow {

std::string to_string(FlowTarget target) {
    return target == FlowTarget::kDisplacement ? "displacement" : "endpoint_ratio";
}

FlowTarget flow_target_from_string(const std::string& name) {
    if (name == "displacement") return FlowTarget::kDisplacement;
    if (name == "endpoint_ratio") return FlowTarget::kEndpointRatio;
    throw ConfigError("unknown flow target '" + name + "' (displacement | endpoint_ratio)");
}

void SamplerConfig::validate() const {
    if (n_steps < 1) throw ValueError("sampler: n_steps must be >= 1");
}

Tensor interpolate(const Tensor& z, const Tensor& x0, double t) {
    if (z.shape() != x0.shape()) {
        throw ShapeError("interpolate: shape mismatch " + shape_str(z.shape()) + " vs " +
                         shape_str(x0.shape()));
    }
    if (t < 0.0 || t > 1.0) throw ValueError("interpolate: t must lie in [0, 1]");
    return add(scale(z, 1.0 - t), scale(x0, t));
}

FlowSample make_flow_sample(const Tensor& z, const Tensor& x0, double t) {
    return FlowSample{x0, z, interpolate(z, x0, t), t};
}

Tensor fm_target(const Tensor& z, const Tensor& x0, const Tensor& xt, double t, FlowTarget target) {
    if (z.shape() != x0.shape() || xt.shape() != x0.shape()) {
        throw ShapeError("fm_target: shape mismatch among z " + shape_str(z.shape()) + ", x0 " +
                         shape_str(x0.shape()) + ", x_t " + shape_str(xt.shape()));
    }
    switch (target) {
        case FlowTarget::kDisplacement:
            return sub(x0, z);
        case FlowTarget::kEndpointRatio:
            if (t < kFlowTimeMin) {
                throw ValueError("fm_target: endpoint_ratio is singular below t = " +
                                 std::to_string(kFlowTimeMin));
            }
            return scale(sub(x0, xt), 1.0 / t);
    }
    throw ValueError("fm_target: unknown convention");
}

Tensor fm_loss(const Tensor& predicted, const Tensor& target) {
    if (predicted.shape() != target.shape()) {
        throw ShapeError("fm_loss: shape mismatch " + shape_str(predicted.shape()) + " vs " +
                         shape_str(target.shape()));
    }
    Tensor diff = sub(predicted, target);
    return reduce_mean_all(mul(diff, diff));
}

Tensor euler_sample(const VelocityField& field, const Tensor& z, int n_steps) {
    if (n_steps < 1) throw ValueError("euler_sample: n_steps must be >= 1");
    const double dt = 1.0 / static_cast<double>(n_steps);
    Tensor x = z;
    for (int step = 0; step < n_steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        x = add(x, scale(field(x, t), dt));
    }
    return x;
}

}  // namespace signflow
