#include "signflow/params.hpp"

#include <cmath>

#include "signflow/error.hpp"
#include "signflow/rng.hpp"

namespace signflow {

void ParamStore::create(const std::string& name, Shape shape, Init init) {
    if (contains(name)) throw ValueError("param '" + name + "' already exists");
    RngStream rng = RngStream::derive(seed_, "param-init", counter_++);
    Tensor v;
    switch (init) {
        case Init::kZero:
            v = Tensor::zeros(shape);
            break;
        case Init::kOne:
            v = Tensor::full(shape, 1.0);
            break;
        case Init::kXavier: {
            const int fan_in = shape.size() >= 1 ? shape[0] : 1;
            const int fan_out = shape.size() >= 2 ? shape[1] : 1;
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            v = random_uniform(shape, rng, -bound, bound);
            break;
        }
        case Init::kGaussianSmall:
            v = random_gaussian(shape, rng, 0.02);
            break;
    }
    values_.emplace(name, std::move(v));
}

const Tensor& ParamStore::values(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ValueError("unknown parameter '" + name + "'");
    return it->second;
}

void ParamStore::set_values(const std::string& name, Tensor v) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ValueError("unknown parameter '" + name + "'");
    if (v.shape() != it->second.shape()) {
        throw ShapeError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                         ", cannot assign " + shape_str(v.shape()));
    }
    it->second = std::move(v);
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [name, _] : values_) out.push_back(name);
    return out;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : values_) n += v.size();
    return n;
}

Tensor ParamBinding::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    if (!tape_) {
        // Inference fetches stay read-only so concurrent articulator
        // denoisers can share one binding.
        return store_->values(name).detached();
    }
    Tensor t = tape_->leaf(store_->values(name));
    bound_.emplace(name, t);
    return t;
}

std::map<std::string, Tensor> ParamBinding::gradients(const GradMap& grads) const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, leaf] : bound_) out.emplace(name, grads.grad(leaf));
    return out;
}

}  // namespace signflow
