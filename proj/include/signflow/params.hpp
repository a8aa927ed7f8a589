#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "signflow/tensor.hpp"

namespace signflow {

// Named parameter table. All parameters are created once, in a fixed order,
// when the model is built; values are updated in place by the optimizer.
class ParamStore {
  public:
    enum class Init { kZero, kOne, kXavier, kGaussianSmall };

    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

    void create(const std::string& name, Shape shape, Init init);
    bool contains(const std::string& name) const { return values_.count(name) > 0; }
    const Tensor& values(const std::string& name) const;
    void set_values(const std::string& name, Tensor v);

    std::vector<std::string> names() const;  // sorted
    std::size_t parameter_count() const;
    std::uint64_t seed() const { return seed_; }

  private:
    std::map<std::string, Tensor> values_;
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

// Per-forward-pass view of the store. With a tape, each parameter becomes a
// single leaf (fetches are cached so gradients accumulate on one node);
// without a tape the raw values pass through untracked. Training and
// inference share the same forward code via this handle.
class ParamBinding {
  public:
    ParamBinding(ParamStore& store, Tape* tape) : store_(&store), tape_(tape) {}

    Tensor operator()(const std::string& name);
    Tape* tape() const { return tape_; }

    // Pre-binds an already-tracked tensor in place of the stored values
    // (used by gradient checks to differentiate through chosen parameters).
    void inject(const std::string& name, Tensor value) { bound_[name] = std::move(value); }

    // Gradients for every parameter bound during this pass.
    std::map<std::string, Tensor> gradients(const GradMap& grads) const;

  private:
    ParamStore* store_;
    Tape* tape_;
    std::map<std::string, Tensor> bound_;
};

}  // namespace signflow
