#pragma once

#include <string>

#include "signflow/attention.hpp"
#include "signflow/params.hpp"
#include "signflow/tensor.hpp"

namespace signflow {

// declare_* registers parameters under a prefix at model-build time; the
// matching forward helper binds them during a pass. Keeping the two beside
// each other pins the naming scheme in one place.

void declare_linear(ParamStore& store, const std::string& prefix, int in, int out,
                    ParamStore::Init weight_init = ParamStore::Init::kXavier);
Tensor linear(ParamBinding& params, const std::string& prefix, const Tensor& x);

void declare_layer_norm(ParamStore& store, const std::string& prefix, int width);
Tensor layer_norm(ParamBinding& params, const std::string& prefix, const Tensor& x);

void declare_mha(ParamStore& store, const std::string& prefix, int d_model);
MhaParams mha_params(ParamBinding& params, const std::string& prefix);

void declare_ffn(ParamStore& store, const std::string& prefix, int d_model, int hidden);
Tensor ffn(ParamBinding& params, const std::string& prefix, const Tensor& x);

}  // namespace signflow
