#include "signflow/nn.hpp"

namespace signflow {

void declare_linear(ParamStore& store, const std::string& prefix, int in, int out,
                    ParamStore::Init weight_init) {
    store.create(prefix + ".w", {in, out}, weight_init);
    store.create(prefix + ".b", {out}, ParamStore::Init::kZero);
}

Tensor linear(ParamBinding& params, const std::string& prefix, const Tensor& x) {
    return add_rowvec(matmul(x, params(prefix + ".w")), params(prefix + ".b"));
}

void declare_layer_norm(ParamStore& store, const std::string& prefix, int width) {
    store.create(prefix + ".g", {width}, ParamStore::Init::kOne);
    store.create(prefix + ".b", {width}, ParamStore::Init::kZero);
}

Tensor layer_norm(ParamBinding& params, const std::string& prefix, const Tensor& x) {
    constexpr double kEps = 1e-5;
    Tensor mu = reduce_mean(x, 1);                       // [n]
    Tensor centered = add_colvec(x, neg(mu));
    Tensor var = reduce_mean(mul(centered, centered), 1);
    Tensor stddev = sqrt(add_scalar(var, kEps));
    Tensor normed = div_colvec(centered, stddev);
    return add_rowvec(mul_rowvec(normed, params(prefix + ".g")), params(prefix + ".b"));
}

void declare_mha(ParamStore& store, const std::string& prefix, int d_model) {
    for (const char* part : {"q", "k", "v", "o"}) {
        store.create(prefix + ".w" + part, {d_model, d_model}, ParamStore::Init::kXavier);
        store.create(prefix + ".b" + part, {d_model}, ParamStore::Init::kZero);
    }
}

MhaParams mha_params(ParamBinding& params, const std::string& prefix) {
    MhaParams p;
    p.wq = params(prefix + ".wq");
    p.bq = params(prefix + ".bq");
    p.wk = params(prefix + ".wk");
    p.bk = params(prefix + ".bk");
    p.wv = params(prefix + ".wv");
    p.bv = params(prefix + ".bv");
    p.wo = params(prefix + ".wo");
    p.bo = params(prefix + ".bo");
    return p;
}

void declare_ffn(ParamStore& store, const std::string& prefix, int d_model, int hidden) {
    declare_linear(store, prefix + ".in", d_model, hidden);
    declare_linear(store, prefix + ".out", hidden, d_model);
}

Tensor ffn(ParamBinding& params, const std::string& prefix, const Tensor& x) {
    return linear(params, prefix + ".out", tanh(linear(params, prefix + ".in", x)));
}

}  // namespace signflow
