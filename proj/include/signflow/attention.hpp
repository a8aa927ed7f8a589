#pragma once

#include <span>

#include "signflow/tensor.hpp"

namespace signflow {

// Additive mask value standing in for -inf. After softmax max-subtraction,
// exp(kMaskNegInf - rowmax) underflows to exactly 0 for any realistic logit
// scale, so masked positions carry weight 0.0, not just a small number.
inline constexpr double kMaskNegInf = -1e30;

struct AttentionConfig {
    int d_model = 64;
    int n_heads = 4;
    double beta_init = 0.0;  // confidence-bias strength starts at the plain-causal baseline

    int head_dim() const { return d_model / n_heads; }
    void validate() const;
};

// n x n additive mask: row i may attend to columns j <= i.
Tensor causal_mask(int n);

// Token-level mask from per-token frame indices: query token i may attend to
// key token j iff frame[j] <= frame[i]. Generalizes causal_mask to frames
// holding several tokens each.
Tensor frame_causal_mask(std::span<const int> query_frames, std::span<const int> key_frames);

// softmax(Q K^T / sqrt(d) + mask) V with optional additive mask.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor* mask = nullptr);

// Mean keypoint confidence of one frame; inputs must lie in [0, 1].
double frame_mean_confidence(std::span<const double> conf);

// Causal attention with a confidence bias on the logits: weight of key s in
// row t is proportional to exp(q_t k_s / sqrt(d) + beta * conf[s]) for s <= t.
// beta is a scalar tensor and participates in backward(); conf values are
// plain inputs, not differentiated through.
Tensor confidence_causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   std::span<const double> conf, const Tensor& beta);

// ---- multi-head wrapper used by the encoder and denoiser stacks ----------

struct MhaParams {
    Tensor wq, bq;  // [d, d], [d]
    Tensor wk, bk;
    Tensor wv, bv;
    Tensor wo, bo;
};

// Projected keys/values for caching; append rows per new frame.
Tensor mha_project_k(const MhaParams& p, const Tensor& kv_in);
Tensor mha_project_v(const MhaParams& p, const Tensor& kv_in);

// q_in: [n, d]; k/v: pre-projected [m, d]. Optional additive mask [n, m].
// Optional confidence bias (conf size m, beta scalar) applied to every head.
Tensor multi_head_attention_prekv(const MhaParams& p, const Tensor& q_in, const Tensor& k,
                                  const Tensor& v, int n_heads, const Tensor* mask = nullptr,
                                  std::span<const double> conf = {},
                                  const Tensor* beta = nullptr);

// Convenience form projecting k/v from kv_in.
Tensor multi_head_attention(const MhaParams& p, const Tensor& q_in, const Tensor& kv_in,
                            int n_heads, const Tensor* mask = nullptr,
                            std::span<const double> conf = {}, const Tensor* beta = nullptr);

}  // namespace signflow
