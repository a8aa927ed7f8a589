#pragma once

#include <span>
#include <string>
#include <vector>

#include "signflow/nn.hpp"
#include "signflow/params.hpp"
#include "signflow/tensor.hpp"

namespace signflow {

// Sinusoidal positional encoding: interleaved sin/cos over geometric
// frequencies with base 10^4; PE(t)[0] = sin(t) at the base frequency.
Tensor positional_encoding(double t, int d_model);

// Per-keypoint embedding of the (x, y, confidence) triple: 2-layer tanh MLP
// into d_model plus PE(t) added to every keypoint of the frame.
void declare_keypoint_embedding(ParamStore& store, int d_model);
Tensor embed_keypoints(ParamBinding& params, const Tensor& triples, double frame_time, int d_model);

struct EncoderDims {
    int d_model = 64;
    int n_heads = 4;
    int depth = 2;

    int ffn_hidden() const { return 2 * d_model; }
};

// Projected key/value rows per layer, one entry per encoded frame.
struct ExpertCache {
    std::vector<std::vector<Tensor>> k_rows;
    std::vector<std::vector<Tensor>> v_rows;
    int frames = 0;

    // Cuts gradient flow into frames before `frame` (self-forcing truncation).
    void detach_before(int frame);
};

// Scale-specific encoder over one articulator's keypoint tokens. Tokens of
// frame t attend to all tokens of frames <= t. Output per frame is the
// joint-pooled feature vector.
class ExpertEncoder {
  public:
    ExpertEncoder(std::string name, EncoderDims dims);

    void declare(ParamStore& store) const;

    // Incremental step: encode one new frame's group tokens [n_k, d] against
    // the cache, append projections, return the pooled feature [d].
    // frame_conf/beta add the confidence bias on temporal keys when given.
    Tensor append_frame(ParamBinding& params, ExpertCache& cache, const Tensor& group_tokens,
                        std::span<const double> frame_conf = {},
                        const Tensor* beta = nullptr) const;

    // Whole-sequence form; causal selects the frame-level causal mask,
    // otherwise attention is bidirectional (joint denoising).
    std::vector<Tensor> encode_sequence(ParamBinding& params,
                                        std::span<const Tensor> frame_tokens, bool causal,
                                        std::span<const double> frame_conf = {},
                                        const Tensor* beta = nullptr) const;

    const std::string& name() const { return name_; }
    const EncoderDims& dims() const { return dims_; }

  private:
    std::string name_;
    std::string prefix_;
    EncoderDims dims_;
};

// Attention-based fusion across scales: alpha_k = softmax_k(w^T tanh(w_f H_k)).
void declare_fusion(ParamStore& store, int d_model);

struct FusionResult {
    Tensor fused;   // [d]
    Tensor alphas;  // [K], non-negative, sums to 1
};
FusionResult fuse_scales(ParamBinding& params, std::span<const Tensor> scale_features);

}  // namespace signflow
