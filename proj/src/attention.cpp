#include "signflow/attention.hpp"

#include <cmath>
#include <vector>

#include "signflow/error.hpp"

namespace signflow {

void AttentionConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0) throw ValueError("attention: d_model and n_heads must be positive");
    if (d_model % n_heads != 0) {
        throw ValueError("attention: d_model " + std::to_string(d_model) +
                         " not divisible by n_heads " + std::to_string(n_heads));
    }
    if (!std::isfinite(beta_init)) throw ValueError("attention: beta must be finite");
}

Tensor causal_mask(int n) {
    if (n < 1) throw ValueError("causal_mask: size must be >= 1");
    std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) data[static_cast<std::size_t>(i) * n + j] = kMaskNegInf;
    return Tensor({n, n}, std::move(data));
}

Tensor frame_causal_mask(std::span<const int> query_frames, std::span<const int> key_frames) {
    if (query_frames.empty() || key_frames.empty()) {
        throw ValueError("frame_causal_mask: frame index lists must be non-empty");
    }
    const int n = static_cast<int>(query_frames.size());
    const int m = static_cast<int>(key_frames.size());
    std::vector<double> data(static_cast<std::size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            if (key_frames[static_cast<std::size_t>(j)] > query_frames[static_cast<std::size_t>(i)])
                data[static_cast<std::size_t>(i) * m + j] = kMaskNegInf;
    return Tensor({n, m}, std::move(data));
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* mask) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
        throw ShapeError("attention: Q, K, V must be rank-2");
    }
    if (q.extent(1) != k.extent(1)) {
        throw ShapeError("attention: Q width " + shape_str(q.shape()) + " does not match K width " +
                         shape_str(k.shape()));
    }
    if (k.extent(0) != v.extent(0)) {
        throw ShapeError("attention: K rows " + shape_str(k.shape()) + " do not match V rows " +
                         shape_str(v.shape()));
    }
    Tensor logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.extent(1))));
    if (mask) {
        if (mask->shape() != logits.shape()) {
            throw ShapeError("attention: mask shape " + shape_str(mask->shape()) +
                             " does not match logits " + shape_str(logits.shape()));
        }
        logits = add(logits, *mask);
    }
    return matmul(softmax_lastdim(logits), v);
}

double frame_mean_confidence(std::span<const double> conf) {
    if (conf.empty()) throw ValueError("frame_mean_confidence: empty confidence list");
    double sum = 0.0;
    for (double c : conf) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw ValueError("frame_mean_confidence: confidence " + std::to_string(c) +
                             " outside [0, 1]");
        }
        sum += c;
    }
    return sum / static_cast<double>(conf.size());
}

namespace {

Tensor confidence_bias_row(std::span<const double> conf, const Tensor& beta) {
    Tensor conf_row(Shape{static_cast<int>(conf.size())},
                    std::vector<double>(conf.begin(), conf.end()));
    return mul(beta, conf_row);  // scalar broadcast; gradient reaches beta only
}

}  // namespace

Tensor confidence_causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                   std::span<const double> conf, const Tensor& beta) {
    if (q.rank() != 2 || k.rank() != 2) throw ShapeError("confidence attention: Q, K must be rank-2");
    if (static_cast<int>(conf.size()) != k.extent(0)) {
        throw ShapeError("confidence attention: " + std::to_string(conf.size()) +
                         " confidences for " + std::to_string(k.extent(0)) + " keys");
    }
    if (beta.size() != 1) throw ShapeError("confidence attention: beta must be scalar");
    if (q.extent(0) != k.extent(0)) {
        throw ShapeError("confidence attention: causal form requires as many queries as keys");
    }
    Tensor logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.extent(1))));
    logits = add(logits, causal_mask(q.extent(0)));
    logits = add_rowvec(logits, confidence_bias_row(conf, beta));
    return matmul(softmax_lastdim(logits), v);
}

// ---- multi-head ----------------------------------------------------------

Tensor mha_project_k(const MhaParams& p, const Tensor& kv_in) {
    return add_rowvec(matmul(kv_in, p.wk), p.bk);
}

Tensor mha_project_v(const MhaParams& p, const Tensor& kv_in) {
    return add_rowvec(matmul(kv_in, p.wv), p.bv);
}

Tensor multi_head_attention_prekv(const MhaParams& p, const Tensor& q_in, const Tensor& k,
                                  const Tensor& v, int n_heads, const Tensor* mask,
                                  std::span<const double> conf, const Tensor* beta) {
    const int d = q_in.extent(1);
    if (d % n_heads != 0) {
        throw ShapeError("mha: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
    }
    if (!conf.empty() && static_cast<int>(conf.size()) != k.extent(0)) {
        throw ShapeError("mha: " + std::to_string(conf.size()) + " confidences for " +
                         std::to_string(k.extent(0)) + " keys");
    }
    const int dk = d / n_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Tensor q = add_rowvec(matmul(q_in, p.wq), p.bq);
    Tensor bias;
    if (!conf.empty()) {
        if (!beta) throw ValueError("mha: confidence bias requires beta");
        bias = confidence_bias_row(conf, *beta);
    }

    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
        Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
        Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
        Tensor logits = scale(matmul(qh, transpose(kh)), inv_sqrt_dk);
        if (mask) logits = add(logits, *mask);
        if (bias.defined()) logits = add_rowvec(logits, bias);
        heads.push_back(matmul(softmax_lastdim(logits), vh));
    }
    Tensor merged = concat_cols(heads);
    return add_rowvec(matmul(merged, p.wo), p.bo);
}

Tensor multi_head_attention(const MhaParams& p, const Tensor& q_in, const Tensor& kv_in,
                            int n_heads, const Tensor* mask, std::span<const double> conf,
                            const Tensor* beta) {
    return multi_head_attention_prekv(p, q_in, mha_project_k(p, kv_in), mha_project_v(p, kv_in),
                                      n_heads, mask, conf, beta);
}

}  // namespace signflow
