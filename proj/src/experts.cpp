#include "signflow/experts.hpp"

#include <cmath>

#include "signflow/error.hpp"

namespace signflow {

Tensor positional_encoding(double t, int d_model) {
    if (t < 0.0) throw ValueError("positional_encoding: t must be >= 0");
    if (d_model < 2) throw ValueError("positional_encoding: d_model must be >= 2");
    std::vector<double> data(static_cast<std::size_t>(d_model));
    for (int i = 0; 2 * i < d_model; ++i) {
        const double freq = std::pow(1.0e4, -2.0 * i / static_cast<double>(d_model));
        data[static_cast<std::size_t>(2 * i)] = std::sin(t * freq);
        if (2 * i + 1 < d_model) data[static_cast<std::size_t>(2 * i + 1)] = std::cos(t * freq);
    }
    return Tensor({d_model}, std::move(data));
}

void declare_keypoint_embedding(ParamStore& store, int d_model) {
    declare_linear(store, "embed.in", 3, d_model);
    declare_linear(store, "embed.out", d_model, d_model);
}

Tensor embed_keypoints(ParamBinding& params, const Tensor& triples, double frame_time, int d_model) {
    if (triples.rank() != 2 || triples.extent(1) != 3) {
        throw ShapeError("embed_keypoints: expected [J, 3] triples, got " + shape_str(triples.shape()));
    }
    Tensor hidden = tanh(linear(params, "embed.in", triples));
    Tensor projected = linear(params, "embed.out", hidden);
    return add_rowvec(projected, positional_encoding(frame_time, d_model));
}

void ExpertCache::detach_before(int frame) {
    for (auto* rows : {&k_rows, &v_rows}) {
        for (auto& layer : *rows) {
            const int upto = std::min<int>(frame, static_cast<int>(layer.size()));
            for (int f = 0; f < upto; ++f) {
                if (layer[static_cast<std::size_t>(f)].tracked()) {
                    layer[static_cast<std::size_t>(f)] = layer[static_cast<std::size_t>(f)].detached();
                }
            }
        }
    }
}

ExpertEncoder::ExpertEncoder(std::string name, EncoderDims dims)
    : name_(std::move(name)), prefix_("expert." + name_ + "."), dims_(dims) {}

void ExpertEncoder::declare(ParamStore& store) const {
    for (int block = 0; block < dims_.depth; ++block) {
        const std::string b = prefix_ + "block" + std::to_string(block);
        declare_layer_norm(store, b + ".ln1", dims_.d_model);
        declare_mha(store, b + ".attn", dims_.d_model);
        declare_layer_norm(store, b + ".ln2", dims_.d_model);
        declare_ffn(store, b + ".ffn", dims_.d_model, dims_.ffn_hidden());
    }
    declare_layer_norm(store, prefix_ + "ln_f", dims_.d_model);
}

namespace {

// Per-token confidence bias: every token of frame s carries that frame's
// mean confidence.
std::vector<double> token_confidences(std::span<const double> frame_conf, int tokens_per_frame,
                                      int frames) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(tokens_per_frame) * frames);
    for (int f = 0; f < frames; ++f) {
        for (int k = 0; k < tokens_per_frame; ++k) out.push_back(frame_conf[static_cast<std::size_t>(f)]);
    }
    return out;
}

}  // namespace

Tensor ExpertEncoder::append_frame(ParamBinding& params, ExpertCache& cache,
                                   const Tensor& group_tokens, std::span<const double> frame_conf,
                                   const Tensor* beta) const {
    if (group_tokens.rank() != 2 || group_tokens.extent(1) != dims_.d_model) {
        throw ShapeError("expert " + name_ + ": tokens must be [n_k, d_model], got " +
                         shape_str(group_tokens.shape()));
    }
    if (cache.k_rows.empty()) {
        cache.k_rows.resize(static_cast<std::size_t>(dims_.depth));
        cache.v_rows.resize(static_cast<std::size_t>(dims_.depth));
    }
    const int tokens = group_tokens.extent(0);
    if (!frame_conf.empty() && static_cast<int>(frame_conf.size()) != cache.frames + 1) {
        throw ShapeError("expert " + name_ + ": expected " + std::to_string(cache.frames + 1) +
                         " frame confidences, got " + std::to_string(frame_conf.size()));
    }

    Tensor x = group_tokens;
    for (int block = 0; block < dims_.depth; ++block) {
        const std::string b = prefix_ + "block" + std::to_string(block);
        MhaParams attn = mha_params(params, b + ".attn");
        Tensor q_in = layer_norm(params, b + ".ln1", x);
        auto& krow = cache.k_rows[static_cast<std::size_t>(block)];
        auto& vrow = cache.v_rows[static_cast<std::size_t>(block)];
        krow.push_back(mha_project_k(attn, q_in));
        vrow.push_back(mha_project_v(attn, q_in));
        Tensor k = concat_rows(krow);
        Tensor v = concat_rows(vrow);
        std::vector<double> conf;
        if (!frame_conf.empty()) conf = token_confidences(frame_conf, tokens, cache.frames + 1);
        Tensor attended = multi_head_attention_prekv(attn, q_in, k, v, dims_.n_heads,
                                                     /*mask=*/nullptr, conf, beta);
        x = add(x, attended);
        x = add(x, ffn(params, b + ".ffn", layer_norm(params, b + ".ln2", x)));
    }
    cache.frames += 1;
    Tensor final_tokens = layer_norm(params, prefix_ + "ln_f", x);
    return reduce_mean(final_tokens, 0);
}

std::vector<Tensor> ExpertEncoder::encode_sequence(ParamBinding& params,
                                                   std::span<const Tensor> frame_tokens,
                                                   bool causal,
                                                   std::span<const double> frame_conf,
                                                   const Tensor* beta) const {
    if (frame_tokens.empty()) throw ValueError("expert " + name_ + ": empty sequence");
    const int frames = static_cast<int>(frame_tokens.size());
    const int tokens = frame_tokens[0].extent(0);
    for (const Tensor& f : frame_tokens) {
        if (f.shape() != frame_tokens[0].shape()) {
            throw ShapeError("expert " + name_ + ": inconsistent token shapes across frames");
        }
    }
    if (!frame_conf.empty() && static_cast<int>(frame_conf.size()) != frames) {
        throw ShapeError("expert " + name_ + ": confidence count does not match frame count");
    }

    Tensor x = concat_rows(frame_tokens);  // [frames * tokens, d]
    std::vector<int> frame_of_token;
    frame_of_token.reserve(static_cast<std::size_t>(frames) * tokens);
    for (int f = 0; f < frames; ++f)
        for (int k = 0; k < tokens; ++k) frame_of_token.push_back(f);
    Tensor mask;
    if (causal) mask = frame_causal_mask(frame_of_token, frame_of_token);

    std::vector<double> conf;
    if (!frame_conf.empty()) conf = token_confidences(frame_conf, tokens, frames);

    for (int block = 0; block < dims_.depth; ++block) {
        const std::string b = prefix_ + "block" + std::to_string(block);
        MhaParams attn = mha_params(params, b + ".attn");
        Tensor q_in = layer_norm(params, b + ".ln1", x);
        Tensor attended = multi_head_attention(attn, q_in, q_in, dims_.n_heads,
                                               causal ? &mask : nullptr, conf, beta);
        x = add(x, attended);
        x = add(x, ffn(params, b + ".ffn", layer_norm(params, b + ".ln2", x)));
    }
    Tensor final_tokens = layer_norm(params, prefix_ + "ln_f", x);

    std::vector<Tensor> pooled;
    pooled.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        Tensor rows = slice_rows(final_tokens, f * tokens, (f + 1) * tokens);
        pooled.push_back(reduce_mean(rows, 0));
    }
    return pooled;
}

void declare_fusion(ParamStore& store, int d_model) {
    store.create("fusion.wf", {d_model, d_model}, ParamStore::Init::kXavier);
    store.create("fusion.w", {d_model, 1}, ParamStore::Init::kXavier);
}

FusionResult fuse_scales(ParamBinding& params, std::span<const Tensor> scale_features) {
    if (scale_features.empty()) throw ValueError("fuse_scales: no scales");
    const int d = scale_features[0].extent(0);
    for (const Tensor& h : scale_features) {
        if (h.rank() != 1 || h.extent(0) != d) {
            throw ShapeError("fuse_scales: widths differ, " + shape_str(h.shape()) + " vs [" +
                             std::to_string(d) + "]");
        }
    }
    Tensor wf = params("fusion.wf");
    Tensor w = params("fusion.w");

    std::vector<Tensor> scores;
    scores.reserve(scale_features.size());
    for (const Tensor& h : scale_features) {
        Tensor row = reshape(h, {1, d});
        scores.push_back(matmul(tanh(matmul(row, wf)), w));  // [1, 1]
    }
    Tensor score_vec = reshape(concat_rows(scores), {static_cast<int>(scores.size())});
    Tensor alphas = softmax_lastdim(score_vec);

    Tensor stacked = concat_rows(scale_features);  // [K, d]
    Tensor fused = reshape(matmul(reshape(alphas, {1, static_cast<int>(scores.size())}), stacked), {d});
    return FusionResult{fused, alphas};
}

}  // namespace signflow
