#include "signflow/generator.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include <json.hpp>

#include "signflow/attention.hpp"
#include "signflow/error.hpp"
#include "signflow/nn.hpp"
#include "signflow/rng.hpp"

namespace signflow {

using nlohmann::json;

std::string to_string(GenerationMode mode) {
    switch (mode) {
        case GenerationMode::kHybrid: return "hybrid";
        case GenerationMode::kFullDiffusion: return "full_diffusion";
        case GenerationMode::kPureAr: return "pure_ar";
    }
    return "hybrid";
}

GenerationMode generation_mode_from_string(const std::string& name) {
    if (name == "hybrid") return GenerationMode::kHybrid;
    if (name == "full_diffusion") return GenerationMode::kFullDiffusion;
    if (name == "pure_ar") return GenerationMode::kPureAr;
    throw ConfigError("unknown mode '" + name + "' (hybrid | full_diffusion | pure_ar)");
}

std::string to_string(AttentionVariant variant) {
    return variant == AttentionVariant::kConfidence ? "confidence" : "causal";
}

AttentionVariant attention_variant_from_string(const std::string& name) {
    if (name == "confidence") return AttentionVariant::kConfidence;
    if (name == "causal") return AttentionVariant::kCausal;
    throw ConfigError("unknown attention variant '" + name + "' (causal | confidence)");
}

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || depth <= 0) {
        throw ConfigError("model: d_model, n_heads and depth must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("model: d_model " + std::to_string(d_model) + " not divisible by " +
                          std::to_string(n_heads) + " heads");
    }
    if (experts != 1 && experts != 3 && experts != 4) {
        throw ConfigError("model: experts must be 1, 3 or 4");
    }
    if (n_steps < 1) throw ConfigError("model: n_steps must be >= 1");
    if (self_forcing_window < 1) throw ConfigError("model: self_forcing_window must be >= 1");
    if (vocabulary.empty()) throw ConfigError("model: vocabulary must not be empty");
    if (fps <= 0.0) throw ConfigError("model: fps must be positive");
    if (!std::isfinite(beta_init)) throw ConfigError("model: beta_init must be finite");
}

std::string ModelConfig::to_json() const {
    json j{{"d_model", d_model},
           {"n_heads", n_heads},
           {"depth", depth},
           {"experts", experts},
           {"n_steps", n_steps},
           {"beta_init", beta_init},
           {"attention", to_string(attention)},
           {"bias_in_experts", bias_in_experts},
           {"mode", to_string(mode)},
           {"self_forcing_window", self_forcing_window},
           {"flow_target", to_string(flow_target)},
           {"vocabulary", vocabulary},
           {"fps", fps},
           {"parallel_experts", parallel_experts},
           {"seed", seed}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.depth = j.value("depth", c.depth);
    c.experts = j.value("experts", c.experts);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.beta_init = j.value("beta_init", c.beta_init);
    if (j.contains("attention")) c.attention = attention_variant_from_string(j["attention"]);
    c.bias_in_experts = j.value("bias_in_experts", c.bias_in_experts);
    if (j.contains("mode")) c.mode = generation_mode_from_string(j["mode"]);
    c.self_forcing_window = j.value("self_forcing_window", c.self_forcing_window);
    if (j.contains("flow_target")) c.flow_target = flow_target_from_string(j["flow_target"]);
    if (j.contains("vocabulary")) c.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
    c.fps = j.value("fps", c.fps);
    c.parallel_experts = j.value("parallel_experts", c.parallel_experts);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

void HistoryMemory::detach_before(int frame) {
    const int upto = std::min<int>(frame, frames());
    for (int s = 0; s < upto; ++s) {
        if (rows[static_cast<std::size_t>(s)].tracked()) {
            rows[static_cast<std::size_t>(s)] = rows[static_cast<std::size_t>(s)].detached();
        }
    }
    for (auto* cache : {&k_rows, &v_rows}) {
        for (auto& expert : *cache) {
            for (auto& block : expert) {
                const int n = std::min<int>(frame, static_cast<int>(block.size()));
                for (int s = 0; s < n; ++s) {
                    if (block[static_cast<std::size_t>(s)].tracked()) {
                        block[static_cast<std::size_t>(s)] = block[static_cast<std::size_t>(s)].detached();
                    }
                }
            }
        }
    }
}

// ---- construction ----------------------------------------------------------

void Generator::set_n_steps(int n_steps) {
    if (n_steps < 1) throw ConfigError("set_n_steps: n_steps must be >= 1");
    config_.n_steps = n_steps;
}

Generator::Generator(ModelConfig config) : config_(std::move(config)), store_(config_.seed) {
    config_.validate();
    skeleton_ = Skeleton::desk_default().regrouped(config_.experts);
    for (const auto& [name, joints] : skeleton_.groups) {
        group_names_.push_back(name);
        group_joints_.push_back(joints);
        encoders_.emplace_back(name, EncoderDims{config_.d_model, config_.n_heads, config_.depth});
    }
    declare_params();
}

void Generator::declare_params() {
    const int d = config_.d_model;
    declare_keypoint_embedding(store_, d);
    store_.create("text.embed", {vocab_rows(), d}, ParamStore::Init::kGaussianSmall);
    for (const ExpertEncoder& enc : encoders_) enc.declare(store_);
    declare_fusion(store_, d);

    declare_linear(store_, "denoiser.xy", 2, d);
    declare_linear(store_, "denoiser.time.in", 1, d);
    declare_linear(store_, "denoiser.time.out", d, d);

    for (const std::string& g : group_names_) {
        const std::string base = "denoiser." + g + ".";
        for (int block = 0; block < config_.depth; ++block) {
            const std::string b = base + "block" + std::to_string(block);
            declare_layer_norm(store_, b + ".ln_self", d);
            declare_mha(store_, b + ".self", d);
            declare_layer_norm(store_, b + ".ln_hist", d);
            declare_mha(store_, b + ".hist", d);
            store_.create(b + ".beta", {}, ParamStore::Init::kZero);
            declare_layer_norm(store_, b + ".ln_text", d);
            declare_mha(store_, b + ".text", d);
            declare_layer_norm(store_, b + ".ln_ffn", d);
            declare_ffn(store_, b + ".ffn", d, 2 * d);
        }
        declare_layer_norm(store_, base + "ln_f", d);
        declare_linear(store_, base + "vel", d, 2, ParamStore::Init::kGaussianSmall);
        declare_linear(store_, base + "conf", d, 1, ParamStore::Init::kGaussianSmall);
        if (config_.bias_in_experts) {
            store_.create("expert." + g + ".beta", {}, ParamStore::Init::kZero);
        }
    }
    if (config_.beta_init != 0.0) {
        for (const std::string& g : group_names_) {
            for (int block = 0; block < config_.depth; ++block) {
                store_.set_values("denoiser." + g + ".block" + std::to_string(block) + ".beta",
                                  Tensor::scalar(config_.beta_init));
            }
        }
    }
}

// ---- text -------------------------------------------------------------------

TextCondition Generator::encode_text(const std::string& sentence, ParamBinding& params) const {
    std::istringstream in(sentence);
    std::vector<int> ids;
    std::string word;
    while (in >> word) {
        std::transform(word.begin(), word.end(), word.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        int id = unk_token();
        for (std::size_t i = 0; i < config_.vocabulary.size(); ++i) {
            if (config_.vocabulary[i] == word) {
                id = static_cast<int>(i) + 1;
                break;
            }
        }
        ids.push_back(id);
    }
    if (ids.empty()) throw ValueError("encode_text: sentence is empty after tokenization");

    Tensor table = params("text.embed");
    Tensor embedded = take_rows(table, ids);
    std::vector<double> pe;
    pe.reserve(ids.size() * static_cast<std::size_t>(config_.d_model));
    for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        Tensor row = positional_encoding(static_cast<double>(pos), config_.d_model);
        pe.insert(pe.end(), row.data().begin(), row.data().end());
    }
    Tensor pe_matrix(Shape{static_cast<int>(ids.size()), config_.d_model}, std::move(pe));
    return TextCondition{std::move(ids), add(embedded, pe_matrix)};
}

TextCondition Generator::encode_text(const std::string& sentence) const {
    ParamBinding binding(const_cast<ParamStore&>(store_), nullptr);
    return encode_text(sentence, binding);
}

// ---- state ------------------------------------------------------------------

GenerationState Generator::new_state() const {
    GenerationState state;
    state.expert_caches.resize(group_joints_.size());
    state.memory.k_rows.assign(group_joints_.size(),
                               std::vector<std::vector<Tensor>>(static_cast<std::size_t>(config_.depth)));
    state.memory.v_rows.assign(group_joints_.size(),
                               std::vector<std::vector<Tensor>>(static_cast<std::size_t>(config_.depth)));
    return state;
}

Generator::SamplerSettings Generator::sampler_settings(GenerationMode mode) const {
    switch (mode) {
        case GenerationMode::kPureAr:
            return SamplerSettings{1, false};  // one step from a zero start: direct regression
        case GenerationMode::kHybrid:
        case GenerationMode::kFullDiffusion:
            return SamplerSettings{config_.n_steps, true};
    }
    return SamplerSettings{config_.n_steps, true};
}

// ---- embedding --------------------------------------------------------------

Tensor Generator::embed_frame_tokens(ParamBinding& params, const Tensor& coords,
                                     const std::vector<double>& confidence, int frame_index) const {
    if (coords.rank() != 2 || coords.extent(0) != skeleton_.joints || coords.extent(1) != 2) {
        throw ShapeError("embed_frame_tokens: expected [" + std::to_string(skeleton_.joints) +
                         ", 2] coords, got " + shape_str(coords.shape()));
    }
    Tensor conf_col(Shape{skeleton_.joints, 1},
                    std::vector<double>(confidence.begin(), confidence.end()));
    std::vector<Tensor> cols{coords, conf_col};
    Tensor triples = concat_cols(cols);
    return embed_keypoints(params, triples, static_cast<double>(frame_index), config_.d_model);
}

// ---- denoiser ---------------------------------------------------------------

Generator::DenoiseEval Generator::articulator_velocity(ParamBinding& params,
                                                       const HistoryMemory& memory,
                                                       const TextCondition& cond, int expert,
                                                       const Tensor& x_k, int frame_index,
                                                       double tau) const {
    const int d = config_.d_model;
    const std::string base = "denoiser." + group_names_[static_cast<std::size_t>(expert)] + ".";

    Tensor tokens = linear(params, "denoiser.xy", x_k);
    tokens = add_rowvec(tokens, positional_encoding(static_cast<double>(frame_index), d));
    Tensor tau_in(Shape{1, 1}, {tau});
    Tensor time_emb = linear(params, "denoiser.time.out",
                             tanh(linear(params, "denoiser.time.in", tau_in)));
    tokens = add_rowvec(tokens, reshape(time_emb, {d}));

    const bool use_conf_bias = config_.attention == AttentionVariant::kConfidence;
    Tensor x = tokens;
    for (int block = 0; block < config_.depth; ++block) {
        const std::string b = base + "block" + std::to_string(block);
        {
            MhaParams self_attn = mha_params(params, b + ".self");
            Tensor q = layer_norm(params, b + ".ln_self", x);
            x = add(x, multi_head_attention(self_attn, q, q, config_.n_heads));
        }
        if (memory.frames() > 0) {
            MhaParams hist_attn = mha_params(params, b + ".hist");
            Tensor q = layer_norm(params, b + ".ln_hist", x);
            const auto& krows = memory.k_rows[static_cast<std::size_t>(expert)][static_cast<std::size_t>(block)];
            const auto& vrows = memory.v_rows[static_cast<std::size_t>(expert)][static_cast<std::size_t>(block)];
            Tensor k = concat_rows(krows);
            Tensor v = concat_rows(vrows);
            Tensor beta = params(b + ".beta");
            x = add(x, multi_head_attention_prekv(
                           hist_attn, q, k, v, config_.n_heads, /*mask=*/nullptr,
                           use_conf_bias ? std::span<const double>(memory.mean_conf)
                                         : std::span<const double>{},
                           use_conf_bias ? &beta : nullptr));
        }
        {
            MhaParams text_attn = mha_params(params, b + ".text");
            Tensor q = layer_norm(params, b + ".ln_text", x);
            x = add(x, multi_head_attention(text_attn, q, cond.embeddings, config_.n_heads));
        }
        x = add(x, ffn(params, b + ".ffn", layer_norm(params, b + ".ln_ffn", x)));
    }
    Tensor features = layer_norm(params, base + "ln_f", x);
    Tensor velocity = linear(params, base + "vel", features);
    return DenoiseEval{std::move(velocity), std::move(features)};
}

Tensor Generator::confidence_head(ParamBinding& params, int expert, const Tensor& features) const {
    const std::string base = "denoiser." + group_names_[static_cast<std::size_t>(expert)] + ".";
    Tensor logits = linear(params, base + "conf", features);  // [n_k, 1]
    return reshape(sigmoid(logits), {features.extent(0)});
}

// ---- sampling ---------------------------------------------------------------

Generator::ArticulatorSample Generator::sample_articulator(ParamBinding& params,
                                                           const HistoryMemory& memory,
                                                           const TextCondition& cond, int expert,
                                                           int frame_index,
                                                           std::uint64_t noise_root,
                                                           SamplerSettings settings) const {
    const int n_k = static_cast<int>(group_joints_[static_cast<std::size_t>(expert)].size());
    Tensor x;
    if (settings.noise) {
        RngStream rng = RngStream::derive(noise_root, "frame-z", static_cast<std::uint64_t>(frame_index),
                                          static_cast<std::uint64_t>(expert));
        x = random_gaussian({n_k, 2}, rng);
    } else {
        x = Tensor::zeros({n_k, 2});
    }
    const double dt = 1.0 / static_cast<double>(settings.steps);
    Tensor last_features;
    for (int step = 0; step < settings.steps; ++step) {
        const double tau = static_cast<double>(step) * dt;
        DenoiseEval eval = articulator_velocity(params, memory, cond, expert, x, frame_index, tau);
        x = add(x, scale(eval.velocity, dt));
        last_features = std::move(eval.features);
    }
    Tensor conf = confidence_head(params, expert, last_features);
    std::vector<double> conf_values(conf.data().begin(), conf.data().end());
    return ArticulatorSample{std::move(x), std::move(conf_values)};
}

Tensor Generator::assemble_frame(std::span<const Tensor> articulator_coords) const {
    Tensor stacked = concat_rows(articulator_coords);
    std::vector<int> inverse(static_cast<std::size_t>(skeleton_.joints));
    int row = 0;
    for (const auto& joints : group_joints_) {
        for (int j : joints) inverse[static_cast<std::size_t>(j)] = row++;
    }
    return take_rows(stacked, inverse);
}

void Generator::append_frame(ParamBinding& params, GenerationState& state, const Tensor& coords,
                             const std::vector<double>& confidence) const {
    const int t = state.length();
    Tensor tokens = embed_frame_tokens(params, coords, confidence, t);

    std::vector<Tensor> features(group_joints_.size());
    const bool parallel = params.tape() == nullptr && config_.parallel_experts && group_count() > 1;
    auto encode_one = [&](int k) {
        Tensor group_tokens = take_rows(tokens, group_joints_[static_cast<std::size_t>(k)]);
        std::vector<double> frame_conf;
        const Tensor* beta = nullptr;
        Tensor beta_t;
        if (config_.bias_in_experts && config_.attention == AttentionVariant::kConfidence) {
            frame_conf = state.memory.mean_conf;
            frame_conf.push_back(frame_mean_confidence(confidence));
            beta_t = params("expert." + group_names_[static_cast<std::size_t>(k)] + ".beta");
            beta = &beta_t;
        }
        features[static_cast<std::size_t>(k)] = encoders_[static_cast<std::size_t>(k)].append_frame(
            params, state.expert_caches[static_cast<std::size_t>(k)], group_tokens, frame_conf, beta);
    };
    if (parallel) {
        std::vector<std::future<void>> tasks;
        for (int k = 0; k < group_count(); ++k) {
            tasks.push_back(std::async(std::launch::async, encode_one, k));
        }
        for (auto& task : tasks) task.get();
    } else {
        for (int k = 0; k < group_count(); ++k) encode_one(k);
    }

    FusionResult fused = fuse_scales(params, features);
    state.fusion_alphas.push_back(fused.alphas);
    state.memory.rows.push_back(fused.fused);
    state.memory.mean_conf.push_back(frame_mean_confidence(confidence));

    Tensor row = reshape(fused.fused, {1, config_.d_model});
    for (int k = 0; k < group_count(); ++k) {
        const std::string base = "denoiser." + group_names_[static_cast<std::size_t>(k)] + ".";
        for (int block = 0; block < config_.depth; ++block) {
            MhaParams hist = mha_params(params, base + "block" + std::to_string(block) + ".hist");
            state.memory.k_rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(block)]
                .push_back(mha_project_k(hist, row));
            state.memory.v_rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(block)]
                .push_back(mha_project_v(hist, row));
        }
    }

    state.frames.push_back(frame_from_parts(coords, confidence));
    state.frame_coords.push_back(coords);
    if (params.tape()) truncate_history(state);
}

void Generator::truncate_history(GenerationState& state) const {
    const int cutoff = state.length() - config_.self_forcing_window;
    if (cutoff <= 0) return;
    state.memory.detach_before(cutoff);
    for (auto& cache : state.expert_caches) cache.detach_before(cutoff);
}

Generator::FrameResult Generator::generate_next_frame(ParamBinding& params, GenerationState& state,
                                                      const TextCondition& cond,
                                                      std::uint64_t noise_root,
                                                      std::optional<SamplerSettings> settings) const {
    if (static_cast<int>(state.expert_caches.size()) != group_count()) {
        throw ValueError("generate_next_frame: state does not match the configured skeleton");
    }
    const SamplerSettings s = settings.value_or(sampler_settings(config_.mode));
    const int t = state.length();

    std::vector<ArticulatorSample> samples(group_joints_.size());
    const bool parallel = params.tape() == nullptr && config_.parallel_experts && group_count() > 1;
    auto run_one = [&](int k) {
        samples[static_cast<std::size_t>(k)] =
            sample_articulator(params, state.memory, cond, k, t, noise_root, s);
    };
    if (parallel) {
        std::vector<std::future<void>> tasks;
        for (int k = 0; k < group_count(); ++k) {
            tasks.push_back(std::async(std::launch::async, run_one, k));
        }
        for (auto& task : tasks) task.get();
    } else {
        for (int k = 0; k < group_count(); ++k) run_one(k);
    }

    std::vector<Tensor> coord_parts;
    coord_parts.reserve(samples.size());
    for (const auto& sample : samples) coord_parts.push_back(sample.coords);
    Tensor coords = assemble_frame(coord_parts);

    std::vector<double> confidence(static_cast<std::size_t>(skeleton_.joints), 1.0);
    for (std::size_t k = 0; k < group_joints_.size(); ++k) {
        const auto& joints = group_joints_[k];
        for (std::size_t i = 0; i < joints.size(); ++i) {
            confidence[static_cast<std::size_t>(joints[i])] = samples[k].confidence[i];
        }
    }

    append_frame(params, state, coords, confidence);
    return FrameResult{state.frames.back(), coords, std::move(confidence)};
}

std::vector<Tensor> Generator::rollout_frames(ParamBinding& params, const TextCondition& cond,
                                              GenerationState& state, int total_frames,
                                              std::uint64_t noise_root,
                                              std::optional<SamplerSettings> settings) const {
    if (total_frames < 1) throw ValueError("rollout: total_frames must be >= 1");
    for (int t = 0; t < total_frames; ++t) {
        generate_next_frame(params, state, cond, noise_root, settings);
    }
    return state.frame_coords;
}

Generator::JointDenoise Generator::denoise_jointly(ParamBinding& params, const TextCondition& cond,
                                                   int total_frames, std::uint64_t noise_root,
                                                   int n_steps) const {
    if (total_frames < 1) throw ValueError("denoise_jointly: total_frames must be >= 1");
    if (n_steps < 1) throw ValueError("denoise_jointly: n_steps must be >= 1");
    const int d = config_.d_model;

    // Per-frame, per-articulator noise drawn from the same streams the
    // frame-by-frame sampler uses.
    std::vector<std::vector<Tensor>> x(static_cast<std::size_t>(total_frames));
    for (int t = 0; t < total_frames; ++t) {
        for (int k = 0; k < group_count(); ++k) {
            RngStream rng = RngStream::derive(noise_root, "frame-z", static_cast<std::uint64_t>(t),
                                              static_cast<std::uint64_t>(k));
            x[static_cast<std::size_t>(t)].push_back(random_gaussian(
                {static_cast<int>(group_joints_[static_cast<std::size_t>(k)].size()), 2}, rng));
        }
    }

    const std::vector<double> unit_conf(static_cast<std::size_t>(skeleton_.joints), 1.0);
    const double dt = 1.0 / static_cast<double>(n_steps);
    std::vector<std::vector<Tensor>> last_features(
        static_cast<std::size_t>(total_frames), std::vector<Tensor>(group_joints_.size()));

    for (int step = 0; step < n_steps; ++step) {
        const double tau = static_cast<double>(step) * dt;

        // Re-encode the current estimates into a bidirectional memory.
        HistoryMemory memory;
        memory.k_rows.assign(group_joints_.size(),
                             std::vector<std::vector<Tensor>>(static_cast<std::size_t>(config_.depth)));
        memory.v_rows.assign(group_joints_.size(),
                             std::vector<std::vector<Tensor>>(static_cast<std::size_t>(config_.depth)));
        memory.mean_conf.assign(static_cast<std::size_t>(total_frames), 1.0);

        std::vector<Tensor> frame_tokens;
        frame_tokens.reserve(static_cast<std::size_t>(total_frames));
        for (int t = 0; t < total_frames; ++t) {
            std::vector<Tensor> parts;
            for (const auto& part : x[static_cast<std::size_t>(t)]) parts.push_back(part);
            frame_tokens.push_back(embed_frame_tokens(params, assemble_frame(parts), unit_conf, t));
        }

        std::vector<std::vector<Tensor>> scale_features(group_joints_.size());
        for (int k = 0; k < group_count(); ++k) {
            std::vector<Tensor> group_seq;
            group_seq.reserve(frame_tokens.size());
            for (const Tensor& tokens : frame_tokens) {
                group_seq.push_back(take_rows(tokens, group_joints_[static_cast<std::size_t>(k)]));
            }
            scale_features[static_cast<std::size_t>(k)] =
                encoders_[static_cast<std::size_t>(k)].encode_sequence(params, group_seq,
                                                                       /*causal=*/false);
        }
        for (int t = 0; t < total_frames; ++t) {
            std::vector<Tensor> per_scale;
            for (int k = 0; k < group_count(); ++k) {
                per_scale.push_back(scale_features[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]);
            }
            FusionResult fused = fuse_scales(params, per_scale);
            memory.rows.push_back(fused.fused);
            Tensor row = reshape(fused.fused, {1, d});
            for (int k = 0; k < group_count(); ++k) {
                const std::string base = "denoiser." + group_names_[static_cast<std::size_t>(k)] + ".";
                for (int block = 0; block < config_.depth; ++block) {
                    MhaParams hist = mha_params(params, base + "block" + std::to_string(block) + ".hist");
                    memory.k_rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(block)]
                        .push_back(mha_project_k(hist, row));
                    memory.v_rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(block)]
                        .push_back(mha_project_v(hist, row));
                }
            }
        }

        // Advance every frame by one Euler step against the shared memory.
        for (int t = 0; t < total_frames; ++t) {
            for (int k = 0; k < group_count(); ++k) {
                DenoiseEval eval = articulator_velocity(params, memory, cond, k,
                                                        x[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)],
                                                        t, tau);
                x[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] =
                    add(x[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)],
                        scale(eval.velocity, dt));
                last_features[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] =
                    std::move(eval.features);
            }
        }
    }

    JointDenoise out;
    out.frame_coords.reserve(static_cast<std::size_t>(total_frames));
    out.confidence.resize(static_cast<std::size_t>(total_frames),
                          std::vector<double>(static_cast<std::size_t>(skeleton_.joints), 1.0));
    for (int t = 0; t < total_frames; ++t) {
        std::vector<Tensor> parts;
        for (const auto& part : x[static_cast<std::size_t>(t)]) parts.push_back(part);
        out.frame_coords.push_back(assemble_frame(parts));
        ParamBinding& p = params;
        for (int k = 0; k < group_count(); ++k) {
            Tensor conf = confidence_head(p, k,
                                          last_features[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]);
            const auto& joints = group_joints_[static_cast<std::size_t>(k)];
            for (std::size_t i = 0; i < joints.size(); ++i) {
                out.confidence[static_cast<std::size_t>(t)][static_cast<std::size_t>(joints[i])] =
                    conf.at(static_cast<int>(i));
            }
        }
    }
    return out;
}

PoseSequence Generator::rollout(const std::string& sentence, int total_frames, GenerationMode mode,
                                std::uint64_t seed) const {
    if (total_frames < 1) throw ValueError("rollout: total_frames must be >= 1");
    ParamBinding binding(const_cast<ParamStore&>(store_), nullptr);
    TextCondition cond = encode_text(sentence, binding);

    PoseSequence seq;
    seq.id = "gen";
    seq.text = sentence;
    seq.fps = config_.fps;

    if (mode == GenerationMode::kFullDiffusion) {
        JointDenoise joint = denoise_jointly(binding, cond, total_frames, seed, config_.n_steps);
        for (int t = 0; t < total_frames; ++t) {
            seq.frames.push_back(frame_from_parts(joint.frame_coords[static_cast<std::size_t>(t)],
                                                  joint.confidence[static_cast<std::size_t>(t)]));
        }
        return seq;
    }

    GenerationState state = new_state();
    const SamplerSettings settings = sampler_settings(mode);
    for (int t = 0; t < total_frames; ++t) {
        generate_next_frame(binding, state, cond, seed, settings);
    }
    seq.frames = state.frames;
    return seq;
}

StreamStats Generator::stream_generate(const std::string& sentence, int total_frames,
                                       const FrameSink& sink, std::uint64_t seed,
                                       std::optional<GenerationMode> mode_override) const {
    const GenerationMode mode = mode_override.value_or(config_.mode);
    if (mode == GenerationMode::kFullDiffusion) {
        throw ModeError("stream_generate: joint denoising cannot stream frames");
    }
    if (total_frames < 1) throw ValueError("stream_generate: total_frames must be >= 1");

    ParamBinding binding(const_cast<ParamStore&>(store_), nullptr);
    TextCondition cond = encode_text(sentence, binding);
    GenerationState state = new_state();
    const SamplerSettings settings = sampler_settings(mode);

    StreamStats stats;
    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < total_frames; ++t) {
        FrameResult frame = generate_next_frame(binding, state, cond, seed, settings);
        const auto now = std::chrono::steady_clock::now();
        if (t == 0) stats.first_frame_seconds = std::chrono::duration<double>(now - start).count();
        ++stats.frames_emitted;
        if (!sink(frame.frame, t)) {
            stats.aborted = true;
            break;
        }
    }
    stats.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    stats.frames_per_second =
        stats.total_seconds > 0.0 ? stats.frames_emitted / stats.total_seconds : 0.0;
    return stats;
}

}  // namespace signflow
