#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "signflow/experts.hpp"
#include "signflow/flow.hpp"
#include "signflow/params.hpp"
#include "signflow/pose.hpp"
#include "signflow/tensor.hpp"

namespace signflow {

enum class GenerationMode { kHybrid, kFullDiffusion, kPureAr };
std::string to_string(GenerationMode mode);
GenerationMode generation_mode_from_string(const std::string& name);

enum class AttentionVariant { kConfidence, kCausal };
std::string to_string(AttentionVariant variant);
AttentionVariant attention_variant_from_string(const std::string& name);

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int depth = 2;        // transformer blocks per expert encoder and per denoiser
    int experts = 3;      // articulator partition: 1, 3, or 4
    int n_steps = 8;      // Euler steps per frame at generation time
    double beta_init = 0.0;
    AttentionVariant attention = AttentionVariant::kConfidence;
    bool bias_in_experts = false;  // confidence bias inside the history encoders
    GenerationMode mode = GenerationMode::kHybrid;
    int self_forcing_window = 4;   // frames of history that keep gradient flow
    FlowTarget flow_target = FlowTarget::kDisplacement;
    std::vector<std::string> vocabulary;  // UNK is implicit at id 0
    double fps = 12.0;
    bool parallel_experts = true;  // concurrent articulator denoising (inference only)
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct TextCondition {
    std::vector<int> token_ids;
    Tensor embeddings;  // [tokens, d_model]
};

// Fused per-frame features the denoiser attends over, with projected K/V
// rows cached per (expert, block).
struct HistoryMemory {
    std::vector<Tensor> rows;        // H_s, [d] each
    std::vector<double> mean_conf;   // c-bar per frame
    std::vector<std::vector<std::vector<Tensor>>> k_rows;  // [expert][block][frame] -> [1, d]
    std::vector<std::vector<std::vector<Tensor>>> v_rows;

    int frames() const { return static_cast<int>(rows.size()); }
    void detach_before(int frame);
};

struct GenerationState {
    std::vector<PoseFrame> frames;       // realized keypoints (with predicted confidence)
    std::vector<Tensor> frame_coords;    // [J, 2]; tracked during training
    std::vector<ExpertCache> expert_caches;
    HistoryMemory memory;
    std::vector<Tensor> fusion_alphas;   // per frame, [K]

    int length() const { return static_cast<int>(frames.size()); }
};

struct StreamStats {
    int frames_emitted = 0;
    bool aborted = false;
    double first_frame_seconds = 0.0;
    double total_seconds = 0.0;
    double frames_per_second = 0.0;
};

using FrameSink = std::function<bool(const PoseFrame& frame, int index)>;

// Text-conditioned frame generator: per frame, each articulator is produced
// by a few-step Euler flow whose velocity field is a transformer stack with
// self-attention over the articulator's keypoints, confidence-biased
// attention over the fused history features, and cross-attention to the
// sentence tokens. Training and inference share this code path; there is no
// teacher-forcing branch.
class Generator {
  public:
    explicit Generator(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const Skeleton& skeleton() const { return skeleton_; }

    // Generation-time knobs that leave the parameter table untouched; used
    // when driving one trained model through ablation settings.
    void set_mode(GenerationMode mode) { config_.mode = mode; }
    void set_n_steps(int n_steps);
    void set_parallel_experts(bool parallel) { config_.parallel_experts = parallel; }
    void set_attention_variant(AttentionVariant variant) { config_.attention = variant; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    int group_count() const { return static_cast<int>(group_names_.size()); }
    const std::vector<std::string>& group_names() const { return group_names_; }

    TextCondition encode_text(const std::string& sentence, ParamBinding& params) const;
    TextCondition encode_text(const std::string& sentence) const;  // inference binding

    GenerationState new_state() const;

    struct FrameResult {
        PoseFrame frame;
        Tensor coords;                 // [J, 2]
        std::vector<double> confidence;
    };

    // Internal sampler knobs; modes are presets over these.
    struct SamplerSettings {
        int steps = 8;
        bool noise = true;
    };
    SamplerSettings sampler_settings(GenerationMode mode) const;

    // Generates the next frame via flow sampling conditioned on the state,
    // appends it (history features, caches, confidences), and returns it.
    // Deterministic given (state, cond, noise_root).
    FrameResult generate_next_frame(ParamBinding& params, GenerationState& state,
                                    const TextCondition& cond, std::uint64_t noise_root,
                                    std::optional<SamplerSettings> settings = std::nullopt) const;

    // Velocity of one articulator's noisy coordinates at flow time tau,
    // conditioned on a history memory; exposed for the flow-matching loss.
    struct DenoiseEval {
        Tensor velocity;   // [n_k, 2]
        Tensor features;   // [n_k, d_model]
    };
    DenoiseEval articulator_velocity(ParamBinding& params, const HistoryMemory& memory,
                                     const TextCondition& cond, int expert, const Tensor& x_k,
                                     int frame_index, double tau) const;
    Tensor confidence_head(ParamBinding& params, int expert, const Tensor& features) const;

    // Appends an already-realized frame to the state (history encoding plus
    // caches); used by generate_next_frame and by the joint-denoising path.
    void append_frame(ParamBinding& params, GenerationState& state, const Tensor& coords,
                      const std::vector<double>& confidence) const;

    PoseSequence rollout(const std::string& sentence, int total_frames, GenerationMode mode,
                         std::uint64_t seed) const;

    // Training-facing rollout: tracked coordinates per frame.
    std::vector<Tensor> rollout_frames(ParamBinding& params, const TextCondition& cond,
                                       GenerationState& state, int total_frames,
                                       std::uint64_t noise_root,
                                       std::optional<SamplerSettings> settings = std::nullopt) const;

    // Joint denoising of all frames at once (no frame is available until
    // every Euler step completes). Bidirectional across frames.
    struct JointDenoise {
        std::vector<Tensor> frame_coords;            // [J, 2] per frame
        std::vector<std::vector<double>> confidence; // per frame, per joint
    };
    JointDenoise denoise_jointly(ParamBinding& params, const TextCondition& cond,
                                 int total_frames, std::uint64_t noise_root, int n_steps) const;

    StreamStats stream_generate(const std::string& sentence, int total_frames,
                                const FrameSink& sink, std::uint64_t seed,
                                std::optional<GenerationMode> mode_override = std::nullopt) const;

    // Gradient truncation cutoff for the self-forcing window; no-op outside
    // training.
    void truncate_history(GenerationState& state) const;

    int unk_token() const { return 0; }
    int vocab_rows() const { return static_cast<int>(config_.vocabulary.size()) + 1; }

    // Keypoint-token embedding of one frame (coords plus confidence column).
    Tensor embed_frame_tokens(ParamBinding& params, const Tensor& coords,
                              const std::vector<double>& confidence, int frame_index) const;
    const std::vector<ExpertEncoder>& encoders() const { return encoders_; }

  private:
    ModelConfig config_;
    Skeleton skeleton_;
    std::vector<std::string> group_names_;
    std::vector<std::vector<int>> group_joints_;
    std::vector<ExpertEncoder> encoders_;
    ParamStore store_;

    void declare_params();
    struct ArticulatorSample {
        Tensor coords;      // [n_k, 2]
        std::vector<double> confidence;
    };
    ArticulatorSample sample_articulator(ParamBinding& params, const HistoryMemory& memory,
                                         const TextCondition& cond, int expert, int frame_index,
                                         std::uint64_t noise_root, SamplerSettings settings) const;
    Tensor assemble_frame(std::span<const Tensor> articulator_coords) const;
};

}  // namespace signflow
