#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "signflow/pose.hpp"

namespace signflow {

// Deterministic synthetic dataset: each vocabulary word owns a parametric
// motion primitive (distinct hand arcs, subtle face/body oscillation around
// a fixed base pose); sentences concatenate primitives with a linear
// cross-fade. Per-joint confidence is tied to the injected noise, so low
// confidence genuinely means an unreliable joint.
struct SynthConfig {
    int vocab_size = 8;
    double noise_sigma = 0.02;
    double confidence_kappa = 4.0;  // c = clamp(1 - kappa * ||noise||, 0, 1)
    int word_duration = 12;         // frames per primitive, >= 4
    int crossfade = 4;              // blended frames at each word boundary
    int min_words = 1;
    int max_words = 4;
    double fps = 12.0;
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<std::string> synth_vocabulary(int vocab_size);

struct MotionPrimitive {
    std::string word;
    int duration = 0;

    // Noise-free joint position at phase u in [0, 1].
    Keypoint joint_at(int joint, double u, const Skeleton& skeleton) const;

    double frequency = 1.0;
    double phase = 0.0;
    double hand_amp = 0.15;
    double face_amp = 0.03;
    double body_amp = 0.05;
};

MotionPrimitive primitive_for_word(int word_index, const SynthConfig& config);

// `split` keys the random stream, so train/dev sets never overlap.
std::vector<PoseSequence> synth_dataset(const SynthConfig& config, const Skeleton& skeleton,
                                        int count, const std::string& split);

// Flattened (x, y) coordinates per frame; confidence excluded.
std::vector<std::vector<double>> frame_descriptors(const PoseSequence& seq);

// Classic min-plus dynamic time warping with squared Euclidean frame cost.
double hard_dtw(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y);
double hard_dtw(const PoseSequence& x, const PoseSequence& y);

// Mean per-joint Euclidean error; sequences must share T and J.
double mpjpe(const PoseSequence& pred, const PoseSequence& gt);

}  // namespace signflow
