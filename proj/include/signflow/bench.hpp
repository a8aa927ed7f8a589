#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "signflow/generator.hpp"
#include "signflow/synth.hpp"

namespace signflow {

// Wall-clock generation benchmark. First-frame latency is the time until the
// first frame is available: one frame's work for the frame-by-frame modes,
// the whole denoising run for joint diffusion. Medians over `repeats`.
struct BenchResult {
    GenerationMode mode = GenerationMode::kHybrid;
    int frames = 0;
    int repeats = 0;
    double first_frame_latency_s = 0.0;
    double throughput_fps = 0.0;
};

BenchResult bench_latency(const Generator& model, const std::string& sentence, int total_frames,
                          GenerationMode mode, int repeats, std::uint64_t seed = 0);

// Geometry metrics over aligned prediction/ground-truth sets. Pairs join by
// id when both sides carry unique matching ids, positionally otherwise.
struct EvalSummary {
    double dtw = 0.0;       // mean hard DTW
    double soft_dtw = 0.0;  // mean soft DTW at the given gamma
    double mpjpe = 0.0;     // mean over equal-length pairs
    int pairs = 0;
    int mpjpe_pairs = 0;
    std::map<std::string, double> per_group_dtw;
    std::map<std::string, double> per_group_mpjpe;
};

EvalSummary evaluate_pairs(const std::vector<PoseSequence>& pred,
                           const std::vector<PoseSequence>& gt, double gamma,
                           const Skeleton* skeleton = nullptr);

// Rolls the model out for every evaluation sentence (matching the ground
// truth length) and reports the mean hard DTW against the references.
double mean_rollout_dtw(const Generator& model, const std::vector<PoseSequence>& eval_set,
                        GenerationMode mode, std::uint64_t seed);

}  // namespace signflow
