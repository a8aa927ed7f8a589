#pragma once

#include <string>
#include <vector>

#include "signflow/generator.hpp"
#include "signflow/synth.hpp"
#include "signflow/trainer.hpp"

namespace signflow {

// Resolved run configuration for the CLI: a flat JSON key set, overridable
// by command-line flags, echoed verbatim into every output artifact.
struct RunConfig {
    ModelConfig model;
    SynthConfig synth;
    TrainConfig train;

    std::string dataset_path;      // training data; empty -> synthesized
    std::string eval_dataset_path; // held-out data; empty -> synthesized dev split
    std::string checkpoint_path = "signflow_checkpoint.json";
    std::string out_path;          // command output; empty -> stdout
    std::string log_path = "signflow_train_log.jsonl";
    std::string text;              // sentence for generate

    int frames = 60;
    bool stream = false;
    int synth_train_count = 200;
    int synth_dev_count = 40;
    int checkpoint_every = 500;
    double eval_gamma = 1e-3;  // soft-DTW temperature for reported metrics

    std::vector<std::string> bench_modes{"hybrid", "full_diffusion", "pure_ar"};
    std::vector<int> bench_experts{3};
    std::vector<std::string> bench_attentions{"confidence"};
    int bench_frames = 60;
    int bench_repeats = 3;
    int bench_train_steps = 300;
    int bench_eval_count = 10;
    bool bench_single_thread = true;

    void validate() const;
    std::string to_json() const;  // full echo, flat keys
    static RunConfig from_json(const std::string& text);
    static RunConfig from_file(const std::string& path);
};

}  // namespace signflow
