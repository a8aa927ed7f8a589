#pragma once

#include <memory>
#include <string>

#include "signflow/generator.hpp"
#include "signflow/trainer.hpp"

namespace signflow {

// Checkpoint file: a single JSON document carrying a format tag, the full
// model config echo, the flat named parameter table (name -> shape ->
// row-major values), and — when saved mid-training — optimizer momentum,
// loss-EMA state, and the iteration counter. Doubles round-trip bit-exactly.

inline constexpr const char* kCheckpointFormat = "signflow-checkpoint-v1";

void save_checkpoint(const std::string& path, const Generator& model,
                     const TrainerSnapshot* snapshot = nullptr);

struct LoadedCheckpoint {
    std::unique_ptr<Generator> model;
    TrainerSnapshot snapshot;
    bool has_snapshot = false;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace signflow
