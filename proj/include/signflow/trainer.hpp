#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "signflow/generator.hpp"
#include "signflow/losses.hpp"

namespace signflow {

struct TrainConfig {
    int steps = 2000;
    int batch_size = 2;
    double lr = 1e-3;
    double momentum = 0.9;
    double clip_norm = 1.0;
    int train_n_steps = 4;   // Euler steps inside the self-forcing rollout
    double gamma = 0.1;      // soft-DTW temperature
    double ema_rho = 0.99;
    double ema_eps = 1e-8;
    double flow_weight = 1.0;
    double conf_weight = 0.1;  // supervision for the predicted-confidence head
    bool parallel_batch = true;

    void validate() const;
};

// Optimizer and loss-weighting state that must survive a checkpoint for
// resume-equals-continuous training.
struct TrainerSnapshot {
    std::int64_t iteration = 0;
    EmaState ema;
    std::map<std::string, Tensor> momentum;
};

// Self-forcing trainer: every step rolls the generator forward on its own
// outputs (the same code path inference uses), scores the rollout against
// ground truth with the adaptive composite loss plus the flow-matching term,
// and applies SGD with momentum under a global-norm clip. All randomness is
// derived from (model seed, iteration, item), so training is bit-reproducible
// and resumable.
class Trainer {
  public:
    Trainer(Generator& model, TrainConfig config);

    LossReport step(std::span<const PoseSequence* const> batch, std::int64_t iteration);

    // Runs `steps` optimizer steps starting at `start_iteration`, sampling
    // batches deterministically from `data`.
    std::vector<LossReport> run(const std::vector<PoseSequence>& data, int steps,
                                std::int64_t start_iteration = 0,
                                const std::function<void(const LossReport&)>& on_report = {});

    const TrainConfig& config() const { return config_; }
    TrainerSnapshot snapshot(std::int64_t iteration) const;
    void restore(const TrainerSnapshot& snapshot);

  private:
    struct ItemForward;
    ItemForward forward_item(const PoseSequence& gt, std::int64_t iteration, int item_index) const;

    Generator* model_;
    TrainConfig config_;
    EmaState ema_;
    std::map<std::string, Tensor> momentum_;
};

}  // namespace signflow
