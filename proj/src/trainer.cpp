#include "signflow/trainer.hpp"

#include <cmath>
#include <future>
#include <memory>

#include "signflow/error.hpp"
#include "signflow/flow.hpp"
#include "signflow/rng.hpp"

namespace signflow {

void TrainConfig::validate() const {
    if (steps < 0) throw ConfigError("train: steps must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must lie in [0, 1)");
    if (clip_norm <= 0.0) throw ConfigError("train: clip_norm must be positive");
    if (train_n_steps < 1) throw ConfigError("train: train_n_steps must be >= 1");
    if (gamma <= 0.0) throw ConfigError("train: gamma must be positive");
    if (ema_rho <= 0.0 || ema_rho >= 1.0) throw ConfigError("train: ema_rho must lie in (0, 1)");
    if (flow_weight < 0.0 || conf_weight < 0.0) throw ConfigError("train: weights must be >= 0");
}

Trainer::Trainer(Generator& model, TrainConfig config) : model_(&model), config_(config) {
    config_.validate();
    ema_.rho = config_.ema_rho;
    ema_.eps = config_.ema_eps;
}

struct Trainer::ItemForward {
    std::unique_ptr<Tape> tape;
    std::unique_ptr<ParamBinding> binding;
    Tensor joint, bone, sdtw, flow, conf;
};

Trainer::ItemForward Trainer::forward_item(const PoseSequence& gt, std::int64_t iteration,
                                           int item_index) const {
    if (gt.length() < 1) throw DataError("train: empty ground-truth sequence");
    const Generator& model = *model_;
    const Skeleton& skeleton = model.skeleton();
    if (gt.frames[0].joint_count() != skeleton.joints) {
        throw DataError("train: sequence has " + std::to_string(gt.frames[0].joint_count()) +
                        " joints, model expects " + std::to_string(skeleton.joints));
    }

    ItemForward item;
    item.tape = std::make_unique<Tape>();
    item.binding = std::make_unique<ParamBinding>(model_->params(), item.tape.get());
    ParamBinding& binding = *item.binding;

    TextCondition cond = model.encode_text(gt.text, binding);
    GenerationState state = model.new_state();
    const Generator::SamplerSettings settings{config_.train_n_steps, true};
    const std::uint64_t noise_root =
        RngStream::derive(model.config().seed, "train-z", static_cast<std::uint64_t>(iteration),
                          static_cast<std::uint64_t>(item_index))
            .next_u64();

    const int total = gt.length();
    const int groups = model.group_count();
    Tensor flow_acc, conf_acc;

    for (int t = 0; t < total; ++t) {
        // Flow-matching and confidence supervision for this frame, conditioned
        // on the self-generated history (never on ground-truth frames).
        RngStream fm_rng = RngStream::derive(model.config().seed, "train-fm",
                                             static_cast<std::uint64_t>(iteration),
                                             static_cast<std::uint64_t>(item_index),
                                             static_cast<std::uint64_t>(t));
        const double tau = fm_rng.uniform(kFlowTimeMin, 1.0);
        Tensor gt_coords = coords_tensor(gt.frames[static_cast<std::size_t>(t)]);
        const std::vector<double> gt_conf = confidences(gt.frames[static_cast<std::size_t>(t)]);

        for (int k = 0; k < groups; ++k) {
            const auto& joints = skeleton.groups[static_cast<std::size_t>(k)].second;
            Tensor x0 = take_rows(gt_coords, joints);
            Tensor z = random_gaussian({static_cast<int>(joints.size()), 2}, fm_rng);
            Tensor x_tau = interpolate(z, x0, tau);
            Generator::DenoiseEval eval =
                model.articulator_velocity(binding, state.memory, cond, k, x_tau, t, tau);
            Tensor target = fm_target(z, x0, x_tau, tau, model.config().flow_target);
            Tensor fm_k = fm_loss(eval.velocity, target);
            flow_acc = flow_acc.defined() ? add(flow_acc, fm_k) : fm_k;

            Tensor conf_pred = model.confidence_head(binding, k, eval.features);
            std::vector<double> group_conf;
            group_conf.reserve(joints.size());
            for (int j : joints) group_conf.push_back(gt_conf[static_cast<std::size_t>(j)]);
            Tensor conf_target(Shape{static_cast<int>(joints.size())}, std::move(group_conf));
            Tensor diff = sub(conf_pred, conf_target);
            Tensor conf_k = reduce_mean_all(mul(diff, diff));
            conf_acc = conf_acc.defined() ? add(conf_acc, conf_k) : conf_k;
        }

        model.generate_next_frame(binding, state, cond, noise_root, settings);
    }

    const double norm = 1.0 / static_cast<double>(total * groups);
    item.flow = scale(flow_acc, norm);
    item.conf = scale(conf_acc, norm);

    std::vector<Tensor> gt_frames;
    std::vector<Tensor> pred_desc, gt_desc;
    gt_frames.reserve(static_cast<std::size_t>(total));
    for (int t = 0; t < total; ++t) {
        gt_frames.push_back(coords_tensor(gt.frames[static_cast<std::size_t>(t)]));
        pred_desc.push_back(reshape(state.frame_coords[static_cast<std::size_t>(t)],
                                    {skeleton.joints * 2}));
        gt_desc.push_back(reshape(gt_frames.back(), {skeleton.joints * 2}));
    }
    item.joint = joint_loss(state.frame_coords, gt_frames);
    item.bone = bone_loss(state.frame_coords, gt_frames, skeleton);
    item.sdtw = soft_dtw(pred_desc, gt_desc, config_.gamma);
    return item;
}

LossReport Trainer::step(std::span<const PoseSequence* const> batch, std::int64_t iteration) {
    if (batch.empty()) throw DataError("train: empty batch");
    const int n = static_cast<int>(batch.size());

    std::vector<ItemForward> items(static_cast<std::size_t>(n));
    auto run_forward = [&](int i) {
        items[static_cast<std::size_t>(i)] = forward_item(*batch[static_cast<std::size_t>(i)], iteration, i);
    };
    if (config_.parallel_batch && n > 1) {
        std::vector<std::future<void>> tasks;
        for (int i = 0; i < n; ++i) tasks.push_back(std::async(std::launch::async, run_forward, i));
        for (auto& t : tasks) t.get();
    } else {
        for (int i = 0; i < n; ++i) run_forward(i);
    }

    double joint_mean = 0.0, bone_mean = 0.0, sdtw_mean = 0.0, flow_mean = 0.0, conf_mean = 0.0;
    for (const ItemForward& item : items) {
        joint_mean += item.joint.value();
        bone_mean += item.bone.value();
        sdtw_mean += item.sdtw.value();
        flow_mean += item.flow.value();
        conf_mean += item.conf.value();
    }
    joint_mean /= n;
    bone_mean /= n;
    sdtw_mean /= n;
    flow_mean /= n;
    conf_mean /= n;

    LossReport report = total_loss(joint_mean, bone_mean, sdtw_mean, ema_, iteration);
    report.flow = flow_mean;
    report.flow_weight = config_.flow_weight;
    report.conf = conf_mean;
    report.conf_weight = config_.conf_weight;
    report.objective = report.total + config_.flow_weight * flow_mean + config_.conf_weight * conf_mean;

    // Weighted per-item objectives share the batch-level lambdas (constants).
    std::map<std::string, Tensor> grad_sum;
    std::vector<std::map<std::string, Tensor>> item_grads(static_cast<std::size_t>(n));
    auto run_backward = [&](int i) {
        ItemForward& item = items[static_cast<std::size_t>(i)];
        Tensor objective = scale(item.joint, report.weights[0]);
        objective = add(objective, scale(item.bone, report.weights[1]));
        objective = add(objective, scale(item.sdtw, report.weights[2]));
        objective = add(objective, scale(item.flow, config_.flow_weight));
        objective = add(objective, scale(item.conf, config_.conf_weight));
        GradMap grads = item.tape->backward(objective);
        item_grads[static_cast<std::size_t>(i)] = item.binding->gradients(grads);
    };
    if (config_.parallel_batch && n > 1) {
        std::vector<std::future<void>> tasks;
        for (int i = 0; i < n; ++i) tasks.push_back(std::async(std::launch::async, run_backward, i));
        for (auto& t : tasks) t.get();
    } else {
        for (int i = 0; i < n; ++i) run_backward(i);
    }

    for (int i = 0; i < n; ++i) {
        for (auto& [name, grad] : item_grads[static_cast<std::size_t>(i)]) {
            auto it = grad_sum.find(name);
            if (it == grad_sum.end()) {
                grad_sum.emplace(name, grad);
            } else {
                it->second = add(it->second, grad);
            }
        }
    }

    double norm_sq = 0.0;
    for (auto& [name, grad] : grad_sum) {
        grad = scale(grad, 1.0 / n);
        for (double v : grad.data()) norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    const double clip_scale = norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

    ParamStore& store = model_->params();
    for (auto& [name, grad] : grad_sum) {
        Tensor g = clip_scale != 1.0 ? scale(grad, clip_scale) : grad;
        auto it = momentum_.find(name);
        if (it == momentum_.end()) it = momentum_.emplace(name, Tensor::zeros(g.shape())).first;
        it->second = add(scale(it->second, config_.momentum), g);
        store.set_values(name, sub(store.values(name), scale(it->second, config_.lr)));
    }
    return report;
}

std::vector<LossReport> Trainer::run(const std::vector<PoseSequence>& data, int steps,
                                     std::int64_t start_iteration,
                                     const std::function<void(const LossReport&)>& on_report) {
    if (data.empty()) throw DataError("train: dataset is empty");
    std::vector<LossReport> reports;
    reports.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const std::int64_t iteration = start_iteration + s;
        RngStream order = RngStream::derive(model_->config().seed, "train-order",
                                            static_cast<std::uint64_t>(iteration));
        std::vector<const PoseSequence*> batch;
        batch.reserve(static_cast<std::size_t>(config_.batch_size));
        for (int b = 0; b < config_.batch_size; ++b) {
            batch.push_back(&data[order.index(data.size())]);
        }
        LossReport report = step(batch, iteration);
        if (on_report) on_report(report);
        reports.push_back(std::move(report));
    }
    return reports;
}

TrainerSnapshot Trainer::snapshot(std::int64_t iteration) const {
    return TrainerSnapshot{iteration, ema_, momentum_};
}

void Trainer::restore(const TrainerSnapshot& snapshot) {
    ema_ = snapshot.ema;
    momentum_ = snapshot.momentum;
}

}  // namespace signflow
