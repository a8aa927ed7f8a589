#include "signflow/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "signflow/bench.hpp"
#include "signflow/checkpoint.hpp"
#include "signflow/config.hpp"
#include "signflow/error.hpp"

namespace signflow::cli {

using nlohmann::json;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> experts;
    std::optional<std::string> attention;
    std::optional<int> steps;
    std::optional<std::string> out;
    bool stream = false;
    std::optional<std::string> dataset;
    std::optional<std::string> checkpoint;
    std::optional<std::string> log;
    std::optional<std::string> text;
    std::optional<int> frames;
    std::string pred_path, gt_path;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file (flags override file values)");
    cmd->add_option("--seed", o.seed, "Root random seed");
    cmd->add_option("--mode", o.mode, "hybrid | full_diffusion | pure_ar");
    cmd->add_option("--experts", o.experts, "Articulator expert count: 1, 3 or 4");
    cmd->add_option("--attention", o.attention, "causal | confidence");
    cmd->add_option("--steps", o.steps,
                    "train: optimizer steps; generate/bench: Euler steps per frame");
    cmd->add_option("--out", o.out, "Output path (stdout when omitted)");
    cmd->add_flag("--stream", o.stream, "Stream frames as they complete (generate)");
}

RunConfig resolve_config(const Overrides& o, bool steps_mean_training) {
    RunConfig cfg = o.config_path.empty() ? RunConfig::from_json("{}")
                                          : RunConfig::from_file(o.config_path);
    if (o.seed) {
        cfg.model.seed = *o.seed;
        cfg.synth.seed = *o.seed;
    }
    if (o.mode) cfg.model.mode = generation_mode_from_string(*o.mode);
    if (o.experts) cfg.model.experts = *o.experts;
    if (o.attention) cfg.model.attention = attention_variant_from_string(*o.attention);
    if (o.steps) {
        if (steps_mean_training) {
            cfg.train.steps = *o.steps;
        } else {
            cfg.model.n_steps = *o.steps;
        }
    }
    if (o.out) cfg.out_path = *o.out;
    if (o.stream) cfg.stream = true;
    if (o.dataset) cfg.dataset_path = *o.dataset;
    if (o.checkpoint) cfg.checkpoint_path = *o.checkpoint;
    if (o.log) cfg.log_path = *o.log;
    if (o.text) cfg.text = *o.text;
    if (o.frames) cfg.frames = *o.frames;
    cfg.validate();
    return cfg;
}

std::vector<PoseSequence> training_data(const RunConfig& cfg) {
    if (!cfg.dataset_path.empty()) {
        if (!std::filesystem::exists(cfg.dataset_path)) {
            throw DataError("dataset file not found: " + cfg.dataset_path);
        }
        return load_sequences(cfg.dataset_path);
    }
    return synth_dataset(cfg.synth, Skeleton::desk_default(), cfg.synth_train_count, "train");
}

std::vector<PoseSequence> eval_data(const RunConfig& cfg, int count) {
    if (!cfg.eval_dataset_path.empty()) {
        if (!std::filesystem::exists(cfg.eval_dataset_path)) {
            throw DataError("eval dataset file not found: " + cfg.eval_dataset_path);
        }
        return load_sequences(cfg.eval_dataset_path);
    }
    return synth_dataset(cfg.synth, Skeleton::desk_default(), count, "dev");
}

std::ostream& output_stream(const RunConfig& cfg, std::ofstream& file) {
    if (cfg.out_path.empty()) return std::cout;
    file.open(cfg.out_path);
    if (!file) throw DataError("cannot write output: " + cfg.out_path);
    return file;
}

// ---- train -----------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
    auto data = training_data(cfg);
    if (data.empty()) throw DataError("training dataset is empty");

    std::unique_ptr<Generator> model;
    TrainerSnapshot snapshot;
    bool resumed = false;
    if (std::filesystem::exists(cfg.checkpoint_path)) {
        LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint_path);
        model = std::move(loaded.model);
        if (loaded.has_snapshot) {
            snapshot = std::move(loaded.snapshot);
            resumed = true;
        }
    } else {
        model = std::make_unique<Generator>(cfg.model);
    }

    Trainer trainer(*model, cfg.train);
    std::int64_t start_iteration = 0;
    if (resumed) {
        trainer.restore(snapshot);
        start_iteration = snapshot.iteration;
    }

    // Full config echo rides in a sidecar so the log keeps one line per step.
    {
        std::ofstream side(cfg.log_path + ".config.json");
        side << cfg.to_json() << "\n";
    }
    std::ofstream log(cfg.log_path, resumed ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot write training log: " + cfg.log_path);

    std::int64_t next_checkpoint = start_iteration + cfg.checkpoint_every;
    auto reports = trainer.run(data, cfg.train.steps, start_iteration, [&](const LossReport& r) {
        log << r.to_json_line() << "\n";
        log.flush();
        if (r.iteration + 1 >= next_checkpoint) {
            TrainerSnapshot snap = trainer.snapshot(r.iteration + 1);
            save_checkpoint(cfg.checkpoint_path, *model, &snap);
            next_checkpoint += cfg.checkpoint_every;
        }
    });

    TrainerSnapshot final_snapshot = trainer.snapshot(start_iteration + cfg.train.steps);
    save_checkpoint(cfg.checkpoint_path, *model, &final_snapshot);

    json summary{{"checkpoint", cfg.checkpoint_path},
                 {"log", cfg.log_path},
                 {"steps", cfg.train.steps},
                 {"start_iteration", start_iteration},
                 {"config", json::parse(cfg.to_json())}};
    if (!reports.empty()) summary["final"] = json::parse(reports.back().to_json_line());
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---- generate ----------------------------------------------------------------

int cmd_generate(const RunConfig& cfg) {
    if (cfg.stream && cfg.model.mode == GenerationMode::kFullDiffusion) {
        throw ModeError("--stream requires a frame-by-frame mode; full_diffusion denoises jointly");
    }
    if (cfg.text.empty()) throw ConfigError("generate: no sentence given (--text)");
    if (!std::filesystem::exists(cfg.checkpoint_path)) {
        throw DataError("checkpoint not found: " + cfg.checkpoint_path);
    }
    LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint_path);
    Generator& model = *loaded.model;
    model.set_mode(cfg.model.mode);
    model.set_n_steps(cfg.model.n_steps);
    model.set_attention_variant(cfg.model.attention);
    model.set_parallel_experts(cfg.model.parallel_experts);

    std::ofstream file;
    std::ostream& out = output_stream(cfg, file);
    const std::uint64_t seed = cfg.model.seed;

    if (cfg.stream) {
        StreamStats stats = model.stream_generate(
            cfg.text, cfg.frames,
            [&](const PoseFrame& frame, int index) {
                json kps = json::array();
                for (const Keypoint& k : frame.keypoints) {
                    kps.push_back(json::array({k.x, k.y, k.confidence}));
                }
                out << json{{"frame", index}, {"keypoints", std::move(kps)}}.dump() << "\n";
                out.flush();  // a consumer must observe true first-frame latency
                return static_cast<bool>(out);
            },
            seed);
        json summary{{"summary",
                      {{"frames", stats.frames_emitted},
                       {"aborted", stats.aborted},
                       {"first_frame_latency_s", stats.first_frame_seconds},
                       {"total_s", stats.total_seconds},
                       {"throughput_fps", stats.frames_per_second}}},
                     {"config", json::parse(cfg.to_json())},
                     {"seed", seed}};
        out << summary.dump() << "\n";
        return 0;
    }

    const auto start = std::chrono::steady_clock::now();
    PoseSequence seq = model.rollout(cfg.text, cfg.frames, cfg.model.mode, seed);
    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json line = json::parse(sequence_to_json_line(seq));
    line["config"] = json::parse(cfg.to_json());
    line["seed"] = seed;
    out << line.dump() << "\n";

    json summary{{"summary",
                  {{"frames", seq.length()},
                   {"total_s", total},
                   {"throughput_fps", seq.length() / total}}},
                 {"seed", seed}};
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---- eval ---------------------------------------------------------------------

int cmd_eval(const RunConfig& cfg, const std::string& pred_path, const std::string& gt_path) {
    if (!std::filesystem::exists(pred_path)) throw DataError("predictions not found: " + pred_path);
    if (!std::filesystem::exists(gt_path)) throw DataError("references not found: " + gt_path);
    auto pred = load_sequences(pred_path);
    auto gt = load_sequences(gt_path);
    if (pred.size() != gt.size()) {
        throw DataError("eval: sequence count mismatch, " + std::to_string(pred.size()) + " vs " +
                        std::to_string(gt.size()));
    }
    if (pred.empty()) throw DataError("eval: no sequences to score");

    const Skeleton skeleton = Skeleton::desk_default().regrouped(cfg.model.experts);
    const bool breakdown = !pred[0].frames.empty() &&
                           pred[0].frames[0].joint_count() == skeleton.joints;
    EvalSummary s = evaluate_pairs(pred, gt, cfg.eval_gamma, breakdown ? &skeleton : nullptr);

    json metrics{{"dtw", s.dtw},
                 {"soft_dtw", s.soft_dtw},
                 {"soft_dtw_gamma", cfg.eval_gamma},
                 {"mpjpe", s.mpjpe},
                 {"pairs", s.pairs},
                 {"mpjpe_pairs", s.mpjpe_pairs}};
    if (breakdown) {
        json groups = json::object();
        for (const auto& [name, v] : s.per_group_dtw) groups[name]["dtw"] = v;
        for (const auto& [name, v] : s.per_group_mpjpe) groups[name]["mpjpe"] = v;
        metrics["per_articulator"] = std::move(groups);
    }
    json doc{{"metrics", std::move(metrics)}, {"config", json::parse(cfg.to_json())}};

    std::ofstream file;
    std::ostream& out = output_stream(cfg, file);
    out << doc.dump() << "\n";
    return 0;
}

// ---- bench ---------------------------------------------------------------------

int cmd_bench(const RunConfig& cfg) {
    if (cfg.bench_modes.empty() || cfg.bench_experts.empty() || cfg.bench_attentions.empty()) {
        throw ConfigError("bench: empty grid");
    }
    auto train_set = training_data(cfg);
    auto eval_set = eval_data(cfg, cfg.bench_eval_count);
    if (static_cast<int>(eval_set.size()) > cfg.bench_eval_count) {
        eval_set.resize(static_cast<std::size_t>(cfg.bench_eval_count));
    }
    const std::string bench_sentence = eval_set.front().text;

    json rows = json::array();
    for (int experts : cfg.bench_experts) {
        for (const std::string& attention : cfg.bench_attentions) {
            ModelConfig variant = cfg.model;
            variant.experts = experts;
            variant.attention = attention_variant_from_string(attention);
            variant.parallel_experts = !cfg.bench_single_thread;
            Generator model(variant);
            if (cfg.bench_train_steps > 0) {
                TrainConfig tc = cfg.train;
                tc.steps = cfg.bench_train_steps;
                tc.parallel_batch = !cfg.bench_single_thread;
                Trainer trainer(model, tc);
                trainer.run(train_set, cfg.bench_train_steps);
            }
            for (const std::string& mode_name : cfg.bench_modes) {
                const GenerationMode mode = generation_mode_from_string(mode_name);
                BenchResult b = bench_latency(model, bench_sentence, cfg.bench_frames, mode,
                                              cfg.bench_repeats, cfg.model.seed);
                const double dtw = mean_rollout_dtw(model, eval_set, mode, cfg.model.seed);
                rows.push_back(json{{"experts", experts},
                                    {"attention", attention},
                                    {"mode", mode_name},
                                    {"frames", b.frames},
                                    {"repeats", b.repeats},
                                    {"first_frame_latency_s", b.first_frame_latency_s},
                                    {"throughput_fps", b.throughput_fps},
                                    {"dtw", dtw},
                                    {"train_steps", cfg.bench_train_steps}});
                std::cerr << "bench: experts=" << experts << " attention=" << attention
                          << " mode=" << mode_name << " latency=" << b.first_frame_latency_s
                          << "s fps=" << b.throughput_fps << " dtw=" << dtw << "\n";
            }
        }
    }
    json doc{{"rows", std::move(rows)}, {"config", json::parse(cfg.to_json())}};
    std::ofstream file;
    std::ostream& out = output_stream(cfg, file);
    out << doc.dump() << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"signflow: streaming text-to-pose generation with flow matching"};
    app.require_subcommand(1);

    Overrides train_o, gen_o, eval_o, bench_o;

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model on pose sequences");
    add_common_flags(train_cmd, train_o);
    train_cmd->add_option("--dataset", train_o.dataset, "Training data (pose JSON-lines)");
    train_cmd->add_option("--checkpoint", train_o.checkpoint,
                          "Checkpoint path (resumes when the file exists)");
    train_cmd->add_option("--log", train_o.log, "Training log path (JSON-lines)");

    CLI::App* gen_cmd = app.add_subcommand("generate", "Generate a pose sequence from text");
    add_common_flags(gen_cmd, gen_o);
    gen_cmd->add_option("--text", gen_o.text, "Sentence to sign");
    gen_cmd->add_option("--frames", gen_o.frames, "Frames to generate");
    gen_cmd->add_option("--checkpoint", gen_o.checkpoint, "Trained checkpoint to load");

    CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against references");
    add_common_flags(eval_cmd, eval_o);
    eval_cmd->add_option("--pred", eval_o.pred_path, "Predicted pose JSON-lines")->required();
    eval_cmd->add_option("--gt", eval_o.gt_path, "Reference pose JSON-lines")->required();

    CLI::App* bench_cmd = app.add_subcommand("bench", "Run the latency/quality ablation grid");
    add_common_flags(bench_cmd, bench_o);
    bench_cmd->add_option("--frames", bench_o.frames, "Frames per benchmark run");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(resolve_config(train_o, /*steps_mean_training=*/true));
        if (gen_cmd->parsed()) {
            RunConfig cfg = resolve_config(gen_o, false);
            if (gen_o.frames) cfg.frames = *gen_o.frames;
            return cmd_generate(cfg);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(resolve_config(eval_o, false), eval_o.pred_path, eval_o.gt_path);
        }
        if (bench_cmd->parsed()) {
            RunConfig cfg = resolve_config(bench_o, false);
            if (bench_o.frames) cfg.bench_frames = *bench_o.frames;
            return cmd_bench(cfg);
        }
        throw ConfigError("no command given");
    } catch (const ModeError& e) {
        std::cerr << "mode error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace signflow::cli
