#include "signflow/config.hpp"

#include <fstream>

#include <json.hpp>

#include "signflow/error.hpp"

namespace signflow {

using nlohmann::json;

void RunConfig::validate() const {
    model.validate();
    synth.validate();
    train.validate();
    if (frames < 1) throw ConfigError("config: frames must be >= 1");
    if (synth_train_count < 1 || synth_dev_count < 1) {
        throw ConfigError("config: synthetic dataset counts must be >= 1");
    }
    if (checkpoint_every < 1) throw ConfigError("config: checkpoint_every must be >= 1");
    if (eval_gamma <= 0.0) throw ConfigError("config: eval_gamma must be positive");
    if (bench_frames < 1 || bench_repeats < 1 || bench_eval_count < 1) {
        throw ConfigError("config: bench sizes must be >= 1");
    }
    if (bench_train_steps < 0) throw ConfigError("config: bench_train_steps must be >= 0");
    for (const std::string& m : bench_modes) generation_mode_from_string(m);
    for (const std::string& a : bench_attentions) attention_variant_from_string(a);
    for (int e : bench_experts) {
        if (e != 1 && e != 3 && e != 4) throw ConfigError("config: bench experts must be 1, 3 or 4");
    }
}

std::string RunConfig::to_json() const {
    json j;
    // model
    j["d_model"] = model.d_model;
    j["n_heads"] = model.n_heads;
    j["depth"] = model.depth;
    j["experts"] = model.experts;
    j["n_steps"] = model.n_steps;
    j["beta_init"] = model.beta_init;
    j["attention"] = to_string(model.attention);
    j["bias_in_experts"] = model.bias_in_experts;
    j["mode"] = to_string(model.mode);
    j["self_forcing_window"] = model.self_forcing_window;
    j["flow_target"] = to_string(model.flow_target);
    j["vocabulary"] = model.vocabulary;
    j["fps"] = model.fps;
    j["parallel_experts"] = model.parallel_experts;
    j["seed"] = model.seed;
    // synth
    j["vocab_size"] = synth.vocab_size;
    j["noise_sigma"] = synth.noise_sigma;
    j["confidence_kappa"] = synth.confidence_kappa;
    j["word_duration"] = synth.word_duration;
    j["crossfade"] = synth.crossfade;
    j["min_words"] = synth.min_words;
    j["max_words"] = synth.max_words;
    // train
    j["train_steps"] = train.steps;
    j["batch_size"] = train.batch_size;
    j["lr"] = train.lr;
    j["momentum"] = train.momentum;
    j["clip_norm"] = train.clip_norm;
    j["train_n_steps"] = train.train_n_steps;
    j["gamma"] = train.gamma;
    j["ema_rho"] = train.ema_rho;
    j["ema_eps"] = train.ema_eps;
    j["flow_weight"] = train.flow_weight;
    j["conf_weight"] = train.conf_weight;
    j["parallel_batch"] = train.parallel_batch;
    // io + run
    j["dataset"] = dataset_path;
    j["eval_dataset"] = eval_dataset_path;
    j["checkpoint"] = checkpoint_path;
    j["out"] = out_path;
    j["log"] = log_path;
    j["text"] = text;
    j["frames"] = frames;
    j["stream"] = stream;
    j["synth_train_count"] = synth_train_count;
    j["synth_dev_count"] = synth_dev_count;
    j["checkpoint_every"] = checkpoint_every;
    j["eval_gamma"] = eval_gamma;
    // bench
    j["bench_modes"] = bench_modes;
    j["bench_experts"] = bench_experts;
    j["bench_attentions"] = bench_attentions;
    j["bench_frames"] = bench_frames;
    j["bench_repeats"] = bench_repeats;
    j["bench_train_steps"] = bench_train_steps;
    j["bench_eval_count"] = bench_eval_count;
    j["bench_single_thread"] = bench_single_thread;
    return j.dump();
}

RunConfig RunConfig::from_json(const std::string& text_in) {
    json j;
    try {
        j = json::parse(text_in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    static const std::vector<std::string> known{
        "d_model", "n_heads", "depth", "experts", "n_steps", "beta_init", "attention",
        "bias_in_experts", "mode", "self_forcing_window", "flow_target", "vocabulary", "fps",
        "parallel_experts", "seed", "vocab_size", "noise_sigma", "confidence_kappa",
        "word_duration", "crossfade", "min_words", "max_words", "train_steps", "batch_size",
        "lr", "momentum", "clip_norm", "train_n_steps", "gamma", "ema_rho", "ema_eps",
        "flow_weight", "conf_weight", "parallel_batch", "dataset", "eval_dataset", "checkpoint",
        "out", "log", "text", "frames", "stream", "synth_train_count", "synth_dev_count",
        "checkpoint_every", "eval_gamma", "bench_modes", "bench_experts", "bench_attentions",
        "bench_frames", "bench_repeats", "bench_train_steps", "bench_eval_count",
        "bench_single_thread"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ConfigError("unknown config key '" + it.key() + "'");
        }
    }

    RunConfig c;
    c.model.d_model = j.value("d_model", c.model.d_model);
    c.model.n_heads = j.value("n_heads", c.model.n_heads);
    c.model.depth = j.value("depth", c.model.depth);
    c.model.experts = j.value("experts", c.model.experts);
    c.model.n_steps = j.value("n_steps", c.model.n_steps);
    c.model.beta_init = j.value("beta_init", c.model.beta_init);
    if (j.contains("attention")) c.model.attention = attention_variant_from_string(j["attention"]);
    c.model.bias_in_experts = j.value("bias_in_experts", c.model.bias_in_experts);
    if (j.contains("mode")) c.model.mode = generation_mode_from_string(j["mode"]);
    c.model.self_forcing_window = j.value("self_forcing_window", c.model.self_forcing_window);
    if (j.contains("flow_target")) c.model.flow_target = flow_target_from_string(j["flow_target"]);
    c.model.fps = j.value("fps", c.model.fps);
    c.model.parallel_experts = j.value("parallel_experts", c.model.parallel_experts);
    c.model.seed = j.value("seed", c.model.seed);

    c.synth.vocab_size = j.value("vocab_size", c.synth.vocab_size);
    c.synth.noise_sigma = j.value("noise_sigma", c.synth.noise_sigma);
    c.synth.confidence_kappa = j.value("confidence_kappa", c.synth.confidence_kappa);
    c.synth.word_duration = j.value("word_duration", c.synth.word_duration);
    c.synth.crossfade = j.value("crossfade", c.synth.crossfade);
    c.synth.min_words = j.value("min_words", c.synth.min_words);
    c.synth.max_words = j.value("max_words", c.synth.max_words);
    c.synth.fps = c.model.fps;
    c.synth.seed = c.model.seed;

    if (j.contains("vocabulary")) {
        c.model.vocabulary = j["vocabulary"].get<std::vector<std::string>>();
    } else {
        c.model.vocabulary = synth_vocabulary(c.synth.vocab_size);
    }

    c.train.steps = j.value("train_steps", c.train.steps);
    c.train.batch_size = j.value("batch_size", c.train.batch_size);
    c.train.lr = j.value("lr", c.train.lr);
    c.train.momentum = j.value("momentum", c.train.momentum);
    c.train.clip_norm = j.value("clip_norm", c.train.clip_norm);
    c.train.train_n_steps = j.value("train_n_steps", c.train.train_n_steps);
    c.train.gamma = j.value("gamma", c.train.gamma);
    c.train.ema_rho = j.value("ema_rho", c.train.ema_rho);
    c.train.ema_eps = j.value("ema_eps", c.train.ema_eps);
    c.train.flow_weight = j.value("flow_weight", c.train.flow_weight);
    c.train.conf_weight = j.value("conf_weight", c.train.conf_weight);
    c.train.parallel_batch = j.value("parallel_batch", c.train.parallel_batch);

    c.dataset_path = j.value("dataset", c.dataset_path);
    c.eval_dataset_path = j.value("eval_dataset", c.eval_dataset_path);
    c.checkpoint_path = j.value("checkpoint", c.checkpoint_path);
    c.out_path = j.value("out", c.out_path);
    c.log_path = j.value("log", c.log_path);
    c.text = j.value("text", c.text);
    c.frames = j.value("frames", c.frames);
    c.stream = j.value("stream", c.stream);
    c.synth_train_count = j.value("synth_train_count", c.synth_train_count);
    c.synth_dev_count = j.value("synth_dev_count", c.synth_dev_count);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.eval_gamma = j.value("eval_gamma", c.eval_gamma);

    if (j.contains("bench_modes")) c.bench_modes = j["bench_modes"].get<std::vector<std::string>>();
    if (j.contains("bench_experts")) c.bench_experts = j["bench_experts"].get<std::vector<int>>();
    if (j.contains("bench_attentions")) {
        c.bench_attentions = j["bench_attentions"].get<std::vector<std::string>>();
    }
    c.bench_frames = j.value("bench_frames", c.bench_frames);
    c.bench_repeats = j.value("bench_repeats", c.bench_repeats);
    c.bench_train_steps = j.value("bench_train_steps", c.bench_train_steps);
    c.bench_eval_count = j.value("bench_eval_count", c.bench_eval_count);
    c.bench_single_thread = j.value("bench_single_thread", c.bench_single_thread);

    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace signflow
