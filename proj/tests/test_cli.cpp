#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "signflow/checkpoint.hpp"
#include "signflow/pose.hpp"
#include "signflow/synth.hpp"

using namespace signflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

#ifndef SIGNFLOW_CLI_PATH
#define SIGNFLOW_CLI_PATH "./tools/signflow"
#endif

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(SIGNFLOW_CLI_PATH) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_tiny_config(const fs::path& path, const fs::path& dir, int train_steps = 3) {
    json j{{"d_model", 16},          {"n_heads", 2},
           {"depth", 1},             {"experts", 3},
           {"n_steps", 2},           {"word_duration", 5},
           {"crossfade", 2},         {"min_words", 1},
           {"max_words", 2},         {"train_steps", train_steps},
           {"batch_size", 1},        {"train_n_steps", 2},
           {"synth_train_count", 6}, {"synth_dev_count", 3},
           {"seed", 5},              {"checkpoint", (dir / "ck.json").string()},
           {"log", (dir / "log.jsonl").string()}};
    std::ofstream(path) << j.dump();
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("train writes one log line per step and a loadable checkpoint") {
    fs::path dir = fresh_dir("signflow_cli_train");
    write_tiny_config(dir / "cfg.json", dir, 4);
    RunResult r = run_cli("train --config " + (dir / "cfg.json").string(), dir);
    CHECK(r.exit_code == 0);
    CHECK(count_lines(slurp(dir / "log.jsonl")) == 4);
    CHECK(fs::exists(dir / "ck.json"));
    LoadedCheckpoint ck = load_checkpoint((dir / "ck.json").string());
    CHECK(ck.has_snapshot);
    CHECK(ck.snapshot.iteration == 4);
    CHECK(fs::exists(dir / "log.jsonl.config.json"));
}

TEST_CASE("train resume equals continuous run") {
    fs::path cont_dir = fresh_dir("signflow_cli_cont");
    write_tiny_config(cont_dir / "cfg.json", cont_dir, 4);
    REQUIRE(run_cli("train --config " + (cont_dir / "cfg.json").string(), cont_dir).exit_code == 0);

    fs::path split_dir = fresh_dir("signflow_cli_split");
    write_tiny_config(split_dir / "cfg.json", split_dir, 2);
    REQUIRE(run_cli("train --config " + (split_dir / "cfg.json").string(), split_dir).exit_code == 0);
    REQUIRE(run_cli("train --config " + (split_dir / "cfg.json").string(), split_dir).exit_code == 0);

    LoadedCheckpoint a = load_checkpoint((cont_dir / "ck.json").string());
    LoadedCheckpoint b = load_checkpoint((split_dir / "ck.json").string());
    CHECK(b.snapshot.iteration == 4);
    for (const std::string& name : a.model->params().names()) {
        CHECK(a.model->params().values(name).to_vector() ==
              b.model->params().values(name).to_vector());
    }
    // Resumed log appends: 2 + 2 lines.
    CHECK(count_lines(slurp(split_dir / "log.jsonl")) == 4);
}

TEST_CASE("train with a missing dataset exits 2 and names the path") {
    fs::path dir = fresh_dir("signflow_cli_nodata");
    write_tiny_config(dir / "cfg.json", dir);
    RunResult r = run_cli(
        "train --config " + (dir / "cfg.json").string() + " --dataset /nonexistent/poses.jsonl", dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("/nonexistent/poses.jsonl") != std::string::npos);
}

TEST_CASE("invalid config exits 1") {
    fs::path dir = fresh_dir("signflow_cli_badcfg");
    std::ofstream(dir / "cfg.json") << R"({"unknown_key": 1})";
    RunResult r = run_cli("train --config " + (dir / "cfg.json").string(), dir);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("unknown_key") != std::string::npos);
}

TEST_CASE("generate: records, summary, determinism, provenance replay") {
    fs::path dir = fresh_dir("signflow_cli_gen");
    write_tiny_config(dir / "cfg.json", dir, 2);
    REQUIRE(run_cli("train --config " + (dir / "cfg.json").string(), dir).exit_code == 0);

    const std::string base = "generate --config " + (dir / "cfg.json").string() +
                             " --text \"hello thanks\" --frames 5 --out ";
    RunResult r1 = run_cli(base + (dir / "a.jsonl").string(), dir);
    CHECK(r1.exit_code == 0);
    CHECK(count_lines(r1.out) == 1);  // timing summary
    CHECK(r1.out.find("summary") != std::string::npos);

    auto seqs = load_sequences((dir / "a.jsonl").string());
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].length() == 5);
    CHECK(seqs[0].text == "hello thanks");

    // Same flags, same seed: identical artifact bytes.
    const std::string first = slurp(dir / "a.jsonl");
    RunResult r2 = run_cli(base + (dir / "a.jsonl").string(), dir);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "a.jsonl") == first);

    // Replay from the embedded config alone reproduces the artifact bytes.
    json artifact = json::parse(first);
    std::ofstream(dir / "replay_cfg.json") << artifact.at("config").dump();
    RunResult r3 = run_cli("generate --config " + (dir / "replay_cfg.json").string(), dir);
    REQUIRE(r3.exit_code == 0);
    CHECK(json::parse(slurp(dir / "a.jsonl")) == artifact);
}

TEST_CASE("generate streaming emits per-frame records plus a summary") {
    fs::path dir = fresh_dir("signflow_cli_stream");
    write_tiny_config(dir / "cfg.json", dir, 2);
    REQUIRE(run_cli("train --config " + (dir / "cfg.json").string(), dir).exit_code == 0);
    RunResult r = run_cli("generate --config " + (dir / "cfg.json").string() +
                              " --text hello --frames 3 --stream",
                          dir);
    CHECK(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string line;
    int frame_lines = 0, summary_lines = 0;
    int expected_index = 0;
    while (std::getline(lines, line)) {
        json j = json::parse(line);
        if (j.contains("frame")) {
            CHECK(j["frame"] == expected_index++);
            ++frame_lines;
        } else if (j.contains("summary")) {
            ++summary_lines;
            CHECK(j["summary"]["first_frame_latency_s"].get<double>() > 0.0);
        }
    }
    CHECK(frame_lines == 3);
    CHECK(summary_lines == 1);
}

TEST_CASE("generate mode contradictions and missing checkpoint") {
    fs::path dir = fresh_dir("signflow_cli_genbad");
    write_tiny_config(dir / "cfg.json", dir, 2);
    RunResult contradiction = run_cli("generate --config " + (dir / "cfg.json").string() +
                                          " --text hello --mode full_diffusion --stream",
                                      dir);
    CHECK(contradiction.exit_code == 3);

    RunResult missing = run_cli(
        "generate --config " + (dir / "cfg.json").string() + " --text hello", dir);
    CHECK(missing.exit_code == 2);  // checkpoint does not exist yet
}

TEST_CASE("eval: zero metrics on identical files, id-join order insensitivity, count mismatch") {
    fs::path dir = fresh_dir("signflow_cli_eval");
    write_tiny_config(dir / "cfg.json", dir, 2);

    Skeleton skel = Skeleton::desk_default();
    SynthConfig sc;
    sc.word_duration = 5;
    sc.crossfade = 2;
    sc.seed = 5;
    auto seqs = synth_dataset(sc, skel, 3, "evalcli");
    save_sequences((dir / "gt.jsonl").string(), seqs);

    RunResult self_eval = run_cli("eval --config " + (dir / "cfg.json").string() + " --pred " +
                                      (dir / "gt.jsonl").string() + " --gt " +
                                      (dir / "gt.jsonl").string(),
                                  dir);
    CHECK(self_eval.exit_code == 0);
    json m = json::parse(self_eval.out)["metrics"];
    CHECK(m["dtw"].get<double>() == 0.0);
    CHECK(m["soft_dtw"].get<double>() == 0.0);
    CHECK(m["mpjpe"].get<double>() == 0.0);
    CHECK(m["per_articulator"]["hands"]["dtw"].get<double>() == 0.0);

    // Metrics join by id, so shuffled prediction order scores identically.
    auto shuffled = seqs;
    std::swap(shuffled[0], shuffled[2]);
    save_sequences((dir / "pred_shuffled.jsonl").string(), shuffled);
    RunResult shuffled_eval = run_cli("eval --config " + (dir / "cfg.json").string() + " --pred " +
                                          (dir / "pred_shuffled.jsonl").string() + " --gt " +
                                          (dir / "gt.jsonl").string(),
                                      dir);
    CHECK(shuffled_eval.exit_code == 0);
    CHECK(json::parse(shuffled_eval.out)["metrics"]["dtw"].get<double>() == 0.0);

    auto fewer = seqs;
    fewer.pop_back();
    save_sequences((dir / "pred_short.jsonl").string(), fewer);
    RunResult mismatch = run_cli("eval --config " + (dir / "cfg.json").string() + " --pred " +
                                     (dir / "pred_short.jsonl").string() + " --gt " +
                                     (dir / "gt.jsonl").string(),
                                 dir);
    CHECK(mismatch.exit_code == 2);
}

TEST_CASE("bench: grid rows, empty grid, unknown keys") {
    fs::path dir = fresh_dir("signflow_cli_bench");
    json j{{"d_model", 16},
           {"n_heads", 2},
           {"depth", 1},
           {"n_steps", 2},
           {"word_duration", 5},
           {"crossfade", 2},
           {"max_words", 2},
           {"synth_train_count", 4},
           {"seed", 5},
           {"bench_modes", json::array({"hybrid", "pure_ar"})},
           {"bench_experts", json::array({3})},
           {"bench_attentions", json::array({"confidence"})},
           {"bench_frames", 4},
           {"bench_repeats", 1},
           {"bench_train_steps", 0},
           {"bench_eval_count", 2}};
    std::ofstream(dir / "cfg.json") << j.dump();
    RunResult r = run_cli("bench --config " + (dir / "cfg.json").string(), dir);
    CHECK(r.exit_code == 0);
    json doc = json::parse(r.out);
    CHECK(doc["rows"].size() == 2);
    for (const auto& row : doc["rows"]) {
        CHECK(row["first_frame_latency_s"].get<double>() > 0.0);
        CHECK(row["dtw"].get<double>() > 0.0);
    }

    json empty = j;
    empty["bench_modes"] = json::array();
    std::ofstream(dir / "empty.json") << empty.dump();
    CHECK(run_cli("bench --config " + (dir / "empty.json").string(), dir).exit_code == 1);

    json bad = j;
    bad["bench_modes"] = json::array({"hybrid", "ddpm"});
    std::ofstream(dir / "bad.json") << bad.dump();
    CHECK(run_cli("bench --config " + (dir / "bad.json").string(), dir).exit_code == 1);
}

TEST_SUITE_END();
