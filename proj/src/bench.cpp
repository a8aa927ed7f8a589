#include "signflow/bench.hpp"

#include <algorithm>
#include <chrono>

#include "signflow/error.hpp"
#include "signflow/losses.hpp"

namespace signflow {

namespace {

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

BenchResult bench_latency(const Generator& model, const std::string& sentence, int total_frames,
                          GenerationMode mode, int repeats, std::uint64_t seed) {
    if (total_frames < 1) throw ValueError("bench_latency: total_frames must be >= 1");
    if (repeats < 1) throw ValueError("bench_latency: repeats must be >= 1");

    std::vector<double> first, fps;
    for (int r = 0; r < repeats; ++r) {
        if (mode == GenerationMode::kFullDiffusion) {
            const auto start = std::chrono::steady_clock::now();
            PoseSequence seq = model.rollout(sentence, total_frames, mode, seed + r);
            const double total =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            first.push_back(total);  // nothing is available before the last step
            fps.push_back(seq.length() / total);
        } else {
            StreamStats stats = model.stream_generate(
                sentence, total_frames, [](const PoseFrame&, int) { return true; }, seed + r, mode);
            first.push_back(stats.first_frame_seconds);
            fps.push_back(stats.frames_per_second);
        }
    }
    BenchResult out;
    out.mode = mode;
    out.frames = total_frames;
    out.repeats = repeats;
    out.first_frame_latency_s = median(std::move(first));
    out.throughput_fps = median(std::move(fps));
    return out;
}

namespace {

std::vector<std::vector<double>> group_descriptors(const PoseSequence& seq,
                                                   const std::vector<int>& joints) {
    std::vector<std::vector<double>> out;
    out.reserve(seq.frames.size());
    for (const PoseFrame& frame : seq.frames) {
        std::vector<double> row;
        row.reserve(joints.size() * 2);
        for (int j : joints) {
            row.push_back(frame.keypoints[static_cast<std::size_t>(j)].x);
            row.push_back(frame.keypoints[static_cast<std::size_t>(j)].y);
        }
        out.push_back(std::move(row));
    }
    return out;
}

double group_mpjpe(const PoseSequence& pred, const PoseSequence& gt,
                   const std::vector<int>& joints) {
    double acc = 0.0;
    std::size_t count = 0;
    for (int t = 0; t < pred.length(); ++t) {
        for (int j : joints) {
            const auto& a = pred.frames[static_cast<std::size_t>(t)].keypoints[static_cast<std::size_t>(j)];
            const auto& b = gt.frames[static_cast<std::size_t>(t)].keypoints[static_cast<std::size_t>(j)];
            acc += std::hypot(a.x - b.x, a.y - b.y);
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

EvalSummary evaluate_pairs(const std::vector<PoseSequence>& pred,
                           const std::vector<PoseSequence>& gt, double gamma,
                           const Skeleton* skeleton) {
    if (pred.size() != gt.size()) {
        throw DataError("evaluate: sequence count mismatch, " + std::to_string(pred.size()) +
                        " predictions vs " + std::to_string(gt.size()) + " references");
    }
    if (pred.empty()) throw DataError("evaluate: no sequences");

    // Join by id when both sides carry unique, matching ids.
    std::vector<int> order(pred.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::map<std::string, int> gt_index;
    bool ids_usable = true;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i].id.empty() || !gt_index.emplace(gt[i].id, static_cast<int>(i)).second) {
            ids_usable = false;
            break;
        }
    }
    if (ids_usable) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            auto it = gt_index.find(pred[i].id);
            if (it == gt_index.end()) {
                ids_usable = false;
                break;
            }
            order[i] = it->second;
        }
    }
    if (!ids_usable) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    }

    EvalSummary out;
    std::map<std::string, double> group_dtw_acc, group_mpjpe_acc;
    int group_mpjpe_pairs = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const PoseSequence& p = pred[i];
        const PoseSequence& g = gt[static_cast<std::size_t>(order[i])];
        const auto pd = frame_descriptors(p);
        const auto gd = frame_descriptors(g);
        out.dtw += hard_dtw(pd, gd);
        out.soft_dtw += soft_dtw_value(pd, gd, gamma).value;
        ++out.pairs;
        if (p.length() == g.length()) {
            out.mpjpe += mpjpe(p, g);
            ++out.mpjpe_pairs;
        }
        if (skeleton) {
            for (const auto& [name, joints] : skeleton->groups) {
                group_dtw_acc[name] += hard_dtw(group_descriptors(p, joints), group_descriptors(g, joints));
            }
            if (p.length() == g.length()) {
                for (const auto& [name, joints] : skeleton->groups) {
                    group_mpjpe_acc[name] += group_mpjpe(p, g, joints);
                }
                ++group_mpjpe_pairs;
            }
        }
    }
    out.dtw /= out.pairs;
    out.soft_dtw /= out.pairs;
    if (out.mpjpe_pairs > 0) out.mpjpe /= out.mpjpe_pairs;
    for (auto& [name, v] : group_dtw_acc) out.per_group_dtw[name] = v / out.pairs;
    if (group_mpjpe_pairs > 0) {
        for (auto& [name, v] : group_mpjpe_acc) out.per_group_mpjpe[name] = v / group_mpjpe_pairs;
    }
    return out;
}

double mean_rollout_dtw(const Generator& model, const std::vector<PoseSequence>& eval_set,
                        GenerationMode mode, std::uint64_t seed) {
    if (eval_set.empty()) throw DataError("mean_rollout_dtw: empty evaluation set");
    double acc = 0.0;
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
        const PoseSequence& gt = eval_set[i];
        PoseSequence pred = model.rollout(gt.text, gt.length(), mode, seed + i);
        acc += hard_dtw(pred, gt);
    }
    return acc / static_cast<double>(eval_set.size());
}

}  // namespace signflow
