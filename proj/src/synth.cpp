#include "signflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "signflow/error.hpp"
#include "signflow/rng.hpp"

namespace signflow {

void SynthConfig::validate() const {
    if (vocab_size < 2) throw ConfigError("synth: vocab_size must be >= 2");
    if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
    if (word_duration < 4) throw ConfigError("synth: word_duration must be >= 4");
    if (crossfade < 0 || crossfade >= word_duration) {
        throw ConfigError("synth: crossfade must lie in [0, word_duration)");
    }
    if (min_words < 1 || max_words < min_words) throw ConfigError("synth: bad sentence length range");
}

std::vector<std::string> synth_vocabulary(int vocab_size) {
    static const std::vector<std::string> kWords{
        "hello", "thanks", "yes",  "no",    "help",  "where", "eat",   "drink",
        "home",  "friend", "work", "learn", "happy", "tired", "today", "tomorrow"};
    if (vocab_size < 2 || vocab_size > static_cast<int>(kWords.size())) {
        throw ConfigError("synth: vocab_size must lie in [2, " + std::to_string(kWords.size()) + "]");
    }
    return {kWords.begin(), kWords.begin() + vocab_size};
}

namespace {

// Fixed base pose, well inside [-1, 1]^2: face landmarks on a small circle,
// an upright torso, hands hanging near the wrists.
Keypoint base_pose(int joint) {
    double x = 0.0, y = 0.0;
    if (joint < 12) {  // face circle, radius 0.12 around (0, 0.62)
        const double ang = 2.0 * M_PI * joint / 12.0;
        x = 0.12 * std::cos(ang);
        y = 0.62 + 0.12 * std::sin(ang);
    } else if (joint < 20) {  // body
        switch (joint) {
            case 12: x = 0.0; y = 0.42; break;        // neck
            case 13: x = -0.24; y = 0.38; break;      // shoulders
            case 14: x = 0.24; y = 0.38; break;
            case 15: x = -0.34; y = 0.12; break;      // elbows
            case 16: x = 0.34; y = 0.12; break;
            case 17: x = -0.36; y = -0.10; break;     // wrists
            case 18: x = 0.36; y = -0.10; break;
            case 19: x = 0.0; y = -0.35; break;       // pelvis
        }
    } else {  // hands: root at the wrist, fingers fanning downward
        const bool left = joint < 37;
        const int local = left ? joint - 20 : joint - 37;
        const double cx = left ? -0.38 : 0.38;
        const double cy = -0.16;
        if (local == 0) {
            x = cx;
            y = cy;
        } else {
            const int finger = (local - 1) / 4;
            const int seg = (local - 1) % 4;
            const double spread = (finger - 1.5) * 0.035;
            x = cx + spread * (left ? 1.0 : -1.0);
            y = cy - 0.035 * (seg + 1);
        }
    }
    return Keypoint{x, y, 1.0};
}

}  // namespace

Keypoint MotionPrimitive::joint_at(int joint, double u, const Skeleton&) const {
    Keypoint base = base_pose(joint);
    const double w = 2.0 * M_PI * frequency * u + phase;
    double ax = 0.0, ay = 0.0;
    if (joint >= 20) {
        // Hands sweep an arc; the two hands mirror each other.
        const double side = joint < 37 ? 1.0 : -1.0;
        const double jitter = 0.15 * std::sin(0.9 * joint + phase);
        ax = hand_amp * std::sin(w + side * 0.5 + jitter);
        ay = hand_amp * std::cos(w * 0.5 + side + jitter);
    } else if (joint >= 12) {
        ax = body_amp * std::sin(w * 0.5 + 0.3 * joint);
        ay = 0.4 * body_amp * std::sin(w * 0.25 + joint);
    } else {
        ax = face_amp * std::sin(w + joint);
        ay = face_amp * std::cos(w * 0.5 + 0.7 * joint);
    }
    base.x += ax;
    base.y += ay;
    return base;
}

MotionPrimitive primitive_for_word(int word_index, const SynthConfig& config) {
    config.validate();
    MotionPrimitive p;
    p.word = synth_vocabulary(config.vocab_size)[static_cast<std::size_t>(word_index)];
    p.duration = config.word_duration;
    RngStream rng = RngStream::derive(0x51f10e57ULL, "primitive", static_cast<std::uint64_t>(word_index));
    p.frequency = 0.75 + 0.5 * word_index;
    p.phase = rng.uniform(0.0, 2.0 * M_PI);
    p.hand_amp = 0.12 + 0.05 * rng.uniform();
    p.face_amp = 0.02 + 0.02 * rng.uniform();
    p.body_amp = 0.03 + 0.03 * rng.uniform();
    return p;
}

std::vector<PoseSequence> synth_dataset(const SynthConfig& config, const Skeleton& skeleton,
                                        int count, const std::string& split) {
    config.validate();
    skeleton.validate();
    if (skeleton.joints != 54) {
        throw ConfigError("synth: primitives are defined for the 54-joint skeleton");
    }
    if (count < 0) throw ConfigError("synth: count must be >= 0");
    const auto vocab = synth_vocabulary(config.vocab_size);

    std::vector<PoseSequence> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int idx = 0; idx < count; ++idx) {
        RngStream rng = RngStream::derive(config.seed, "synth-" + split, static_cast<std::uint64_t>(idx));
        const int words = config.min_words +
                          static_cast<int>(rng.index(static_cast<std::uint64_t>(
                              config.max_words - config.min_words + 1)));
        std::vector<int> word_ids;
        std::string text;
        std::vector<MotionPrimitive> prims;
        for (int wpos = 0; wpos < words; ++wpos) {
            const int wid = static_cast<int>(rng.index(static_cast<std::uint64_t>(config.vocab_size)));
            word_ids.push_back(wid);
            text += (wpos ? " " : "") + vocab[static_cast<std::size_t>(wid)];
            prims.push_back(primitive_for_word(wid, config));
        }

        const int total = words * config.word_duration - (words - 1) * config.crossfade;
        PoseSequence seq;
        seq.id = split + "-" + std::to_string(idx);
        seq.text = text;
        seq.fps = config.fps;
        seq.frames.reserve(static_cast<std::size_t>(total));

        for (int frame = 0; frame < total; ++frame) {
            PoseFrame pf;
            pf.keypoints.reserve(static_cast<std::size_t>(skeleton.joints));
            for (int joint = 0; joint < skeleton.joints; ++joint) {
                // Blend the (at most two) primitives covering this frame.
                double x = 0.0, y = 0.0, weight = 0.0;
                for (int wpos = 0; wpos < words; ++wpos) {
                    const int start = wpos * (config.word_duration - config.crossfade);
                    const int local = frame - start;
                    if (local < 0 || local >= config.word_duration) continue;
                    double lambda = 1.0;
                    if (wpos > 0 && local < config.crossfade) {
                        lambda = (local + 1.0) / (config.crossfade + 1.0);
                    }
                    if (wpos + 1 < words && local >= config.word_duration - config.crossfade) {
                        const int into = local - (config.word_duration - config.crossfade);
                        lambda = std::min(lambda, 1.0 - (into + 1.0) / (config.crossfade + 1.0));
                    }
                    const double u = config.word_duration > 1
                                         ? static_cast<double>(local) / (config.word_duration - 1)
                                         : 0.0;
                    const Keypoint k =
                        prims[static_cast<std::size_t>(wpos)].joint_at(joint, u, skeleton);
                    x += lambda * k.x;
                    y += lambda * k.y;
                    weight += lambda;
                }
                x /= weight;
                y /= weight;

                const double nx = config.noise_sigma * rng.gaussian();
                const double ny = config.noise_sigma * rng.gaussian();
                const double conf =
                    std::clamp(1.0 - config.confidence_kappa * std::hypot(nx, ny), 0.0, 1.0);
                pf.keypoints.push_back(Keypoint{x + nx, y + ny, conf});
            }
            seq.frames.push_back(std::move(pf));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<std::vector<double>> frame_descriptors(const PoseSequence& seq) {
    std::vector<std::vector<double>> out;
    out.reserve(seq.frames.size());
    for (const PoseFrame& frame : seq.frames) {
        std::vector<double> row;
        row.reserve(frame.keypoints.size() * 2);
        for (const Keypoint& k : frame.keypoints) {
            row.push_back(k.x);
            row.push_back(k.y);
        }
        out.push_back(std::move(row));
    }
    return out;
}

double hard_dtw(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y) {
    if (x.empty() || y.empty()) throw ValueError("hard_dtw: empty sequence");
    const std::size_t n = x.size(), m = y.size(), w = x[0].size();
    for (const auto& f : x) {
        if (f.size() != w) throw ShapeError("hard_dtw: ragged descriptors in x");
    }
    for (const auto& f : y) {
        if (f.size() != w) throw ShapeError("hard_dtw: descriptor width mismatch");
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> r(n + 1, std::vector<double>(m + 1, inf));
    r[0][0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            double cost = 0.0;
            for (std::size_t k = 0; k < w; ++k) {
                const double d = x[i - 1][k] - y[j - 1][k];
                cost += d * d;
            }
            r[i][j] = cost + std::min({r[i - 1][j], r[i][j - 1], r[i - 1][j - 1]});
        }
    }
    return r[n][m];
}

double hard_dtw(const PoseSequence& x, const PoseSequence& y) {
    return hard_dtw(frame_descriptors(x), frame_descriptors(y));
}

double mpjpe(const PoseSequence& pred, const PoseSequence& gt) {
    if (pred.length() != gt.length()) {
        throw ShapeError("mpjpe: sequence lengths differ, " + std::to_string(pred.length()) +
                         " vs " + std::to_string(gt.length()));
    }
    if (pred.length() == 0) throw ValueError("mpjpe: empty sequences");
    double acc = 0.0;
    std::size_t joints = 0;
    for (int t = 0; t < pred.length(); ++t) {
        const auto& pf = pred.frames[static_cast<std::size_t>(t)];
        const auto& gf = gt.frames[static_cast<std::size_t>(t)];
        if (pf.joint_count() != gf.joint_count()) {
            throw ShapeError("mpjpe: joint counts differ at frame " + std::to_string(t));
        }
        for (int j = 0; j < pf.joint_count(); ++j) {
            const auto& a = pf.keypoints[static_cast<std::size_t>(j)];
            const auto& b = gf.keypoints[static_cast<std::size_t>(j)];
            acc += std::hypot(a.x - b.x, a.y - b.y);
            ++joints;
        }
    }
    return acc / static_cast<double>(joints);
}

}  // namespace signflow
