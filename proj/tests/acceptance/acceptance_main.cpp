// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "signflow/attention.hpp"
#include "signflow/bench.hpp"
#include "signflow/flow.hpp"
#include "signflow/generator.hpp"
#include "signflow/losses.hpp"
#include "signflow/synth.hpp"
#include "signflow/trainer.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace signflow;
using signflow::testing::gradcheck;
using signflow::testing::random_tensor;

namespace {

constexpr std::uint64_t kSeed = 20250809;

struct Criterion {
    int id;
    std::string name;
    bool pass = true;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Criterion> g_results;

class Check {
  public:
    Check(int id, std::string name) : c_{id, std::move(name)} {
        start_ = std::chrono::steady_clock::now();
    }
    void require(bool ok, const std::string& what) {
        if (!ok) {
            c_.pass = false;
            if (!c_.detail.empty()) c_.detail += "; ";
            c_.detail += "FAILED: " + what;
        }
    }
    void note(const std::string& what) {
        if (!c_.detail.empty()) c_.detail += "; ";
        c_.detail += what;
    }
    ~Check() {
        c_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::printf("[%2d] %s  %-28s %s  (%.1f s)\n", c_.id, c_.pass ? "PASS" : "FAIL",
                    c_.name.c_str(), c_.detail.c_str(), c_.seconds);
        std::fflush(stdout);
        g_results.push_back(c_);
    }

  private:
    Criterion c_;
    std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// Desk-scale configuration shared by the trained-model criteria: small
// enough to train on a laptop CPU in minutes, large enough that the
// articulator split and confidence pathway are exercised.
ModelConfig desk_model(int experts = 3) {
    ModelConfig m;
    m.d_model = 32;
    m.n_heads = 4;
    m.depth = 1;
    m.experts = experts;
    m.n_steps = 8;
    m.vocabulary = synth_vocabulary(8);
    m.seed = kSeed;
    m.parallel_experts = false;  // stable timing
    return m;
}

SynthConfig desk_synth() {
    SynthConfig s;
    s.vocab_size = 8;
    s.noise_sigma = 0.02;
    s.word_duration = 6;
    s.crossfade = 3;
    s.min_words = 1;
    s.max_words = 4;
    s.seed = kSeed;
    return s;
}

TrainConfig desk_train(int steps) {
    TrainConfig t;
    t.steps = steps;
    t.batch_size = 2;
    t.train_n_steps = 3;
    t.gamma = 0.1;
    t.parallel_batch = true;
    return t;
}

// ---- criterion 1: gradcheck suite ------------------------------------------

void criterion_gradcheck() {
    Check c(1, "gradcheck suite");
    RngStream rng = RngStream::derive(kSeed, "acc-gradcheck");
    double worst = 0.0;
    auto track = [&](const char* what, double err, double tol) {
        worst = std::max(worst, err);
        c.require(err < tol, std::string(what) + " rel err " + fmt(err));
    };

    for (int i = 0; i < 20; ++i) {
        // Attention including beta.
        {
            Tensor q = random_tensor({4, 4}, rng), k = random_tensor({4, 4}, rng);
            Tensor v = random_tensor({4, 4}, rng), beta = random_tensor({}, rng, -1, 1);
            std::vector<double> conf{0.2, 0.8, 0.4, 0.6};
            auto r = gradcheck(
                [&](Tape&, const std::vector<Tensor>& in) {
                    Tensor out = confidence_causal_attention(in[0], in[1], in[2], conf, in[3]);
                    return reduce_mean_all(mul(out, out));
                },
                {q, k, v, beta});
            track("attention", r.max_err, 1e-5);
        }
        // Keypoint embedding MLP.
        {
            ParamStore store(kSeed + i);
            declare_keypoint_embedding(store, 8);
            Tensor triples = random_tensor({3, 3}, rng, -1, 1);
            auto r = gradcheck(
                [&](Tape& tape, const std::vector<Tensor>& in) {
                    ParamBinding p(store, &tape);
                    p.inject("embed.in.w", in[0]);
                    p.inject("embed.out.w", in[1]);
                    Tensor e = embed_keypoints(p, in[2], 2.0, 8);
                    return reduce_mean_all(mul(e, e));
                },
                {store.values("embed.in.w"), store.values("embed.out.w"), triples});
            track("embedding", r.max_err, 1e-5);
        }
        // Expert encoder weights.
        {
            ParamStore store(kSeed + i);
            ExpertEncoder enc("f", EncoderDims{8, 2, 1});
            enc.declare(store);
            Tensor t0 = random_tensor({2, 8}, rng), t1 = random_tensor({2, 8}, rng);
            auto r = gradcheck(
                [&](Tape& tape, const std::vector<Tensor>& in) {
                    ParamBinding p(store, &tape);
                    p.inject("expert.f.block0.attn.wq", in[0]);
                    p.inject("expert.f.block0.ffn.in.w", in[1]);
                    std::vector<Tensor> seq{in[2], in[3]};
                    auto h = enc.encode_sequence(p, seq, true);
                    return reduce_mean_all(mul(h[1], h[1]));
                },
                {store.values("expert.f.block0.attn.wq"), store.values("expert.f.block0.ffn.in.w"),
                 t0, t1});
            track("experts", r.max_err, 1e-5);
        }
        // Fusion weights.
        {
            ParamStore store(kSeed + i);
            declare_fusion(store, 8);
            Tensor a = random_tensor({8}, rng), b = random_tensor({8}, rng);
            auto r = gradcheck(
                [&](Tape& tape, const std::vector<Tensor>& in) {
                    ParamBinding p(store, &tape);
                    p.inject("fusion.w", in[0]);
                    p.inject("fusion.wf", in[1]);
                    std::vector<Tensor> scales{in[2], in[3]};
                    return reduce_mean_all(mul(fuse_scales(p, scales).fused, fuse_scales(p, scales).fused));
                },
                {store.values("fusion.w"), store.values("fusion.wf"), a, b});
            track("fusion", r.max_err, 1e-5);
        }
        // Flow-matching loss.
        {
            Tensor pred = random_tensor({3, 2}, rng), target = random_tensor({3, 2}, rng);
            auto r = gradcheck(
                [](Tape&, const std::vector<Tensor>& in) { return fm_loss(in[0], in[1]); },
                {pred, target});
            track("fm_loss", r.max_err, 1e-5);
        }
        // Joint and bone losses.
        {
            Skeleton skel;
            skel.joints = 4;
            skel.bones = {{0, 1}, {1, 2}, {1, 3}};
            skel.groups = {{"pose", {0, 1, 2, 3}}};
            Tensor p0 = random_tensor({4, 2}, rng), g0 = random_tensor({4, 2}, rng);
            auto r = gradcheck(
                [&](Tape&, const std::vector<Tensor>& in) {
                    std::vector<Tensor> pred{in[0]}, gt{in[1]};
                    return add(joint_loss(pred, gt), bone_loss(pred, gt, skel));
                },
                {p0, g0});
            track("joint+bone", r.max_err, 1e-4);
        }
        // Soft-DTW through the unrolled DP.
        {
            std::vector<Tensor> yv;
            for (int t = 0; t < 4; ++t) yv.push_back(random_tensor({2}, rng, -1, 1));
            Tensor x0 = random_tensor({2}, rng, -1, 1), x1 = random_tensor({2}, rng, -1, 1);
            Tensor x2 = random_tensor({2}, rng, -1, 1), x3 = random_tensor({2}, rng, -1, 1);
            Tensor x4 = random_tensor({2}, rng, -1, 1);
            const double gamma = i % 2 ? 0.1 : 1.0;
            auto r = gradcheck(
                [&](Tape&, const std::vector<Tensor>& in) {
                    std::vector<Tensor> xs{in[0], in[1], in[2], in[3], in[4]};
                    return soft_dtw(xs, yv, gamma);
                },
                {x0, x1, x2, x3, x4});
            track("soft_dtw", r.max_err, 1e-4);
        }
    }
    c.note("20 instances per op, worst rel err " + fmt(worst));
}

// ---- criterion 2: soft-DTW oracle equivalence --------------------------------

void criterion_sdtw_oracle() {
    Check c(2, "soft-DTW oracle equivalence");
    RngStream rng = RngStream::derive(kSeed, "acc-sdtw");
    double worst = 0.0;
    for (int t1 = 1; t1 <= 5; ++t1) {
        for (int t2 = 1; t2 <= 5; ++t2) {
            for (int draw = 0; draw < 4; ++draw) {
                std::vector<std::vector<double>> x(t1, std::vector<double>(1));
                std::vector<std::vector<double>> y(t2, std::vector<double>(1));
                for (auto& f : x) f[0] = rng.uniform(-1, 1);
                for (auto& f : y) f[0] = rng.uniform(-1, 1);
                const auto d = signflow::testing::squared_cost_matrix(x, y);
                const double hard = signflow::testing::min_path_cost(d);
                const double soft = soft_dtw_value(x, y, 1e-3).value;
                worst = std::max(worst, std::fabs(soft - hard));
                c.require(std::fabs(soft - hard) < 1e-3,
                          "T1=" + std::to_string(t1) + " T2=" + std::to_string(t2) + " |soft-hard| " +
                              fmt(std::fabs(soft - hard)));
            }
        }
    }

    bool bound_ok = true;
    for (int trial = 0; trial < 10000; ++trial) {
        const int k = 1 + static_cast<int>(rng.index(6));
        const double gamma = std::exp(rng.uniform(std::log(1e-3), std::log(2.0)));
        std::vector<double> vals(static_cast<std::size_t>(k));
        double mn = 1e300;
        for (double& v : vals) {
            v = rng.uniform(-5, 5);
            mn = std::min(mn, v);
        }
        const double sm = softmin(vals, gamma);
        if (sm > mn + 1e-12 || mn - sm > gamma * std::log(static_cast<double>(k)) + 1e-12) {
            bound_ok = false;
            break;
        }
    }
    c.require(bound_ok, "softmin bound |softmin-min| <= gamma log k");
    c.note("max |soft-hard| " + fmt(worst) + " over all shapes <= 5x5; bound held for 1e4 draws");
}

// ---- criterion 3: causality ---------------------------------------------------

void criterion_causality() {
    Check c(3, "causality / prefix stability");
    // Attention-level: perturbing future keys, values or confidences leaves
    // earlier rows bit-identical.
    RngStream rng = RngStream::derive(kSeed, "acc-causal");
    const int n = 6, d = 8;
    Tensor q = random_tensor({n, d}, rng), k = random_tensor({n, d}, rng);
    Tensor v = random_tensor({n, d}, rng);
    std::vector<double> conf{0.3, 0.5, 0.7, 0.9, 0.2, 0.4};
    Tensor base = confidence_causal_attention(q, k, v, conf, Tensor::scalar(0.9));
    auto bump = [&](const Tensor& m, int from) {
        std::vector<double> data = m.to_vector();
        for (int i = from; i < n; ++i)
            for (int j = 0; j < d; ++j) data[static_cast<std::size_t>(i) * d + j] += 9.0;
        return Tensor({n, d}, data);
    };
    std::vector<double> conf2 = conf;
    for (int i = 3; i < n; ++i) conf2[static_cast<std::size_t>(i)] = 0.05;
    Tensor pert = confidence_causal_attention(q, bump(k, 3), bump(v, 3), conf2, Tensor::scalar(0.9));
    bool bit_identical = true;
    for (int t = 0; t < 3 && bit_identical; ++t)
        for (int j = 0; j < d; ++j)
            if (pert.at(t, j) != base.at(t, j)) bit_identical = false;
    c.require(bit_identical, "future K/V/conf perturbation changed earlier attention rows");

    // Rollout-level prefix stability across horizons 10 and 60, bit-exact.
    Generator model(desk_model());
    PoseSequence短 a = model.rollout("hello where eat", 10, GenerationMode::kHybrid, kSeed);
    PoseSequence b = model.rollout("hello where eat", 60, GenerationMode::kHybrid, kSeed);
    bool prefix = true;
    for (int t = 0; t < 10 && prefix; ++t) {
        for (int j = 0; j < 54; ++j) {
            const auto& ka = a.frames[t].keypoints[j];
            const auto& kb = b.frames[t].keypoints[j];
            if (ka.x != kb.x || ka.y != kb.y || ka.confidence != kb.confidence) prefix = false;
        }
    }
    c.require(prefix, "prefix frames differ between T=10 and T=60 rollouts");
    c.note("attention rows and 10-frame prefix bit-identical");
}

// ---- criterion 4: confidence-bias behaviour ------------------------------------

void criterion_confidence_bias() {
    Check c(4, "confidence-bias behaviour");
    RngStream rng = RngStream::derive(kSeed, "acc-bias");
    // beta = 0 reduces to plain causal attention within 1e-12.
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor q = random_tensor({5, 8}, rng), k = random_tensor({5, 8}, rng);
        Tensor v = random_tensor({5, 8}, rng);
        std::vector<double> conf{0.1, 0.9, 0.5, 0.3, 0.7};
        Tensor biased = confidence_causal_attention(q, k, v, conf, Tensor::scalar(0.0));
        Tensor mask = causal_mask(5);
        Tensor plain = scaled_dot_attention(q, k, v, &mask);
        for (std::size_t i = 0; i < biased.size(); ++i) {
            worst = std::max(worst, std::fabs(biased.data()[i] - plain.data()[i]));
        }
    }
    c.require(worst <= 1e-12, "beta=0 deviation " + fmt(worst));

    // beta = 1: raising one frame's mean confidence by 0.5 strictly raises its
    // weight at every query step at or after it.
    const int n = 8;
    Tensor q = random_tensor({n, 8}, rng), k = random_tensor({n, 8}, rng);
    std::vector<double> eye(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) eye[static_cast<std::size_t>(i) * n + i] = 1.0;
    Tensor identity({n, n}, eye);
    std::vector<double> conf(static_cast<std::size_t>(n), 0.3);
    const int target = 2;
    Tensor before = confidence_causal_attention(q, k, identity, conf, Tensor::scalar(1.0));
    std::vector<double> raised = conf;
    raised[target] += 0.5;
    Tensor after = confidence_causal_attention(q, k, identity, raised, Tensor::scalar(1.0));
    bool monotone = true;
    for (int t = target; t < n; ++t) {
        if (!(after.at(t, target) > before.at(t, target))) monotone = false;
    }
    c.require(monotone, "raised confidence did not increase attention weight everywhere");
    c.note("beta=0 max deviation " + fmt(worst) + "; monotonicity held at all query steps");
}

// ---- criterion 5: flow sampler ---------------------------------------------------

void criterion_flow_sampler() {
    Check c(5, "flow sampler");
    auto field = [](const Tensor& x, double) { return x; };
    double prev = -1.0;
    bool halves = true;
    std::string errs;
    for (int n : {4, 8, 16, 32}) {
        const double err = std::fabs(euler_sample(field, Tensor::scalar(1.0), n).value() - std::exp(1.0));
        errs += (errs.empty() ? "" : ", ") + fmt(err);
        if (prev > 0.0) {
            const double shrink = err / prev;
            if (!(err < prev && shrink > 0.4 && shrink < 0.6)) halves = false;
        }
        prev = err;
    }
    c.require(halves, "euler error did not halve (+-20%) per doubling: " + errs);

    RngStream rng = RngStream::derive(kSeed, "acc-flow");
    Tensor z = random_tensor({6}, rng), x0 = random_tensor({6}, rng);
    Tensor displacement = sub(x0, z);
    bool exact = true;
    for (int n : {1, 3, 8, 32}) {
        Tensor x1 = euler_sample([&](const Tensor&, double) { return displacement; }, z, n);
        for (int i = 0; i < 6; ++i) {
            if (std::fabs(x1.at(i) - x0.at(i)) > 1e-12) exact = false;
        }
    }
    c.require(exact, "perfect velocity field did not recover x0 exactly");

    double worst = 0.0;
    for (double t : {0.25, 0.5, 0.75}) {
        Tensor zz = random_tensor({5}, rng), xx = random_tensor({5}, rng);
        Tensor xt = interpolate(zz, xx, t);
        Tensor a = fm_target(zz, xx, xt, t, FlowTarget::kDisplacement);
        Tensor b = fm_target(zz, xx, xt, t, FlowTarget::kEndpointRatio);
        const double factor = (1.0 - t) / t;
        for (int i = 0; i < 5; ++i) worst = std::max(worst, std::fabs(b.at(i) - factor * a.at(i)));
    }
    c.require(worst <= 1e-12, "target proportionality deviation " + fmt(worst));
    c.note("euler errors " + errs + "; proportionality max dev " + fmt(worst));
}

// ---- criteria 6 + 9: convergence and adaptive weighting ---------------------------

struct ConvergenceOutcome {
    std::unique_ptr<Generator> model;
    std::vector<PoseSequence> dev;
    double untrained_dtw = 0.0;
    double trained_dtw = 0.0;
};

ConvergenceOutcome criterion_convergence_and_weights(int train_steps) {
    ConvergenceOutcome out;
    Skeleton skel = Skeleton::desk_default();
    auto train_set = synth_dataset(desk_synth(), skel, 200, "train");
    out.dev = synth_dataset(desk_synth(), skel, 40, "dev");

    bool lambda_ok = true;
    double first_objective = 0.0, first_total = 0.0;
    std::vector<double> last_objectives, last_totals;

    {
        Check c(6, "end-to-end convergence");
        out.model = std::make_unique<Generator>(desk_model());
        out.untrained_dtw =
            mean_rollout_dtw(*out.model, out.dev, GenerationMode::kHybrid, kSeed + 1);

        Trainer trainer(*out.model, desk_train(train_steps));
        int step_count = 0;
        trainer.run(train_set, train_steps, 0, [&](const LossReport& r) {
            double wsum = 0.0;
            for (double w : r.weights) {
                if (!(w > 0.0)) lambda_ok = false;
                wsum += w;
            }
            if (std::fabs(wsum - 1.0) > 1e-12) lambda_ok = false;
            if (r.iteration == 0) {
                first_objective = r.objective;
                first_total = r.total;
            }
            if (r.iteration >= train_steps - 50) {
                last_objectives.push_back(r.objective);
                last_totals.push_back(r.total);
            }
            if (++step_count % 200 == 0) {
                std::cerr << "  convergence: step " << step_count << "/" << train_steps
                          << " objective " << fmt(r.objective) << "\n";
            }
        });

        double tail_objective = 0.0, tail_total = 0.0;
        for (double v : last_objectives) tail_objective += v;
        for (double v : last_totals) tail_total += v;
        tail_objective /= static_cast<double>(last_objectives.size());
        tail_total /= static_cast<double>(last_totals.size());

        const double loss_ratio = tail_objective / first_objective;
        c.require(loss_ratio < 0.5, "loss ratio " + fmt(loss_ratio) + " (need < 0.5)");

        out.trained_dtw = mean_rollout_dtw(*out.model, out.dev, GenerationMode::kHybrid, kSeed + 1);
        const double dtw_ratio = out.trained_dtw / out.untrained_dtw;
        c.require(dtw_ratio < 0.6, "held-out DTW ratio " + fmt(dtw_ratio) + " (need < 0.6)");
        c.note("objective " + fmt(first_objective) + " -> " + fmt(tail_objective) + " (ratio " +
               fmt(loss_ratio) + "), trio total ratio " + fmt(tail_total / first_total) +
               "; dev DTW " + fmt(out.untrained_dtw) + " -> " + fmt(out.trained_dtw) + " (ratio " +
               fmt(dtw_ratio) + "), " + std::to_string(train_steps) + " steps");
    }

    {
        Check c(9, "adaptive weighting");
        c.require(lambda_ok, "some iteration had lambda off the simplex");

        // A sustained 10x spike in one loss drags its weight down monotonically.
        EmaState state;
        std::vector<double> base{0.5, 0.5, 0.5};
        state = ema_update(state, base);
        double prev = adaptive_weights(state)[1];
        bool monotone = true;
        std::vector<double> spiked{0.5, 5.0, 0.5};
        for (int step = 0; step < 25; ++step) {
            state = ema_update(state, spiked);
            const double w = adaptive_weights(state)[1];
            if (!(w < prev)) monotone = false;
            prev = w;
        }
        c.require(monotone, "spiked loss weight did not fall monotonically");
        c.note("lambda on the simplex for every training iteration; spike weight fell 25/25 steps");
    }
    return out;
}

// ---- criteria 7 + 8: mode ordering and latency -------------------------------------

void criterion_mode_ordering(const ConvergenceOutcome& converged) {
    const Generator& model = *converged.model;
    const std::string sentence = "hello where eat drink";

    {
        Check c(7, "mode ordering");
        const double hybrid_dtw =
            mean_rollout_dtw(model, converged.dev, GenerationMode::kHybrid, kSeed + 2);
        const double ar_dtw =
            mean_rollout_dtw(model, converged.dev, GenerationMode::kPureAr, kSeed + 2);
        c.require(hybrid_dtw < ar_dtw,
                  "hybrid DTW " + fmt(hybrid_dtw) + " not below pure_ar " + fmt(ar_dtw));

        BenchResult hybrid = bench_latency(model, sentence, 60, GenerationMode::kHybrid, 5, kSeed);
        BenchResult diffusion =
            bench_latency(model, sentence, 60, GenerationMode::kFullDiffusion, 3, kSeed);
        const double factor = diffusion.first_frame_latency_s / hybrid.first_frame_latency_s;
        c.require(factor > 3.0, "first-frame latency factor " + fmt(factor) + " (need > 3)");
        c.note("DTW hybrid " + fmt(hybrid_dtw) + " < pure_ar " + fmt(ar_dtw) +
               "; first-frame hybrid " + fmt(hybrid.first_frame_latency_s) + "s vs joint " +
               fmt(diffusion.first_frame_latency_s) + "s (x" + fmt(factor) + ")");
    }

    {
        Check c(8, "first-frame latency independence");
        BenchResult h10 = bench_latency(model, sentence, 10, GenerationMode::kHybrid, 7, kSeed);
        BenchResult h60 = bench_latency(model, sentence, 60, GenerationMode::kHybrid, 7, kSeed);
        const double hybrid_ratio = h60.first_frame_latency_s / h10.first_frame_latency_s;
        c.require(hybrid_ratio >= 0.8 && hybrid_ratio <= 1.2,
                  "hybrid latency ratio " + fmt(hybrid_ratio) + " outside [0.8, 1.2]");

        BenchResult d10 = bench_latency(model, sentence, 10, GenerationMode::kFullDiffusion, 3, kSeed);
        BenchResult d60 = bench_latency(model, sentence, 60, GenerationMode::kFullDiffusion, 3, kSeed);
        const double diffusion_ratio = d60.first_frame_latency_s / d10.first_frame_latency_s;
        c.require(diffusion_ratio > 3.0,
                  "joint-denoising latency ratio " + fmt(diffusion_ratio) + " (need > 3)");
        c.note("hybrid T60/T10 " + fmt(hybrid_ratio) + "; joint T60/T10 " + fmt(diffusion_ratio));
    }
}

// ---- criterion 10: expert-count ablation ---------------------------------------------

void criterion_expert_ablation(int ablation_steps) {
    Check c(10, "expert-count ablation");
    Skeleton skel = Skeleton::desk_default();
    auto train_set = synth_dataset(desk_synth(), skel, 200, "train");
    auto dev = synth_dataset(desk_synth(), skel, 12, "dev");

    std::map<int, double> dtw_by_experts;
    for (int experts : {1, 3, 4}) {
        Generator model(desk_model(experts));
        Trainer trainer(model, desk_train(ablation_steps));
        int step_count = 0;
        trainer.run(train_set, ablation_steps, 0, [&](const LossReport&) {
            if (++step_count % 200 == 0) {
                std::cerr << "  ablation(" << experts << " experts): step " << step_count << "/"
                          << ablation_steps << "\n";
            }
        });
        // The full mode grid must run to completion on every variant.
        for (GenerationMode mode :
             {GenerationMode::kHybrid, GenerationMode::kFullDiffusion, GenerationMode::kPureAr}) {
            BenchResult b = bench_latency(model, dev.front().text, 12, mode, 1, kSeed);
            if (!(b.first_frame_latency_s > 0.0)) {
                c.require(false, "bench run produced no timing for mode " + to_string(mode));
            }
        }
        dtw_by_experts[experts] = mean_rollout_dtw(model, dev, GenerationMode::kHybrid, kSeed + 3);
    }
    c.require(dtw_by_experts[3] <= dtw_by_experts[1],
              "3-expert DTW " + fmt(dtw_by_experts[3]) + " exceeds 1-expert " +
                  fmt(dtw_by_experts[1]));
    c.note("DTW: 1-expert " + fmt(dtw_by_experts[1]) + ", 3-expert " + fmt(dtw_by_experts[3]) +
           ", 4-expert " + fmt(dtw_by_experts[4]) + " (4-vs-3 reported, not asserted); " +
           std::to_string(ablation_steps) + " steps each");
}

}  // namespace

int main(int argc, char** argv) {
    int train_steps = 2000;
    int ablation_steps = 700;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--quick") {  // development shortcut, not the acceptance gate
            train_steps = 120;
            ablation_steps = 60;
        }
    }

    criterion_gradcheck();
    criterion_sdtw_oracle();
    criterion_causality();
    criterion_confidence_bias();
    criterion_flow_sampler();
    ConvergenceOutcome converged = criterion_convergence_and_weights(train_steps);
    criterion_mode_ordering(converged);
    criterion_expert_ablation(ablation_steps);

    int failed = 0;
    for (const Criterion& c : g_results) failed += c.pass ? 0 : 1;
    std::printf("%d/%d criteria passed\n", static_cast<int>(g_results.size()) - failed,
                static_cast<int>(g_results.size()));
    return failed == 0 ? 0 : 1;
}
