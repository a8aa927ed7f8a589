#include <doctest.h>

#include <cmath>

#include "signflow/attention.hpp"
#include "signflow/error.hpp"
#include "support/gradcheck.hpp"

using namespace signflow;
using signflow::testing::gradcheck;
using signflow::testing::random_tensor;

namespace {

// With V = I_m the attention output rows are exactly the weight rows.
Tensor identity(int n) {
    std::vector<double> data(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) data[static_cast<std::size_t>(i) * n + i] = 1.0;
    return Tensor({n, n}, std::move(data));
}

MhaParams tiny_mha(int d, RngStream& rng) {
    MhaParams p;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    p.wq = random_tensor({d, d}, rng, -s, s);
    p.wk = random_tensor({d, d}, rng, -s, s);
    p.wv = random_tensor({d, d}, rng, -s, s);
    p.wo = random_tensor({d, d}, rng, -s, s);
    p.bq = Tensor::zeros({d});
    p.bk = Tensor::zeros({d});
    p.bv = Tensor::zeros({d});
    p.bo = Tensor::zeros({d});
    return p;
}

}  // namespace

TEST_SUITE_BEGIN("attention");

TEST_CASE("causal mask shape and entries") {
    CHECK_THROWS_AS(causal_mask(0), ValueError);
    Tensor m1 = causal_mask(1);
    CHECK(m1.at(0, 0) == 0.0);

    Tensor m2 = causal_mask(2);
    CHECK(m2.at(0, 0) == 0.0);
    CHECK(m2.at(0, 1) == kMaskNegInf);
    CHECK(m2.at(1, 0) == 0.0);
    CHECK(m2.at(1, 1) == 0.0);

    Tensor m3 = causal_mask(3);
    for (int j = 0; j < 3; ++j) CHECK(m3.at(2, j) == 0.0);
}

TEST_CASE("masked softmax weights are exactly zero") {
    Tensor q({2, 2}, {0.3, -0.7, 1.1, 0.4});
    Tensor k = q;
    Tensor mask = causal_mask(2);
    Tensor w = scaled_dot_attention(q, k, identity(2), &mask);
    CHECK(w.at(0, 1) == 0.0);  // future key blocked, exact zero after underflow
    CHECK(w.at(0, 0) == 1.0);
    CHECK(w.at(1, 0) + w.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single key returns the value row regardless of contents") {
    Tensor q({1, 3}, {42.0, -3.0, 0.5});
    Tensor k({1, 3}, {-1.0, 2.0, 9.0});
    Tensor v({1, 3}, {0.25, 0.5, 0.75});
    Tensor out = scaled_dot_attention(q, k, v);
    CHECK(out.at(0, 0) == doctest::Approx(0.25));
    CHECK(out.at(0, 1) == doctest::Approx(0.5));
    CHECK(out.at(0, 2) == doctest::Approx(0.75));
}

TEST_CASE("identity Q=K=V unmasked matches direct evaluation") {
    Tensor i2 = identity(2);
    Tensor out = scaled_dot_attention(i2, i2, i2);
    const double s = 1.0 / std::sqrt(2.0);
    const double w_self = std::exp(s) / (std::exp(s) + 1.0);
    const double w_other = 1.0 / (std::exp(s) + 1.0);
    CHECK(out.at(0, 0) == doctest::Approx(w_self).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(w_other).epsilon(1e-12));
    CHECK(out.at(1, 0) == doctest::Approx(w_other).epsilon(1e-12));
    CHECK(out.at(1, 1) == doctest::Approx(w_self).epsilon(1e-12));
}

TEST_CASE("Q/K width mismatch raises") {
    Tensor q({1, 3}, {1, 2, 3});
    Tensor k({1, 2}, {1, 2});
    CHECK_THROWS_AS(scaled_dot_attention(q, k, k), ShapeError);
}

TEST_CASE("frame mean confidence") {
    std::vector<double> ones{1.0, 1.0, 1.0};
    CHECK(frame_mean_confidence(ones) == 1.0);
    std::vector<double> pair{0.0, 1.0};
    CHECK(frame_mean_confidence(pair) == doctest::Approx(0.5));
    std::vector<double> trio{0.2, 0.4, 0.9};
    CHECK(frame_mean_confidence(trio) == doctest::Approx(0.5));
    CHECK_THROWS_AS(frame_mean_confidence(std::vector<double>{}), ValueError);
    std::vector<double> bad{0.5, 1.2};
    CHECK_THROWS_AS(frame_mean_confidence(bad), ValueError);
}

TEST_CASE("beta zero reduces to plain causal attention") {
    RngStream rng = RngStream::derive(21, "attn-beta0");
    for (int trial = 0; trial < 10; ++trial) {
        Tensor q = random_tensor({4, 6}, rng);
        Tensor k = random_tensor({4, 6}, rng);
        Tensor v = random_tensor({4, 6}, rng);
        std::vector<double> conf{0.1, 0.6, 0.9, 0.3};
        Tensor biased = confidence_causal_attention(q, k, v, conf, Tensor::scalar(0.0));
        Tensor mask = causal_mask(4);
        Tensor plain = scaled_dot_attention(q, k, v, &mask);
        for (std::size_t i = 0; i < biased.size(); ++i) {
            CHECK(std::fabs(biased.data()[i] - plain.data()[i]) <= 1e-12);
        }
    }
}

TEST_CASE("first row has weight one on the only visible key") {
    RngStream rng = RngStream::derive(22, "attn-t1");
    Tensor q = random_tensor({3, 4}, rng);
    Tensor k = random_tensor({3, 4}, rng);
    std::vector<double> conf{0.05, 0.95, 0.5};
    Tensor w = confidence_causal_attention(q, k, identity(3), conf, Tensor::scalar(2.5));
    CHECK(w.at(0, 0) == 1.0);
    CHECK(w.at(0, 1) == 0.0);
    CHECK(w.at(0, 2) == 0.0);
}

TEST_CASE("equal logits with conf (0, 1) and beta 1 give the logistic split") {
    Tensor q = Tensor::zeros({2, 2});
    Tensor k = Tensor::zeros({2, 2});
    std::vector<double> conf{0.0, 1.0};
    Tensor w = confidence_causal_attention(q, k, identity(2), conf, Tensor::scalar(1.0));
    const double e = std::exp(1.0);
    CHECK(w.at(1, 0) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
    CHECK(w.at(1, 1) == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
    CHECK(w.at(1, 0) == doctest::Approx(0.2689).epsilon(1e-3));
    CHECK(w.at(1, 1) == doctest::Approx(0.7311).epsilon(1e-3));
}

TEST_CASE("causality: future perturbations leave earlier rows bit-identical") {
    RngStream rng = RngStream::derive(23, "attn-causal");
    const int n = 5, d = 4;
    Tensor q = random_tensor({n, d}, rng);
    Tensor k = random_tensor({n, d}, rng);
    Tensor v = random_tensor({n, d}, rng);
    std::vector<double> conf{0.2, 0.4, 0.6, 0.8, 1.0};
    Tensor base = confidence_causal_attention(q, k, v, conf, Tensor::scalar(0.7));

    const int s = 3;  // perturb everything at timesteps >= s
    auto bump_rows = [&](const Tensor& m) {
        std::vector<double> data = m.to_vector();
        for (int i = s; i < n; ++i)
            for (int j = 0; j < d; ++j) data[static_cast<std::size_t>(i) * d + j] += 17.0;
        return Tensor({n, d}, data);
    };
    std::vector<double> conf2 = conf;
    for (int i = s; i < n; ++i) conf2[static_cast<std::size_t>(i)] = 0.01;
    Tensor pert = confidence_causal_attention(q, bump_rows(k), bump_rows(v), conf2, Tensor::scalar(0.7));
    for (int t = 0; t < s; ++t)
        for (int j = 0; j < d; ++j) CHECK(pert.at(t, j) == base.at(t, j));
}

TEST_CASE("monotonicity: raising one confidence raises its weight at every later query") {
    RngStream rng = RngStream::derive(24, "attn-mono");
    const int n = 6, d = 4;
    Tensor q = random_tensor({n, d}, rng);
    Tensor k = random_tensor({n, d}, rng);
    std::vector<double> conf{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
    const int target = 2;
    Tensor before = confidence_causal_attention(q, k, identity(n), conf, Tensor::scalar(1.0));
    std::vector<double> boosted = conf;
    boosted[target] = 0.8;
    Tensor after = confidence_causal_attention(q, k, identity(n), boosted, Tensor::scalar(1.0));
    for (int t = target; t < n; ++t) {
        CHECK(after.at(t, target) > before.at(t, target));
        for (int s = 0; s <= t; ++s) {
            if (s != target) CHECK(after.at(t, s) < before.at(t, s));
        }
    }
}

TEST_CASE("attention weight rows sum to one") {
    RngStream rng = RngStream::derive(25, "attn-rows");
    const int n = 7;
    Tensor q = random_tensor({n, 8}, rng);
    Tensor k = random_tensor({n, 8}, rng);
    std::vector<double> conf(n, 0.5);
    for (int i = 0; i < n; ++i) conf[static_cast<std::size_t>(i)] = 0.1 + 0.1 * i;
    Tensor w = confidence_causal_attention(q, k, identity(n), conf, Tensor::scalar(1.3));
    for (int t = 0; t < n; ++t) {
        double sum = 0.0;
        for (int s = 0; s < n; ++s) sum += w.at(t, s);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gradient of loss w.r.t. beta matches finite differences") {
    RngStream rng = RngStream::derive(26, "attn-beta-grad");
    for (int trial = 0; trial < 20; ++trial) {
        Tensor q = random_tensor({4, 4}, rng);
        Tensor k = random_tensor({4, 4}, rng);
        Tensor v = random_tensor({4, 4}, rng);
        Tensor beta = random_tensor({}, rng, -1.0, 1.0);
        std::vector<double> conf{0.2, 0.9, 0.4, 0.7};
        auto report = gradcheck(
            [&](Tape&, const std::vector<Tensor>& in) {
                Tensor out = confidence_causal_attention(in[0], in[1], in[2], conf, in[3]);
                return reduce_mean_all(mul(out, out));
            },
            {q, k, v, beta});
        CHECK(report.max_err < 1e-5);
    }
}

TEST_CASE("frame causal mask blocks future frames across token groups") {
    std::vector<int> qf{1, 1, 2};
    std::vector<int> kf{1, 2, 3};
    Tensor m = frame_causal_mask(qf, kf);
    CHECK(m.at(0, 0) == 0.0);
    CHECK(m.at(0, 1) == kMaskNegInf);
    CHECK(m.at(2, 1) == 0.0);
    CHECK(m.at(2, 2) == kMaskNegInf);
}

TEST_CASE("multi-head attention matches prekv path and gradchecks") {
    RngStream rng = RngStream::derive(27, "attn-mha");
    const int d = 8, heads = 2;
    MhaParams p = tiny_mha(d, rng);
    Tensor q_in = random_tensor({3, d}, rng);
    Tensor kv_in = random_tensor({5, d}, rng);

    Tensor direct = multi_head_attention(p, q_in, kv_in, heads);
    Tensor k = mha_project_k(p, kv_in);
    Tensor v = mha_project_v(p, kv_in);
    Tensor prekv = multi_head_attention_prekv(p, q_in, k, v, heads);
    for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct.data()[i] == prekv.data()[i]);

    std::vector<double> conf{0.1, 0.3, 0.5, 0.7, 0.9};
    for (int trial = 0; trial < 5; ++trial) {
        Tensor beta = random_tensor({}, rng, -0.5, 0.5);
        auto report = gradcheck(
            [&](Tape&, const std::vector<Tensor>& in) {
                MhaParams lp = p;
                lp.wq = in[0];
                lp.wo = in[1];
                Tensor out = multi_head_attention(lp, in[2], in[3], heads, nullptr, conf, &in[4]);
                return reduce_mean_all(mul(out, out));
            },
            {p.wq, p.wo, q_in, kv_in, beta});
        CHECK(report.max_err < 1e-5);
    }
}

TEST_SUITE_END();
