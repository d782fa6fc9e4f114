#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "sdci/loss.hpp"
#include "sdci/model.hpp"
#include "sdci/simulators.hpp"

using namespace sdci;

namespace {

TimeSeriesSample random_sample(std::size_t N, std::size_t T, std::size_t D, std::size_t K,
                               std::size_t n_e, Regime regime, std::uint64_t seed) {
    RngStream rng(seed);
    TimeSeriesSample s;
    s.T = T;
    s.N = N;
    s.D = D;
    s.regime = regime;
    s.graph = sample_state_graph(N, K, n_e, 0.5, rng);
    s.p.resize(T * N * D);
    for (auto& v : s.p) v = rng.normal();
    s.s.resize(T * N);
    for (auto& v : s.s)
        v = static_cast<std::uint8_t>(K == 1 ? 0 : rng.uniform_int(0, int(K) - 1));
    return s;
}

TimeSeriesSample linear_sample(std::uint64_t seed, std::size_t N = 3, std::size_t T = 40,
                               std::size_t K = 2) {
    RngStream rng(seed);
    StateGraph g = sample_state_graph(N, K, 2, 0.5, rng);
    LinearWorld world;
    world.alpha = 1.0;
    world.beta = {0.0, 0.05};
    return linear_rollout(g, world, {}, T, Regime::observed_independent, rng);
}

ModelShape linear_shape(std::size_t N = 3, std::size_t T = 40, std::size_t K = 2) {
    ModelShape s;
    s.variant = "static";
    s.decoder = "fixed_linear";
    s.regime = Regime::observed_independent;
    s.N = N;
    s.T = T;
    s.D = 1;
    s.K_data = K;
    s.K_model = K;
    s.n_edge_types = 2;
    s.hidden = 16;
    s.dec_hidden = 16;
    s.normalization = true;
    s.states_in_input = true;
    return s;
}

std::vector<Tensor<double>> all_params(SdciModel<double>& m) {
    std::vector<Tensor<double>> out;
    for (auto& [name, t] : m.params()) out.push_back(t);
    return out;
}

std::size_t pair_row(std::size_t i, std::size_t j, std::size_t N) {
    return i * (N - 1) + (j > i ? j - 1 : j);
}

} // namespace

TEST_CASE("posterior logits: one row per ordered pair, one column per state and type") {
    std::size_t N = 4, T = 8, K = 2, n_e = 3;
    auto s0 = random_sample(N, T, 1, K, n_e, Regime::observed_independent, 1);
    auto s1 = random_sample(N, T, 1, K, n_e, Regime::observed_independent, 2);
    auto batch = build_batch<double>({&s0, &s1}, true);

    ModelShape shape = linear_shape(N, T, K);
    shape.n_edge_types = n_e;
    shape.decoder = "learned";

    for (const char* variant : {"static", "temporal"}) {
        shape.variant = variant;
        SdciModel<double> model(shape, 7);
        Tensor<double> logits = model.encode(batch);
        CHECK(logits.shape() == Shape{2 * N * (N - 1), K * n_e});
        CHECK(all_finite(logits));
    }
}

TEST_CASE("encoder output is equivariant to object relabeling") {
    std::size_t N = 4, T = 6, K = 2;
    auto base = random_sample(N, T, 1, K, 2, Regime::observed_independent, 11);

    std::vector<std::size_t> perm{1, 3, 0, 2}; // new index a holds old object perm[a]
    TimeSeriesSample moved = base;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t a = 0; a < N; ++a) {
            moved.p[(t * N + a)] = base.pos(t, perm[a], 0);
            moved.s[t * N + a] = base.state(t, perm[a]);
        }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = 0; b < N; ++b)
                moved.graph.g[(k * N + a) * N + b] = base.graph.at(k, perm[a], perm[b]);

    auto batch1 = build_batch<double>({&base}, true);
    auto batch2 = build_batch<double>({&moved}, true);

    ModelShape shape = linear_shape(N, T, K);
    shape.decoder = "learned";
    for (const char* variant : {"static", "temporal"}) {
        shape.variant = variant;
        SdciModel<double> model(shape, 3);
        Tensor<double> l1 = model.encode(batch1);
        Tensor<double> l2 = model.encode(batch2);
        std::size_t C = l1.cols();
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = 0; b < N; ++b) {
                if (a == b) continue;
                std::size_t r2 = pair_row(a, b, N);
                std::size_t r1 = pair_row(perm[a], perm[b], N);
                for (std::size_t c = 0; c < C; ++c) {
                    INFO(variant, ": pair (", a, ",", b, ") col ", c);
                    CHECK(l2.data()[r2 * C + c] ==
                          doctest::Approx(l1.data()[r1 * C + c]).epsilon(1e-10));
                }
            }
    }
}

TEST_CASE("same seed builds bit-identical models") {
    auto s0 = random_sample(4, 6, 1, 2, 2, Regime::observed_independent, 5);
    auto batch = build_batch<float>({&s0}, true);
    ModelShape shape = linear_shape(4, 6, 2);
    shape.decoder = "learned";
    SdciModel<float> a(shape, 42), b(shape, 42);
    auto pa = a.params().begin();
    for (auto& [name, t] : b.params()) {
        CHECK(pa->first == name);
        CHECK(std::equal(t.data().begin(), t.data().end(), pa->second.data().begin()));
        ++pa;
    }
    Tensor<float> la = a.encode(batch), lb = b.encode(batch);
    CHECK(std::equal(la.data().begin(), la.data().end(), lb.data().begin()));

    SdciModel<float> c(shape, 43);
    Tensor<float> lc = c.encode(batch);
    CHECK(!std::equal(la.data().begin(), la.data().end(), lc.data().begin()));
}

TEST_CASE("single-state posterior on multi-state data (broadcast baseline)") {
    std::size_t N = 3, T = 10, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::observed_independent, 9);
    auto batch = build_batch<double>({&s0}, true);
    ModelShape shape = linear_shape(N, T, K);
    shape.K_model = 1;
    shape.decoder = "learned";
    SdciModel<double> model(shape, 1);
    Tensor<double> logits = model.encode(batch);
    CHECK(logits.shape() == Shape{N * (N - 1), 2});
    RngStream rng(4);
    auto out = model.forward(batch, rng, false, 10);
    CHECK(out.assignments.size() == 1);
    CHECK(out.preds.size() == T - 1);
}

TEST_CASE("truth-initialized frozen decoder reproduces the generator") {
    std::size_t N = 3, T = 40, K = 2;
    std::vector<TimeSeriesSample> samples;
    std::vector<const TimeSeriesSample*> ptrs;
    for (std::uint64_t i = 0; i < 4; ++i) samples.push_back(linear_sample(100 + i, N, T, K));
    for (auto& s : samples) ptrs.push_back(&s);
    auto batch = build_batch<double>(ptrs, true);

    ModelShape shape = linear_shape(N, T, K);
    shape.alpha_init = 1.0;
    shape.beta_init = {0.05};
    SdciModel<double> model(shape, 77);
    auto truth = truth_assignments(batch, K);

    // teacher forcing every step: each prediction is one exact transition
    ModelOutput<double> one_step;
    model.rollout(batch, truth, 1, one_step);
    double worst = 0;
    for (std::size_t t = 0; t + 1 < T; ++t)
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            double d = one_step.preds[t].data()[r] - batch.frames[t + 1].data()[r];
            worst = std::max(worst, d * d);
        }
    CHECK(worst < 1e-12);

    // free run from the first frame: error may compound but stays tiny
    ModelOutput<double> free_run;
    model.rollout(batch, truth, T, free_run);
    double mse = 0;
    std::size_t count = 0;
    for (std::size_t t = 0; t + 1 < T; ++t)
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            double d = free_run.preds[t].data()[r] - batch.frames[t + 1].data()[r];
            mse += d * d;
            ++count;
        }
    CHECK(mse / double(count) < 1e-10);
}

TEST_CASE("all-birth-type edges with unit self-weight leave the signal unchanged") {
    std::size_t N = 3, T = 12, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::observed_independent, 21);
    auto batch = build_batch<double>({&s0}, true);
    ModelShape shape = linear_shape(N, T, K);
    shape.alpha_init = 1.0;
    shape.beta_init = {0.0};
    SdciModel<double> model(shape, 5);

    std::vector<Tensor<double>> none;
    for (std::size_t k = 0; k < K; ++k) {
        Tensor<double> w({batch.B * batch.edges(), 2});
        for (std::size_t r = 0; r < w.rows(); ++r) w.data()[r * 2] = 1.0; // type 0 = no edge
        none.push_back(std::move(w));
    }
    ModelOutput<double> out;
    model.rollout(batch, none, T, out);
    for (std::size_t t = 0; t + 1 < T; ++t)
        for (std::size_t r = 0; r < batch.rows(); ++r)
            CHECK(out.preds[t].data()[r] == doctest::Approx(batch.frames[0].data()[r]));
}

TEST_CASE("teacher forcing resets the rollout on the configured period") {
    std::size_t N = 3, T = 12, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::observed_independent, 31);
    auto batch = build_batch<double>({&s0}, true);
    ModelShape shape = linear_shape(N, T, K);
    shape.alpha_init = 1.0; // with beta = 0 the decoder is the identity map
    shape.beta_init = {0.0};
    SdciModel<double> model(shape, 5);
    auto truth = truth_assignments(batch, K);

    ModelOutput<double> out;
    model.rollout(batch, truth, 5, out);
    auto expect_frame = [&](std::size_t t) { return 5 * (t / 5); };
    for (std::size_t t = 0; t + 1 < T; ++t)
        for (std::size_t r = 0; r < batch.rows(); ++r)
            CHECK(out.preds[t].data()[r] ==
                  doctest::Approx(batch.frames[expect_frame(t)].data()[r]));

    CHECK_THROWS_AS(model.rollout(batch, truth, 0, out), ContractError);
}

TEST_CASE("learned decoder drives next-frame and next-state predictions") {
    std::size_t N = 4, T = 9, K = 2, D = 4;
    auto s0 = random_sample(N, T, D, K, 2, Regime::observed_dependent, 41);
    auto s1 = random_sample(N, T, D, K, 2, Regime::observed_dependent, 42);
    auto batch = build_batch<float>({&s0, &s1}, true);

    ModelShape shape;
    shape.variant = "static";
    shape.decoder = "learned";
    shape.regime = Regime::observed_dependent;
    shape.N = N;
    shape.T = T;
    shape.D = D;
    shape.K_data = K;
    shape.K_model = K;
    shape.hidden = 16;
    shape.dec_hidden = 16;
    SdciModel<float> model(shape, 13);

    RngStream rng(2);
    auto out = model.forward(batch, rng, false, 10);
    REQUIRE(out.preds.size() == T - 1);
    REQUIRE(out.state_logits.size() == T - 1);
    for (auto& p : out.preds) CHECK(p.shape() == Shape{2 * N, D});
    for (auto& l : out.state_logits) CHECK(l.shape() == Shape{2 * N, K});
    CHECK(out.hidden_dists.empty());

    auto loss = negative_elbo(out, batch, 5e-5, 1e3, 0.5);
    CHECK(std::isfinite(loss.total.item()));
    CHECK(loss.nll_s.item() > 0);
}

TEST_CASE("hidden regime infers per-frame state beliefs") {
    std::size_t N = 3, T = 8, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::hidden, 51);
    auto batch = build_batch<double>({&s0}, false);
    CHECK(batch.state_onehot.empty());

    ModelShape shape = linear_shape(N, T, K);
    shape.regime = Regime::hidden;
    shape.states_in_input = false;
    shape.decoder = "learned";
    shape.gamma = 0.1;
    SdciModel<double> model(shape, 19);
    CHECK(model.has_hidden_head());

    RngStream rng(3);
    auto out = model.forward(batch, rng, false, 10);
    REQUIRE(out.hidden_dists.size() == T - 1);
    CHECK(out.state_logits.empty());
    for (auto& dist : out.hidden_dists) {
        CHECK(dist.shape() == Shape{N, K});
        for (std::size_t r = 0; r < N; ++r) {
            double sum = 0;
            for (std::size_t c = 0; c < K; ++c) {
                double q = dist.data()[r * K + c];
                CHECK(q >= 0);
                sum += q;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("state-marginal edge query blends per-state assignments") {
    std::size_t N = 3, T = 4, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::observed_independent, 61);
    auto batch = build_batch<double>({&s0}, true);
    ModelShape shape = linear_shape(N, T, K);
    SdciModel<double> model(shape, 23);

    std::size_t E = batch.edges();
    Tensor<double> w0 = Tensor<double>::zeros({E, 2});
    Tensor<double> w1 = Tensor<double>::zeros({E, 2});
    for (std::size_t r = 0; r < E; ++r) {
        w0.data()[r * 2] = 0.9;
        w0.data()[r * 2 + 1] = 0.1;
        w1.data()[r * 2] = 0.2;
        w1.data()[r * 2 + 1] = 0.8;
    }

    Tensor<double> uniform = Tensor<double>::full({N, K}, 0.5);
    Tensor<double> mixed = model.marginal_assignment({w0, w1}, uniform, batch);
    for (std::size_t r = 0; r < E; ++r) {
        CHECK(mixed.data()[r * 2] == doctest::Approx(0.55));
        CHECK(mixed.data()[r * 2 + 1] == doctest::Approx(0.45));
    }

    Tensor<double> pick = Tensor<double>::zeros({N, K});
    for (std::size_t i = 0; i < N; ++i) pick.data()[i * K + 1] = 1.0;
    Tensor<double> chosen = model.marginal_assignment({w0, w1}, pick, batch);
    for (std::size_t r = 0; r < E; ++r) {
        CHECK(chosen.data()[r * 2] == doctest::Approx(0.2));
        CHECK(chosen.data()[r * 2 + 1] == doctest::Approx(0.8));
    }
}

TEST_CASE("posterior argmax yields hard one-hot assignments") {
    std::size_t N = 3, T = 6, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::observed_independent, 71);
    auto batch = build_batch<double>({&s0}, true);
    ModelShape shape = linear_shape(N, T, K);
    shape.decoder = "learned";
    SdciModel<double> model(shape, 29);
    Tensor<double> logits = model.encode(batch);
    auto hard = model.assignments_from_argmax(logits);
    REQUIRE(hard.size() == K);
    std::size_t E = batch.edges();
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t r = 0; r < E; ++r) {
            double a = hard[k].data()[r * 2], b = hard[k].data()[r * 2 + 1];
            CHECK(a + b == doctest::Approx(1.0));
            CHECK(a * b == doctest::Approx(0.0));
            // matches a hand argmax over that pair/state's logit block
            double l0 = logits.data()[r * (K * 2) + k * 2];
            double l1 = logits.data()[r * (K * 2) + k * 2 + 1];
            CHECK((l1 > l0 ? b : a) == doctest::Approx(1.0));
        }
}

TEST_CASE("gumbel edge sampling: soft rows normalize, hard rows are one-hot") {
    std::size_t N = 3, T = 6, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::observed_independent, 81);
    auto batch = build_batch<double>({&s0}, true);
    ModelShape shape = linear_shape(N, T, K);
    shape.decoder = "learned";
    SdciModel<double> model(shape, 37);
    Tensor<double> logits = model.encode(batch);

    RngStream r1(5), r2(5), r3(6);
    auto soft1 = model.sample_assignments(logits, r1, false);
    auto soft2 = model.sample_assignments(logits, r2, false);
    auto other = model.sample_assignments(logits, r3, false);
    bool all_same = true, any_diff = false;
    for (std::size_t k = 0; k < K; ++k) {
        all_same = all_same && std::equal(soft1[k].data().begin(), soft1[k].data().end(),
                                          soft2[k].data().begin());
        any_diff = any_diff || !std::equal(soft1[k].data().begin(), soft1[k].data().end(),
                                           other[k].data().begin());
        for (std::size_t r = 0; r < soft1[k].rows(); ++r) {
            double sum = soft1[k].data()[r * 2] + soft1[k].data()[r * 2 + 1];
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    CHECK(all_same);
    CHECK(any_diff);

    RngStream r4(5);
    auto hard = model.sample_assignments(logits, r4, true);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t r = 0; r < hard[k].rows(); ++r) {
            double a = hard[k].data()[r * 2], b = hard[k].data()[r * 2 + 1];
            CHECK(((a == 1.0 && b == 0.0) || (a == 0.0 && b == 1.0)));
        }
}

TEST_CASE("whole objective differentiates end to end: fixed-linear path") {
    std::size_t N = 3, T = 4, K = 2;
    std::vector<TimeSeriesSample> samples{linear_sample(201, N, T, K),
                                          linear_sample(202, N, T, K)};
    auto batch = build_batch<double>({&samples[0], &samples[1]}, true);
    ModelShape shape = linear_shape(N, T, K);
    shape.hidden = 8;
    shape.normalization = false;
    SdciModel<double> model(shape, 97);

    RngStream noise_rng(55);
    Tensor<double> logits0 = model.encode(batch);
    Tensor<double> noise =
        gumbel_noise<double>({logits0.rows() * K, batch.n_edge_types}, noise_rng);

    auto loss_fn = [&] {
        ModelOutput<double> out;
        out.edge_logits = model.encode(batch);
        out.assignments = model.assignments_from_noise(out.edge_logits, noise, false);
        model.rollout(batch, out.assignments, 2, out);
        return negative_elbo(out, batch, 0.1, 0.0, 0.5).total;
    };
    check_grads_fd(loss_fn, all_params(model), 1e-5);
}

TEST_CASE("whole objective differentiates end to end: learned decoder with state head") {
    std::size_t N = 3, T = 4, K = 2, D = 2;
    auto s0 = random_sample(N, T, D, K, 2, Regime::observed_dependent, 301);
    auto s1 = random_sample(N, T, D, K, 2, Regime::observed_dependent, 302);
    auto batch = build_batch<double>({&s0, &s1}, true);

    ModelShape shape;
    shape.variant = "static";
    shape.decoder = "learned";
    shape.regime = Regime::observed_dependent;
    shape.N = N;
    shape.T = T;
    shape.D = D;
    shape.K_data = K;
    shape.K_model = K;
    shape.hidden = 8;
    shape.dec_hidden = 8;
    shape.normalization = false;
    SdciModel<double> model(shape, 107);

    RngStream noise_rng(56);
    Tensor<double> noise = gumbel_noise<double>({batch.B * batch.edges() * K, 2}, noise_rng);
    auto loss_fn = [&] {
        ModelOutput<double> out;
        out.edge_logits = model.encode(batch);
        out.assignments = model.assignments_from_noise(out.edge_logits, noise, false);
        model.rollout(batch, out.assignments, 2, out);
        return negative_elbo(out, batch, 0.1, 2.0, 0.5).total;
    };
    check_grads_fd(loss_fn, all_params(model), 1e-5);
}

TEST_CASE("whole objective differentiates end to end: hidden state head") {
    std::size_t N = 3, T = 4, K = 2;
    auto s0 = random_sample(N, T, 1, K, 2, Regime::hidden, 401);
    auto batch = build_batch<double>({&s0}, false);

    ModelShape shape = linear_shape(N, T, K);
    shape.regime = Regime::hidden;
    shape.states_in_input = false;
    shape.decoder = "learned";
    shape.hidden = 8;
    shape.dec_hidden = 8;
    shape.normalization = false;
    shape.gamma = 0.5;
    SdciModel<double> model(shape, 211);

    RngStream noise_rng(57);
    Tensor<double> noise = gumbel_noise<double>({batch.edges() * K, 2}, noise_rng);
    auto loss_fn = [&] {
        ModelOutput<double> out;
        out.edge_logits = model.encode(batch);
        out.assignments = model.assignments_from_noise(out.edge_logits, noise, false);
        model.rollout(batch, out.assignments, 2, out);
        return negative_elbo(out, batch, 0.1, 0.0, 0.5).total;
    };
    check_grads_fd(loss_fn, all_params(model), 1e-5);
}

TEST_CASE("model shape derives from a parsed experiment description") {
    std::string text = R"({
        "scenario": "linear",
        "regime": "hidden",
        "seed": 9,
        "model": {"fixed_init_truth": true}
    })";
    ExperimentConfig cfg = parse_experiment_config(text);
    ModelShape shape = ModelShape::from_config(cfg);
    CHECK(shape.N == 3);
    CHECK(shape.T == 40);
    CHECK(shape.D == 1);
    CHECK(shape.K_data == 2);
    CHECK(shape.K_model == 2);
    CHECK(shape.decoder == "fixed_linear");
    CHECK(shape.gamma == doctest::Approx(0.1));
    CHECK(!shape.states_in_input);
    CHECK(shape.alpha_init == doctest::Approx(1.0));
    REQUIRE(shape.beta_init.size() == 1);
    CHECK(shape.beta_init[0] == doctest::Approx(0.05));

    // a one-state model on two-state data is the broadcast baseline
    std::string acd = R"({
        "scenario": "linear",
        "regime": "observed_independent",
        "seed": 9,
        "model": {"model_states": 1}
    })";
    ModelShape b = ModelShape::from_config(parse_experiment_config(acd));
    CHECK(b.K_model == 1);
    CHECK(b.K_data == 2);

    ModelShape bad = b;
    bad.K_model = 3;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("batch layout: frames, one-hots, pair indexing, flattened encoder input") {
    auto s0 = random_sample(3, 4, 1, 2, 2, Regime::observed_independent, 91);
    auto s1 = random_sample(3, 4, 1, 2, 2, Regime::observed_independent, 92);
    auto batch = build_batch<double>({&s0, &s1}, true);

    CHECK(batch.B == 2);
    CHECK(batch.edges() == 6);
    std::vector<std::size_t> src{0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
    std::vector<std::size_t> dst{1, 2, 0, 2, 0, 1, 4, 5, 3, 5, 3, 4};
    CHECK(batch.src_rows == src);
    CHECK(batch.dst_rows == dst);

    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(batch.frames[t].data()[3 + i] == s1.pos(t, i, 0));
            CHECK(batch.state_labels[t][3 + i] == s1.state(t, i));
            double hot = batch.state_onehot[t].data()[(3 + i) * 2 + s1.state(t, i)];
            CHECK(hot == 1.0);
        }

    // encoder input row r is [p^0 | onehot(s^0) | p^1 | onehot(s^1) | ...]
    std::size_t F = 3;
    CHECK(batch.encoder_input.shape() == Shape{6, 4 * F});
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(batch.encoder_input.data()[1 * 4 * F + t * F] == s0.pos(t, 1, 0));
        CHECK(batch.encoder_input.data()[1 * 4 * F + t * F + 1 + s0.state(t, 1)] == 1.0);
    }

    CHECK_THROWS_AS(build_batch<double>({}, true), ValueError);
    auto small = random_sample(3, 5, 1, 2, 2, Regime::observed_independent, 93);
    CHECK_THROWS_AS(build_batch<double>({&s0, &small}, true), ContractError);
}
