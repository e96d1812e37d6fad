#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "conslearn/diffusion.hpp"

using namespace conslearn;

namespace {
const SystemSpec kSpring = SystemSpec::make(SystemKind::SpringMass);
} // namespace

TEST_CASE("linear noise schedule hand values") {
    const auto s = NoiseSchedule::linear(100, 1e-4, 0.02);
    REQUIRE(s.beta.size() == 100);
    CHECK(s.beta.front() == doctest::Approx(1e-4).epsilon(1e-14));
    CHECK(s.beta.back() == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(s.beta[1] == doctest::Approx(0.00030101010101010105).epsilon(1e-12));
    CHECK(s.alpha[0] == doctest::Approx(0.9999).epsilon(1e-14));
    CHECK(s.alpha_bar[0] == doctest::Approx(0.9999).epsilon(1e-14));
    // Cumulative product frozen against an independent computation.
    CHECK(s.alpha_bar[99] == doctest::Approx(0.3635632480554922).epsilon(1e-12));
    for (std::size_t t = 1; t < 100; ++t) {
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        CHECK(s.beta[t] > s.beta[t - 1]);
    }

    CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.02), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.02, 1e-4), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), ConfigError);
}

TEST_CASE("forward diffusion satisfies its defining identity") {
    const auto s = NoiseSchedule::linear(50);
    const std::vector<double> delta{0.3, -1.1};
    std::vector<double> x(2), noise(2);
    Rng rng(5);
    for (int t : {0, 7, 49}) {
        forward_diffuse(delta, t, s, rng, x, noise);
        const double sa = std::sqrt(s.alpha_bar[static_cast<std::size_t>(t)]);
        const double sn = std::sqrt(1.0 - s.alpha_bar[static_cast<std::size_t>(t)]);
        for (int d = 0; d < 2; ++d) {
            // Recover delta from the reported noise.
            const auto du = static_cast<std::size_t>(d);
            CHECK((x[du] - sn * noise[du]) / sa == doctest::Approx(delta[du]).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(forward_diffuse(delta, 50, s, rng, x, noise), InputError);
    CHECK_THROWS_AS(forward_diffuse(delta, -1, s, rng, x, noise), InputError);
}

TEST_CASE("forward diffusion preserves unit variance") {
    // Var(x_t) = abar_t * Var(delta) + (1 - abar_t) = 1 for unit-variance deltas.
    const auto s = NoiseSchedule::linear(100);
    Rng rng(23);
    for (int t : {3, 40, 99}) {
        const int n = 100000;
        double sum = 0.0, sumsq = 0.0;
        std::vector<double> delta(1), x(1), noise(1);
        for (int i = 0; i < n; ++i) {
            delta[0] = rng.normal();
            forward_diffuse(delta, t, s, rng, x, noise);
            sum += x[0];
            sumsq += x[0] * x[0];
        }
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        CHECK(var == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("projection reduces the median level-set residual") {
    StructuredEnergyNet se(kSpring, 57, 24, 2);
    Rng rng(31);
    const int n = 1200;
    std::vector<double> before, after;
    before.reserve(n);
    after.reserve(n);
    for (int i = 0; i < n; ++i) {
        const std::vector<double> base{rng.uniform(-1.0, 1.0), rng.uniform(-3.0, 3.0)};
        std::vector<double> grad(2);
        const double h0 = se.value_and_grad(base, grad);
        std::vector<double> pert{base[0] + 0.1 * rng.normal(),
                                 base[1] + 0.1 * rng.normal()};
        const double h_pert = se.value_and_grad(pert, grad);
        before.push_back(std::abs(h_pert - h0));
        const auto moved = project_energy(pert, h0, se);
        std::vector<double> scratch(2);
        after.push_back(std::abs(se.value_and_grad(moved, scratch) - h0));
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    CHECK(median(after) <= median(before));
}

TEST_CASE("transition model input is [x | condition | f | time embedding]") {
    TransitionModel m(2, NoiseSchedule::linear(10), 3, 16, 1, 4);
    CHECK(m.input_dim() == 2 + 2 + 1 + 4);
    CHECK(m.state_dim() == 2);
    CHECK(m.denoiser.in_dim() == m.input_dim());
    CHECK(m.denoiser.out_dim() == 2);

    Eigen::MatrixXd x(1, 2), cond(1, 2);
    x << 0.5, -0.5;
    cond << 1.0, 2.0;
    Eigen::VectorXd f(1);
    f << 3.0;
    const auto y = m.predict_noise(x, cond, f, {4});
    CHECK(y.rows() == 1);
    CHECK(y.cols() == 2);

    // Out-of-range diffusion steps are rejected.
    CHECK_THROWS_AS(m.predict_noise(x, cond, f, {10}), InputError);
    CHECK_THROWS_AS(m.predict_noise(x, cond, f, {-1}), InputError);
}

TEST_CASE("zero-predicting denoiser scores one per dimension against unit noise") {
    const auto raw = generate_dataset(kSpring, 200, 30, 0.005, 31);
    const auto std_batch = normalize(raw, NormMode::Standardize, {0.9, 3});
    const auto [train, val] = split(std_batch, {0.9, 3});
    BlackBoxCdn cdn(2, 7, 16, 2);
    cdn.norm_stats = NormStats{}; // raw passthrough for the conditioning scalar

    TransitionModel model(2, NoiseSchedule::linear(100), 11, 64, 2, 16);
    // With the output layer zeroed the model predicts exactly 0, so the loss
    // is E|eps|^2 / D = 1 up to sampling error.
    model.denoiser.layers.back().W.setZero();
    model.denoiser.layers.back().b.setZero();
    DdpmTrainOptions opt;
    opt.epochs = 1;
    opt.batches_per_epoch = 30;
    opt.batch_size = 128;
    opt.lr = 1e-12; // effectively frozen weights
    opt.seed = 17;
    const auto history = train_ddpm(model, train, val, cdn, opt);
    CHECK(history.back().train_loss == doctest::Approx(1.0).epsilon(0.06));
}

TEST_CASE("ddpm training requires standardized batches") {
    const auto raw = generate_dataset(kSpring, 30, 10, 0.005, 3);
    const auto [train, val] = split(raw, {0.9, 3});
    BlackBoxCdn cdn(2, 7, 16, 2);
    TransitionModel model(2, NoiseSchedule::linear(10), 1, 16, 1, 4);
    DdpmTrainOptions opt;
    opt.epochs = 1;
    CHECK_THROWS_AS(train_ddpm(model, train, val, cdn, opt), ConfigError);
}

TEST_CASE("delta sampling is deterministic per seed") {
    TransitionModel m(2, NoiseSchedule::linear(20), 5, 32, 2, 8);
    m.state_stats = NormStats{};
    const std::vector<double> s{0.4, -0.2};
    Rng a(9), b(9), c(10);
    const Eigen::VectorXd da = sample_delta(m, s, 1.5, a);
    const Eigen::VectorXd db = sample_delta(m, s, 1.5, b);
    const Eigen::VectorXd dc = sample_delta(m, s, 1.5, c);
    CHECK(da == db);
    CHECK(da != dc);
    CHECK(da.allFinite());
}

TEST_CASE("projection step solves the 1-d quadratic oracle") {
    // H(s) = s^2 / 2 at s = 2: value 2, gradient 2, target level 0.5.
    // One step: s' = 2 - (2 - 0.5) * 2 / 4 = 1.25.
    const std::vector<double> s{2.0};
    const std::vector<double> grad{2.0};
    const auto out = project_step(s, 2.0, grad, 0.5, 0.0 + 1e-300);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(1.25).epsilon(1e-12));

    // A state already on the level set is a fixed point.
    const std::vector<double> s1{1.0};
    const std::vector<double> g1{1.0};
    const auto fixed = project_step(s1, 0.5, g1, 0.5, 1e-8);
    CHECK(fixed[0] == doctest::Approx(1.0).epsilon(1e-12));

    // Repeated steps converge to the level set.
    double cur = 2.0;
    for (int i = 0; i < 50; ++i) {
        const std::vector<double> si{cur};
        const std::vector<double> gi{cur};
        cur = project_step(si, 0.5 * cur * cur, gi, 0.5, 1e-12)[0];
    }
    CHECK(0.5 * cur * cur == doctest::Approx(0.5).epsilon(1e-9));

    CHECK_THROWS_AS(project_step(s, 2.0, grad, 0.5, 0.0), ConfigError);
    CHECK_THROWS_AS(project_step(s, 2.0, std::vector<double>{1.0, 2.0}, 0.5, 1e-8),
                    InputError);
}

TEST_CASE("projection through a structured model moves toward the level") {
    StructuredEnergyNet se(kSpring, 3, 16, 2);
    const std::vector<double> s{0.8, -0.6};
    std::vector<double> g(2);
    const double h = se.value_and_grad(s, g);
    const double target = h - 0.05;
    const auto moved = project_energy(s, target, se);
    std::vector<double> scratch(2);
    const double h_after = se.value_and_grad(moved, scratch);
    CHECK(std::abs(h_after - target) < std::abs(h - target));
}

TEST_CASE("serial rollout shape, determinism and finiteness") {
    TransitionModel m(2, NoiseSchedule::linear(10), 5, 32, 2, 8);
    m.state_stats = NormStats{};
    BlackBoxCdn cdn(2, 7, 16, 2);
    StructuredEnergyNet se(kSpring, 3, 16, 2);
    RolloutConfig cfg;
    cfg.horizon = 12;
    cfg.projection_steps_per_sample = 1;

    const std::vector<double> s0{0.5, 0.0};
    Rng a(21), b(21);
    const auto ta = rollout(m, s0, cfg, cdn, se, a);
    const auto tb = rollout(m, s0, cfg, cdn, se, b);
    REQUIRE(ta.size() == 13u * 2u);
    CHECK(ta == tb);
    CHECK(ta[0] == 0.5);
    CHECK(ta[1] == 0.0);
    for (double v : ta) CHECK(std::isfinite(v));
}

TEST_CASE("batched rollouts do not depend on the batch roster") {
    const auto truth = generate_dataset(kSpring, 8, 15, 0.005, 41);
    TransitionModel m(2, NoiseSchedule::linear(10), 5, 32, 2, 8);
    m.state_stats = NormStats{};
    BlackBoxCdn cdn(2, 7, 16, 2);
    StructuredEnergyNet se(kSpring, 3, 16, 2);
    RolloutConfig cfg;
    cfg.horizon = 15;
    cfg.projection_steps_per_sample = 0;

    const auto four = rollout_batch(m, truth, 4, cfg, cdn, se, 77);
    const auto eight = rollout_batch(m, truth, 8, cfg, cdn, se, 77);
    CHECK(four.n_traj == 4);
    CHECK(four.traj_len == 16);
    CHECK(four.provenance == "generated");
    for (int i = 0; i < 4; ++i) {
        for (int t = 0; t < four.traj_len; ++t) {
            // Trajectory i consumes child stream i of the seed either way.
            CHECK(four.state_at(i, t)[0] == eight.state_at(i, t)[0]);
            CHECK(four.state_at(i, t)[1] == eight.state_at(i, t)[1]);
        }
    }
    // t = 0 rows are the truth initial states.
    for (int i = 0; i < 4; ++i) {
        CHECK(four.state_at(i, 0)[0] == truth.state_at(i, 0)[0]);
    }
    CHECK_THROWS_AS(rollout_batch(m, truth, 9, cfg, cdn, se, 77), InputError);
}

TEST_CASE("transition checkpoints restore the exact denoiser") {
    TransitionModel m(2, NoiseSchedule::linear(25, 2e-4, 0.015), 13, 48, 2, 8);
    m.state_stats.mode = NormMode::Standardize;
    m.state_stats.a = {0.1, -0.2};
    m.state_stats.b = {1.1, 0.9};
    CheckpointInfo info;
    info.model_label = "ddpm-test";
    info.system = "spring-mass";
    info.epochs = 2;
    info.seed = 13;

    const auto path = std::filesystem::temp_directory_path() / "conslearn_test_ddpm.bin";
    save_transition_checkpoint(m, info, path);
    const auto loaded = load_transition_checkpoint(path);
    CHECK(loaded.info.model_label == "ddpm-test");
    CHECK(loaded.model.schedule.n_steps == 25);
    CHECK(loaded.model.schedule.beta_start == 2e-4);
    CHECK(loaded.model.state_stats.a == m.state_stats.a);

    Eigen::MatrixXd x(3, 2), cond(3, 2);
    x << 0.1, 0.2, -0.5, 0.3, 1.0, -1.0;
    cond << 1.0, 0.0, 0.5, 0.5, -0.2, 0.8;
    Eigen::VectorXd f(3);
    f << 0.3, -0.1, 2.0;
    const std::vector<int> t{0, 12, 24};
    CHECK(loaded.model.predict_noise(x, cond, f, t) == m.predict_noise(x, cond, f, t));
    std::filesystem::remove(path);
}
