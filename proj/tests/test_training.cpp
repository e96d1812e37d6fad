#include <doctest.h>

#include <cmath>
#include <vector>

#include "conslearn/diffusion.hpp"
#include "conslearn/metrics.hpp"

// Statistical end-to-end checks that involve real (small-scale) training runs.
// They are slower than the unit suite but stay well under the desk-scale
// experiment budgets.

using namespace conslearn;

namespace {

const SystemSpec kSpring = SystemSpec::make(SystemKind::SpringMass);

struct SpringData {
    TrajectoryBatch train_std, val_std; // standardized, for the transition model
    TrajectoryBatch train_raw, val_raw;
    NormStats stats;
};

const SpringData& spring_data() {
    static const SpringData data = [] {
        SpringData d;
        const auto raw = generate_dataset(kSpring, 5000, 40, 0.005, 314);
        const SplitSpec spec{0.9, 3};
        const auto std_batch = normalize(raw, NormMode::Standardize, spec);
        d.stats = std_batch.norm_stats;
        std::tie(d.train_std, d.val_std) = split(std_batch, spec);
        std::tie(d.train_raw, d.val_raw) = split(raw, spec);
        return d;
    }();
    return data;
}

/// Conditioning scalar source for transition-model tests. The tests below
/// probe the diffusion mechanics, so the analytic invariant stands in for a
/// trained model and removes one source of statistical noise.
PolynomialCdn analytic_conditioner() {
    PolynomialCdn cdn(kSpring, 1);
    cdn.w.setZero();
    cdn.w(3) = 5.0; // x^2
    cdn.w(5) = 0.5; // v^2
    return cdn;
}

DdpmTrainOptions ddpm_options(int epochs, std::uint64_t seed) {
    DdpmTrainOptions opt;
    opt.epochs = epochs;
    opt.batches_per_epoch = 100;
    opt.batch_size = 256;
    opt.lr = 1e-3;
    opt.seed = seed;
    opt.val_samples = 2048;
    return opt;
}

} // namespace

TEST_CASE("ddpm loss strictly decreases over the first ten epochs") {
    const auto& d = spring_data();
    const auto cdn = analytic_conditioner();
    TransitionModel model(2, NoiseSchedule::linear(100), 21, 256, 3, 32);
    const auto history = train_ddpm(model, d.train_std, d.val_std, cdn,
                                    ddpm_options(10, 77));
    REQUIRE(history.size() == 10);
    for (std::size_t e = 1; e < history.size(); ++e) {
        CHECK(history[e].train_loss < history[e - 1].train_loss);
    }
    CHECK(history.back().val_loss < 1.0);
}

TEST_CASE("shuffled conditioning trains to a higher loss than correct pairing") {
    const auto& d = spring_data();
    const auto cdn = analytic_conditioner();

    TransitionModel paired(2, NoiseSchedule::linear(100), 33, 256, 3, 32);
    const auto correct = train_ddpm(paired, d.train_std, d.val_std, cdn,
                                    ddpm_options(8, 55));

    TransitionModel control(2, NoiseSchedule::linear(100), 33, 256, 3, 32);
    auto opt = ddpm_options(8, 55);
    opt.shuffle_conditioning = true;
    const auto shuffled = train_ddpm(control, d.train_std, d.val_std, cdn, opt);

    CHECK(shuffled.back().val_loss > correct.back().val_loss);
    CHECK(shuffled.back().train_loss > correct.back().train_loss);
}

TEST_CASE("sampled deltas center on the exact one-step change") {
    const auto& d = spring_data();
    const auto cdn = analytic_conditioner();
    TransitionModel model(2, NoiseSchedule::linear(100), 21, 256, 3, 32);
    model.state_stats = d.stats;
    // Annealed schedule: the bias of the sampler mean tracks the optimizer's
    // step-size noise floor, so the last stages shrink the learning rate.
    for (auto [epochs, lr] : {std::pair{40, 1e-3}, {20, 1e-4}, {10, 1e-5}}) {
        auto opt = ddpm_options(epochs, 99 + static_cast<std::uint64_t>(epochs));
        opt.lr = lr;
        train_ddpm(model, d.train_std, d.val_std, cdn, opt);
    }

    // Condition on a fixed raw validation state; ground truth comes from the
    // closed-form propagator, mapped into standardized coordinates.
    const auto s_raw_span = d.val_raw.state_at(0, 5);
    const std::vector<double> s_raw(s_raw_span.begin(), s_raw_span.end());
    const auto s_next = step_exact(kSpring, s_raw, d.val_raw.dt);
    std::vector<double> s_std(2), truth(2);
    for (int k = 0; k < 2; ++k) {
        s_std[static_cast<std::size_t>(k)] =
            d.stats.to_normalized(s_raw[static_cast<std::size_t>(k)], k);
        truth[static_cast<std::size_t>(k)] =
            d.stats.to_normalized(s_next[static_cast<std::size_t>(k)], k) -
            s_std[static_cast<std::size_t>(k)];
    }
    const double f = cdn.value_raw(s_raw);

    const int n = 1000;
    Rng rng(4242);
    Eigen::MatrixXd draws(n, 2);
    for (int i = 0; i < n; ++i) {
        draws.row(i) = sample_delta(model, s_std, f, rng).transpose();
    }
    // The exact dynamics make the true conditional a point mass, so the draw
    // distribution concentrates around the true delta as training converges.
    // The sampler mean must land within the empirical spread of its own draws
    // and within a few percent of the closed-form delta.
    const double truth_norm = std::hypot(truth[0], truth[1]);
    for (int k = 0; k < 2; ++k) {
        const double mean = draws.col(k).mean();
        const double sd = std::sqrt(
            (draws.col(k).array() - mean).square().sum() / (n - 1));
        INFO("dim " << k << ": mean " << mean << " truth "
                    << truth[static_cast<std::size_t>(k)] << " sd " << sd);
        CHECK(std::abs(mean - truth[static_cast<std::size_t>(k)]) <= 3.0 * sd);
        CHECK(std::abs(mean - truth[static_cast<std::size_t>(k)]) <=
              0.05 * truth_norm);
    }
}

TEST_CASE("structured energy model reaches high validation fit on a small budget") {
    const auto raw = generate_dataset(kSpring, 800, 40, 0.005, 11);
    const auto [train, val] = split(raw, {0.9, 3});

    StructuredEnergyNet model(kSpring, 2, 128, 2);
    ConservationLossConfig loss;
    InvariantTrainOptions opt;
    opt.epochs = 60;
    opt.batches_per_epoch = 8;
    opt.batch_traj = 24;
    opt.pairs_per_traj = 16;
    opt.schedule.kind = LrSchedule::Kind::LinearWarmupThenCosineRestarts;
    opt.schedule.base_lr = 1e-3;
    opt.schedule.min_lr = 1e-5;
    opt.schedule.warmup_epochs = 5;
    opt.seed = 1;
    train_invariant(model, train, val, loss, opt);

    const Eigen::VectorXd values = evaluate_invariant(model, val);
    std::vector<double> predicted(values.data(), values.data() + values.size());
    std::vector<double> target;
    target.reserve(val.n_states());
    for (int i = 0; i < val.n_traj; ++i) {
        for (int t = 0; t < val.traj_len; ++t) {
            target.push_back(analytic_energy(kSpring, val.state_at(i, t)));
        }
    }
    CHECK(pearson_r2(predicted, target) > 0.99);
    CHECK(spearman(predicted, target) > 0.99);
}
