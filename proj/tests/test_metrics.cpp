#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "conslearn/metrics.hpp"

using namespace conslearn;

namespace {
const SystemSpec kSpring = SystemSpec::make(SystemKind::SpringMass);
} // namespace

TEST_CASE("pearson r2 hand value and invariances") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{1.0, 2.0, 4.0};
    CHECK(pearson_r2(a, b) == doctest::Approx(27.0 / 28.0).epsilon(1e-12));
    CHECK(pearson_r2(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Affine maps of either argument leave r2 unchanged; sign flips too.
    std::vector<double> scaled(3), flipped(3);
    for (int i = 0; i < 3; ++i) {
        scaled[static_cast<std::size_t>(i)] = 3.0 * a[static_cast<std::size_t>(i)] - 7.0;
        flipped[static_cast<std::size_t>(i)] = -a[static_cast<std::size_t>(i)];
    }
    CHECK(pearson_r2(scaled, b) == doctest::Approx(27.0 / 28.0).epsilon(1e-12));
    CHECK(pearson_r2(flipped, b) == doctest::Approx(27.0 / 28.0).epsilon(1e-12));

    CHECK_THROWS_AS(pearson_r2(std::vector<double>{1.0, 1.0, 1.0}, b),
                    DegenerateMetricError);
    CHECK_THROWS_AS(pearson_r2(std::vector<double>{1.0}, std::vector<double>{2.0}),
                    InputError);
    CHECK_THROWS_AS(pearson_r2(a, std::vector<double>{1.0, 2.0}), InputError);
}

TEST_CASE("spearman hand values, ties and monotone invariance") {
    const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> b{1.0, 3.0, 2.0, 4.0};
    CHECK(spearman(a, b) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(spearman(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Tied entries get average ranks; frozen against an independent computation.
    CHECK(spearman(std::vector<double>{1.0, 2.0, 2.0, 4.0}, a) ==
          doctest::Approx(0.9486832980505139).epsilon(1e-12));

    // Any strictly increasing transform preserves ranks exactly.
    std::vector<double> monotone(4);
    for (int i = 0; i < 4; ++i) {
        monotone[static_cast<std::size_t>(i)] =
            std::exp(a[static_cast<std::size_t>(i)]) + 10.0;
    }
    CHECK(spearman(monotone, b) == doctest::Approx(0.8).epsilon(1e-12));
    // Reversal gives -1.
    CHECK(spearman(std::vector<double>{4.0, 3.0, 2.0, 1.0}, a) ==
          doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(spearman(std::vector<double>{2.0, 2.0, 2.0, 2.0}, a),
                    DegenerateMetricError);
}

TEST_CASE("rollout mse averages over every entry") {
    auto truth = generate_dataset(kSpring, 3, 4, 0.01, 5);
    auto gen = truth;
    gen.provenance = "generated";
    CHECK(rollout_mse(gen, truth) == 0.0);

    // Perturb one entry: mse = delta^2 / (B * T * D).
    gen.states[7] += 0.3;
    const double expected = 0.09 / static_cast<double>(3 * 4 * 2);
    CHECK(rollout_mse(gen, truth) == doctest::Approx(expected).epsilon(1e-12));

    auto short_batch = generate_dataset(kSpring, 3, 3, 0.01, 5);
    CHECK_THROWS_AS(rollout_mse(short_batch, truth), InputError);

    auto normed = normalize(truth, NormMode::MinMax, {0.9, 1});
    CHECK_THROWS_AS(rollout_mse(normed, truth), ConfigError);
}

TEST_CASE("energy spread ratio compares within-trajectory energy stds") {
    const auto truth = generate_dataset(kSpring, 5, 30, 0.01, 9);
    // A batch compared with itself has ratio exactly 1 (including the 0/0
    // guard for near-exact trajectories).
    const auto self = energy_std_ratio(truth, truth);
    CHECK(self.ratio == 1.0);
    CHECK(self.sigma_gen == self.sigma_true);

    // Add drift to the generated copy: its energy spread must dominate.
    auto drifted = truth;
    for (int i = 0; i < drifted.n_traj; ++i) {
        double* t = drifted.traj(i);
        for (int s = 0; s < drifted.traj_len; ++s) {
            t[s * 2 + 0] += 0.01 * s; // grow the position over time
        }
    }
    const auto spread = energy_std_ratio(drifted, truth);
    CHECK(spread.sigma_gen > spread.sigma_true);
    CHECK(spread.ratio > 100.0);
    CHECK(std::isfinite(spread.ratio));
}

TEST_CASE("drift check reports the worst trajectory") {
    const auto clean = generate_dataset(kSpring, 20, 40, 0.005, 3);
    CHECK(drift_check(clean) < 1e-10);

    auto bad = clean;
    double* t = bad.traj(4);
    for (int s = 0; s < bad.traj_len; ++s) t[s * 2 + 1] += 0.05 * s;
    CHECK(drift_check(bad) > 1e-3);
}

TEST_CASE("metrics reports round-trip through csv and json") {
    const auto dir = std::filesystem::temp_directory_path() / "conslearn_test_reports";
    std::filesystem::remove_all(dir);

    CHECK(load_reports(dir).empty()); // missing file reads as no reports

    MetricsReport full;
    full.system = "pendulum";
    full.model = "se";
    full.noise_fraction = 0.01;
    full.r2 = 0.9991;
    full.spearman_rho = 0.9995;
    full.seed = 2;
    full.n_traj = 5000;
    full.epochs = 150;
    full.note = "unit test";
    MetricsReport sparse;
    sparse.system = "spring-mass";
    sparse.model = "ddpm-proj1";
    sparse.rollout_mse = 0.002;
    sparse.sigma_gen = 0.12;
    sparse.sigma_true = 1e-9;
    sparse.ratio = 1.2e8;

    emit_report(std::vector<MetricsReport>{full, sparse}, dir);
    const auto loaded = load_reports(dir);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].system == "pendulum");
    CHECK(loaded[0].r2.has_value());
    CHECK(*loaded[0].r2 == 0.9991);
    CHECK_FALSE(loaded[0].rollout_mse.has_value());
    CHECK(loaded[0].note == "unit test");
    CHECK(loaded[1].model == "ddpm-proj1");
    CHECK_FALSE(loaded[1].r2.has_value());
    CHECK(*loaded[1].ratio == 1.2e8);

    // The csv has the pinned header and one line per report.
    std::ifstream csv(dir / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "system,model,noise_fraction,r2,spearman,rollout_mse,sigma_true,sigma_gen,"
          "ratio,seed,n_traj,epochs");
    std::filesystem::remove_all(dir);
}

TEST_CASE("energy series csv has one row per state") {
    const auto dir = std::filesystem::temp_directory_path() / "conslearn_test_series";
    std::filesystem::remove_all(dir);
    const auto batch = generate_dataset(kSpring, 2, 3, 0.01, 1);
    std::vector<double> learned(batch.n_states(), 0.5);
    emit_energy_series("unit", batch, learned, dir);

    std::ifstream csv(dir / "energy_series" / "unit.csv");
    REQUIRE(csv.good());
    std::string line;
    std::getline(csv, line);
    CHECK(line == "traj,t,analytic_energy,learned_value");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 6); // 2 trajectories x 3 states

    std::vector<double> wrong(3, 0.0);
    CHECK_THROWS_AS(emit_energy_series("bad", batch, wrong, dir), InputError);
    std::filesystem::remove_all(dir);
}
