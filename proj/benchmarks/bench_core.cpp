// Microbenchmarks for the hot paths: dense-net forward/backward, trajectory
// generation, the diffusion reverse chain, and the sparse regression solve.
#include <benchmark/benchmark.h>

#include "conslearn/diffusion.hpp"
#include "conslearn/symreg.hpp"

using namespace conslearn;

namespace {

Eigen::MatrixXd random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = rng.normal();
    }
    return x;
}

void bm_dense_forward(benchmark::State& state) {
    const auto batch = static_cast<Eigen::Index>(state.range(0));
    DenseNet net({4, 256, 256, 256, 256, 1}, 1);
    const Eigen::MatrixXd x = random_batch(batch, 4, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.forward(x));
    }
    state.SetItemsProcessed(state.iterations() * batch);
}

void bm_dense_backward(benchmark::State& state) {
    const auto batch = static_cast<Eigen::Index>(state.range(0));
    DenseNet net({4, 256, 256, 256, 256, 1}, 1);
    const Eigen::MatrixXd x = random_batch(batch, 4, 2);
    const Eigen::MatrixXd dy = Eigen::MatrixXd::Ones(batch, 1);
    NetGrads grads;
    grads.init_like(net.layers);
    for (auto _ : state) {
        Tape tape;
        benchmark::DoNotOptimize(net.forward(x, tape));
        net.backward(tape, dy, grads);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}

void bm_generate_spring(benchmark::State& state) {
    const auto sys = SystemSpec::make(SystemKind::SpringMass);
    const int n_traj = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_dataset(sys, n_traj, 200, 0.005, 42));
    }
    state.SetItemsProcessed(state.iterations() * n_traj * 200);
}

void bm_generate_pendulum(benchmark::State& state) {
    const auto sys = SystemSpec::make(SystemKind::Pendulum);
    const int n_traj = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_dataset(sys, n_traj, 200, 0.005, 42));
    }
    state.SetItemsProcessed(state.iterations() * n_traj * 200);
}

void bm_sample_delta(benchmark::State& state) {
    TransitionModel model(2, NoiseSchedule::linear(100), 5, 256, 3, 32);
    Rng rng(7);
    const std::vector<double> s{0.3, -0.8};
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_delta(model, s, 1.0, rng));
    }
    state.SetItemsProcessed(state.iterations());
}

void bm_stlsq(benchmark::State& state) {
    const auto sys = SystemSpec::make(SystemKind::Pendulum);
    const auto lib = FeatureLibrary::for_system(sys);
    const auto states = random_batch(static_cast<Eigen::Index>(state.range(0)), 2, 3);
    Eigen::VectorXd y(states.rows());
    for (Eigen::Index r = 0; r < states.rows(); ++r) {
        y(r) = 0.5 * states(r, 1) * states(r, 1) - 9.81 * std::cos(states(r, 0));
    }
    const Eigen::MatrixXd phi = lib.eval_batch(states);
    for (auto _ : state) {
        benchmark::DoNotOptimize(stlsq_fit(phi, y, {}));
    }
    state.SetItemsProcessed(state.iterations() * states.rows());
}

} // namespace

BENCHMARK(bm_dense_forward)->Arg(64)->Arg(1024);
BENCHMARK(bm_dense_backward)->Arg(64)->Arg(1024);
BENCHMARK(bm_generate_spring)->Arg(100);
BENCHMARK(bm_generate_pendulum)->Arg(100);
BENCHMARK(bm_sample_delta);
BENCHMARK(bm_stlsq)->Arg(10000);

BENCHMARK_MAIN();
