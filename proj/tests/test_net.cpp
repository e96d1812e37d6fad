#include <doctest.h>

#include <cmath>

#include "conslearn/net.hpp"

using namespace conslearn;

namespace {

Eigen::MatrixXd random_rows(int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
    }
    return x;
}

} // namespace

TEST_CASE("silu and its derivative agree with the definition") {
    for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
        const double sig = 1.0 / (1.0 + std::exp(-x));
        CHECK(silu(x) == doctest::Approx(x * sig).epsilon(1e-14));
        const double h = 1e-6;
        const double fd = (silu(x + h) - silu(x - h)) / (2 * h);
        CHECK(silu_derivative(x) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("network construction and shapes") {
    DenseNet net({3, 16, 16, 2}, 5);
    CHECK(net.in_dim() == 3);
    CHECK(net.out_dim() == 2);
    CHECK(net.dims() == std::vector<int>{3, 16, 16, 2});
    CHECK(net.n_params() == 3u * 16 + 16 + 16u * 16 + 16 + 16u * 2 + 2);

    const auto x = random_rows(7, 3, 1);
    const auto y = net.forward(x);
    CHECK(y.rows() == 7);
    CHECK(y.cols() == 2);

    // Same seed, same weights; different seed, different weights.
    DenseNet net2({3, 16, 16, 2}, 5);
    CHECK(net.forward(x) == net2.forward(x));
    DenseNet net3({3, 16, 16, 2}, 6);
    CHECK(net.forward(x) != net3.forward(x));

    CHECK_THROWS_AS(DenseNet({3}, 1), ConfigError);
}

TEST_CASE("taped forward matches plain forward and backward passes the fd check") {
    DenseNet net({4, 12, 12, 3}, 9);
    const auto x = random_rows(6, 4, 2);
    Tape tape;
    CHECK(net.forward(x, tape) == net.forward(x));
    CHECK(fd_max_rel_err(net, x, 60, 77) < 1e-6);
}

TEST_CASE("backward input gradients pass a finite-difference probe") {
    DenseNet net({3, 10, 1}, 4);
    auto x = random_rows(5, 3, 8);
    Tape tape;
    const Eigen::MatrixXd y = net.forward(x, tape);
    NetGrads grads;
    grads.init_like(net.layers);
    const Eigen::MatrixXd dY = Eigen::MatrixXd::Ones(5, 1);
    Eigen::MatrixXd dX;
    net.backward(tape, dY, grads, &dX);
    REQUIRE(dX.rows() == 5);
    REQUIRE(dX.cols() == 3);

    const double h = 1e-6;
    for (int probe = 0; probe < 6; ++probe) {
        const Eigen::Index i = probe % 5, j = probe % 3;
        const double orig = x(i, j);
        x(i, j) = orig + h;
        const double up = net.forward(x).sum();
        x(i, j) = orig - h;
        const double dn = net.forward(x).sum();
        x(i, j) = orig;
        CHECK(dX(i, j) == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("a stale tape is rejected once a newer taped forward ran") {
    DenseNet net({2, 8, 1}, 3);
    const auto x = random_rows(4, 2, 5);
    Tape old_tape;
    net.forward(x, old_tape);
    Tape newer;
    net.forward(x, newer);
    NetGrads grads;
    grads.init_like(net.layers);
    const Eigen::MatrixXd dY = Eigen::MatrixXd::Ones(4, 1);
    CHECK_THROWS_AS(net.backward(old_tape, dY, grads), StateError);
    net.backward(newer, dY, grads); // the current tape still works

    DenseNet other({2, 8, 1}, 4);
    Tape foreign;
    other.forward(x, foreign);
    CHECK_THROWS_AS(net.backward(foreign, dY, grads), StateError);
}

TEST_CASE("parameters flatten and reload exactly") {
    DenseNet a({3, 8, 2}, 10);
    std::vector<double> flat;
    a.flatten_params(flat);
    CHECK(flat.size() == a.n_params());

    DenseNet b({3, 8, 2}, 11);
    b.load_params(flat);
    const auto x = random_rows(5, 3, 6);
    CHECK(a.forward(x) == b.forward(x));
    flat.pop_back();
    CHECK_THROWS_AS(b.load_params(flat), InputError);
}

TEST_CASE("adam reduces a simple quadratic objective") {
    DenseNet net({2, 8, 1}, 21);
    Adam adam(net, {});
    const auto x = random_rows(32, 2, 3);
    const Eigen::VectorXd target = x.col(0).cwiseProduct(x.col(1));

    auto loss_of = [&] {
        const Eigen::VectorXd y = net.forward(x).col(0);
        return (y - target).squaredNorm() / x.rows();
    };
    const double initial = loss_of();
    NetGrads grads;
    grads.init_like(net.layers);
    for (int it = 0; it < 200; ++it) {
        Tape tape;
        const Eigen::VectorXd y = net.forward(x, tape).col(0);
        const Eigen::MatrixXd dY = 2.0 / x.rows() * (y - target);
        grads.zero();
        net.backward(tape, dY, grads);
        adam.step(net, grads, 1e-2);
    }
    CHECK(adam.updates_done() == 200);
    CHECK(loss_of() < 0.2 * initial);
}

TEST_CASE("learning-rate schedule hand values") {
    LrSchedule s;
    s.kind = LrSchedule::Kind::Constant;
    s.base_lr = 3e-4;
    CHECK(s.lr_at(0) == 3e-4);
    CHECK(s.lr_at(1000) == 3e-4);

    LrSchedule w;
    w.kind = LrSchedule::Kind::LinearWarmupThenCosineRestarts;
    w.base_lr = 1.0;
    w.min_lr = 0.1;
    w.warmup_epochs = 4;
    w.restart_period = 10;
    w.period_multiplier = 2;
    // Linear ramp over the warmup epochs (floored away from zero).
    CHECK(w.lr_at(1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(w.lr_at(2) == doctest::Approx(0.5).epsilon(1e-12));
    // Cosine starts at base right after warmup.
    CHECK(w.lr_at(4) == doctest::Approx(1.0).epsilon(1e-12));
    // Halfway through the first period: midpoint of base and min.
    CHECK(w.lr_at(9) == doctest::Approx(0.55).epsilon(1e-12));
    // Restart after 10 epochs, then the period doubles to 20.
    CHECK(w.lr_at(14) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.lr_at(24) == doctest::Approx(0.55).epsilon(1e-12));
    for (int e = 0; e < 200; ++e) CHECK(w.lr_at(e) > 0.0);
    CHECK_THROWS_AS(w.lr_at(-1), InputError);
}

TEST_CASE("sinusoidal embedding is deterministic with unit-bounded entries") {
    SinusoidalEmbedding emb(8, 100.0);
    const auto a = emb.embed(17);
    const auto b = emb.embed(17);
    REQUIRE(a.size() == 8);
    CHECK(a == b);
    for (double v : a) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    // t = 0 embeds as interleaved (sin 0, cos 0) = (0, 1) pairs.
    const auto zero = emb.embed(0);
    for (int k = 0; k < 4; ++k) {
        CHECK(zero[static_cast<std::size_t>(2 * k)] == 0.0);
        CHECK(zero[static_cast<std::size_t>(2 * k + 1)] == 1.0);
    }
    CHECK(emb.embed(1) != emb.embed(2));
    CHECK_THROWS_AS(SinusoidalEmbedding(7, 100.0), ConfigError);
}
