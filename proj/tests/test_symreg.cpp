#include <doctest.h>

#include <cmath>

#include "conslearn/symreg.hpp"
#include "conslearn/dataset.hpp"

using namespace conslearn;

namespace {

const SystemSpec kProjectile = SystemSpec::make(SystemKind::Projectile);
const SystemSpec kPendulum = SystemSpec::make(SystemKind::Pendulum);
const SystemSpec kSpring = SystemSpec::make(SystemKind::SpringMass);

Eigen::MatrixXd sampled_states(const SystemSpec& sys, int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, sys.state_dim);
    for (int r = 0; r < n; ++r) {
        const auto s = sample_initial(sys, rng);
        for (int d = 0; d < sys.state_dim; ++d) x(r, d) = s[static_cast<std::size_t>(d)];
    }
    return x;
}

int term_index(const FeatureLibrary& lib, const std::string& name) {
    for (int m = 0; m < lib.size(); ++m) {
        if (lib.terms()[static_cast<std::size_t>(m)].name(lib.dim_names()) == name) {
            return m;
        }
    }
    return -1;
}

} // namespace

TEST_CASE("library sizes follow constant + linear + quadratic + trig") {
    CHECK(FeatureLibrary::for_system(kSpring).size() == 6);    // 1 + 2 + 3
    CHECK(FeatureLibrary::for_system(kPendulum).size() == 8);  // 1 + 2 + 3 + sin + cos
    CHECK(FeatureLibrary::for_system(kProjectile).size() == 15); // 1 + 4 + 10
}

TEST_CASE("feature evaluation hand values") {
    const auto lib = FeatureLibrary::for_system(kPendulum);
    std::vector<double> phi(static_cast<std::size_t>(lib.size()));
    const std::vector<double> s{0.5, -1.5}; // theta, omega
    lib.eval(s, phi);
    CHECK(phi[0] == 1.0);
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "theta"))] == 0.5);
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "w"))] == -1.5);
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "theta^2"))] == 0.25);
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "theta*w"))] == -0.75);
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "w^2"))] == 2.25);
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "sin(theta)"))] ==
          doctest::Approx(std::sin(0.5)).epsilon(1e-14));
    CHECK(phi[static_cast<std::size_t>(term_index(lib, "cos(theta)"))] ==
          doctest::Approx(std::cos(0.5)).epsilon(1e-14));

    const auto batch = lib.eval_batch(sampled_states(kPendulum, 5, 3));
    CHECK(batch.rows() == 5);
    CHECK(batch.cols() == 8);
}

TEST_CASE("stlsq recovers planted sparse coefficients under noise") {
    const auto lib = FeatureLibrary::for_system(kSpring);
    const auto states = sampled_states(kSpring, 4000, 11);
    const auto phi = lib.eval_batch(states);

    Eigen::VectorXd w_true = Eigen::VectorXd::Zero(lib.size());
    w_true(term_index(lib, "x^2")) = 5.0;
    w_true(term_index(lib, "v^2")) = 0.5;
    Eigen::VectorXd y = phi * w_true;
    Rng rng(13);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 1e-4 * rng.normal();

    const Eigen::VectorXd w = stlsq_fit(phi, y, {});
    for (int m = 0; m < lib.size(); ++m) {
        if (w_true(m) == 0.0) {
            CHECK(w(m) == 0.0); // pruned terms come back as exact zeros
        } else {
            CHECK(w(m) == doctest::Approx(w_true(m)).epsilon(1e-3));
        }
    }
}

TEST_CASE("stlsq keeps sub-threshold targets empty rather than inventing terms") {
    const auto lib = FeatureLibrary::for_system(kSpring);
    const auto phi = lib.eval_batch(sampled_states(kSpring, 500, 7));
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(phi.rows());
    const Eigen::VectorXd w = stlsq_fit(phi, y, {});
    CHECK(w.isZero(0.0));
}

TEST_CASE("analytic energies are exactly representable in each library") {
    struct Case {
        const SystemSpec& sys;
        std::uint64_t seed;
    };
    for (const auto& c : {Case{kProjectile, 3}, Case{kPendulum, 4}, Case{kSpring, 5}}) {
        const auto lib = FeatureLibrary::for_system(c.sys);
        const auto states = sampled_states(c.sys, 2000, c.seed);
        const auto phi = lib.eval_batch(states);
        Eigen::VectorXd y(states.rows());
        for (Eigen::Index r = 0; r < states.rows(); ++r) {
            std::vector<double> s(static_cast<std::size_t>(c.sys.state_dim));
            for (int d = 0; d < c.sys.state_dim; ++d) s[static_cast<std::size_t>(d)] = states(r, d);
            y(r) = analytic_energy(c.sys, s);
        }
        const Eigen::VectorXd w = stlsq_fit(phi, y, {});
        CHECK((phi * w - y).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("equation rendering follows library order with normalized signs") {
    const auto lib = FeatureLibrary::for_system(kPendulum);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(lib.size());
    w(term_index(lib, "w^2")) = 0.5;
    w(term_index(lib, "cos(theta)")) = -9.81;
    const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
    CHECK(format_equation(lib, ws, 2) == "0.50*w^2 - 9.81*cos(theta)");

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(lib.size());
    const std::span<const double> zs(zero.data(), static_cast<std::size_t>(zero.size()));
    CHECK(format_equation(lib, zs, 2) == "0");

    const std::string json = equation_json(lib, ws);
    CHECK(json.find("w^2") != std::string::npos);
    CHECK(json.find("-9.81") != std::string::npos);
}
