#include <doctest.h>

#include <cmath>
#include <numbers>

#include "conslearn/systems.hpp"

using namespace conslearn;

namespace {
const SystemSpec kProjectile = SystemSpec::make(SystemKind::Projectile);
const SystemSpec kPendulum = SystemSpec::make(SystemKind::Pendulum);
const SystemSpec kSpring = SystemSpec::make(SystemKind::SpringMass);
} // namespace

TEST_CASE("system specs expose the expected layouts") {
    CHECK(kProjectile.state_dim == 4);
    CHECK(kPendulum.state_dim == 2);
    CHECK(kSpring.state_dim == 2);
    CHECK(kProjectile.g == 9.81);
    CHECK(kSpring.k == 10.0);
    CHECK(kPendulum.angular_dims == std::vector<int>{0});
    CHECK(kProjectile.angular_dims.empty());
    CHECK(SystemSpec::from_name("spring-mass").kind == SystemKind::SpringMass);
    CHECK_THROWS_AS(SystemSpec::from_name("atwood"), InputError);
}

TEST_CASE("analytic energies match hand values") {
    // E = (vx^2 + vy^2)/2 + g y with g = 9.81
    const double ep = analytic_energy(kProjectile, std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(ep == doctest::Approx(32.12).epsilon(1e-12));

    // H = w^2/2 - g cos(theta)
    const double hp = analytic_energy(kPendulum, std::vector<double>{0.5, 1.2});
    CHECK(hp == doctest::Approx(-7.889084932144557).epsilon(1e-12));

    // E = k x^2/2 + v^2/2 with k = 10
    const double es = analytic_energy(kSpring, std::vector<double>{0.5, 1.0});
    CHECK(es == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("projectile exact step follows the ballistic arc") {
    const std::vector<double> s0{0.0, 0.0, 3.0, 4.0};
    const double dt = 0.1;
    const auto s1 = step_exact(kProjectile, s0, dt);
    CHECK(s1[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(s1[1] == doctest::Approx(0.4 - 0.5 * 9.81 * 0.01).epsilon(1e-14));
    CHECK(s1[2] == 3.0);
    CHECK(s1[3] == doctest::Approx(4.0 - 9.81 * 0.1).epsilon(1e-14));
    CHECK(analytic_energy(kProjectile, s1) ==
          doctest::Approx(analytic_energy(kProjectile, s0)).epsilon(1e-13));
}

TEST_CASE("spring-mass exact step is the phase rotation") {
    const double w0 = std::sqrt(10.0);
    const std::vector<double> s0{1.0, 0.0};
    const double dt = 0.3;
    const auto s1 = step_exact(kSpring, s0, dt);
    CHECK(s1[0] == doctest::Approx(std::cos(w0 * dt)).epsilon(1e-13));
    CHECK(s1[1] == doctest::Approx(-w0 * std::sin(w0 * dt)).epsilon(1e-13));

    // Two half steps compose to one full step.
    const auto half = step_exact(kSpring, s0, dt / 2);
    const auto full = step_exact(kSpring, half, dt / 2);
    CHECK(full[0] == doctest::Approx(s1[0]).epsilon(1e-13));
    CHECK(full[1] == doctest::Approx(s1[1]).epsilon(1e-13));
}

TEST_CASE("pendulum has no closed-form step") {
    CHECK_THROWS_AS(step_exact(kPendulum, std::vector<double>{0.1, 0.0}, 0.01),
                    ConfigError);
}

TEST_CASE("adaptive integrator conserves pendulum energy to near roundoff") {
    const std::vector<double> s0{1.2, 0.7};
    const int n_steps = 400;
    const auto grid = integrate_rk45(kPendulum, s0, n_steps, 0.005);
    REQUIRE(grid.size() == static_cast<std::size_t>((n_steps + 1) * 2));
    const double e0 = analytic_energy(kPendulum, s0);
    double worst = 0.0;
    for (int t = 0; t <= n_steps; ++t) {
        std::span<const double> s(grid.data() + 2 * t, 2);
        worst = std::max(worst, std::abs(analytic_energy(kPendulum, s) - e0));
    }
    CHECK(worst < 1e-9);
    // Row 0 is the initial state itself.
    CHECK(grid[0] == s0[0]);
    CHECK(grid[1] == s0[1]);
}

TEST_CASE("small-amplitude pendulum matches the harmonic solution") {
    const double theta0 = 1e-4;
    const std::vector<double> s0{theta0, 0.0};
    const double dt = 0.01;
    const int n_steps = 100;
    const auto grid = integrate_rk45(kPendulum, s0, n_steps, dt);
    const double w = std::sqrt(9.81);
    for (int t = 0; t <= n_steps; t += 20) {
        const double expected = theta0 * std::cos(w * t * dt);
        CHECK(grid[static_cast<std::size_t>(2 * t)] ==
              doctest::Approx(expected).epsilon(5e-5));
    }
}

TEST_CASE("initial conditions respect the sampling boxes") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto p = sample_initial(kProjectile, rng);
        CHECK(p[0] == 0.0);
        CHECK(p[1] == 0.0);
        CHECK(p[2] >= 2.0);
        CHECK(p[2] <= 15.0);
        CHECK(p[3] >= 2.0);
        CHECK(p[3] <= 15.0);

        const auto q = sample_initial(kPendulum, rng);
        CHECK(std::abs(q[0]) <= std::numbers::pi / 2);
        CHECK(std::abs(q[1]) <= 3.0);

        const auto s = sample_initial(kSpring, rng);
        CHECK(std::abs(s[0]) <= 1.0);
        CHECK(std::abs(s[1]) <= 3.0);
    }
}
