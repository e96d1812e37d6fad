#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conslearn/error.hpp"
#include "conslearn/rng.hpp"

namespace conslearn {

enum class SystemKind { Projectile, Pendulum, SpringMass };

/// Static description of one benchmark system: state layout, parameters and
/// which coordinates are angles (those get sin/cos features downstream).
struct SystemSpec {
    SystemKind kind = SystemKind::SpringMass;
    int state_dim = 0;
    double g = 9.81; ///< gravity, used by projectile and pendulum
    double k = 10.0; ///< spring constant, spring-mass only (unit mass)

    std::vector<std::string> dim_names;
    std::vector<int> angular_dims;   ///< indices of angle coordinates
    std::vector<int> position_dims;  ///< configuration part of the state
    std::vector<int> velocity_dims;  ///< velocity/momentum part of the state

    static SystemSpec make(SystemKind kind);
    /// Accepts "projectile", "pendulum", "spring-mass".
    static SystemSpec from_name(std::string_view name);
    std::string name() const;
};

/// Energy integral of the system (per unit mass):
///   projectile  E = (vx^2 + vy^2)/2 + g y
///   pendulum    H = w^2/2 - g cos(theta)
///   spring-mass E = k x^2/2 + v^2/2
double analytic_energy(const SystemSpec& sys, std::span<const double> state);

/// One closed-form step of size dt >= 0. Projectile follows the ballistic arc,
/// spring-mass the exact phase rotation. Pendulum has no closed form and
/// throws ConfigError.
void step_exact(const SystemSpec& sys, std::span<const double> state, double dt,
                std::span<double> out);
std::vector<double> step_exact(const SystemSpec& sys, std::span<const double> state,
                               double dt);

struct IntegratorConfig {
    double rtol = 1e-12;
    double atol = 1e-14;
    /// Internal adaptive steps allowed per trajectory before giving up.
    long max_steps = 20'000'000;
};

/// Integrates n_steps grid steps of size dt with an adaptive Dormand-Prince
/// 5(4) scheme and dense output on the grid. Returns (n_steps + 1) * state_dim
/// values, row t holding the state at time t * dt (row 0 is the input state).
std::vector<double> integrate_rk45(const SystemSpec& sys, std::span<const double> s0,
                                   int n_steps, double dt,
                                   const IntegratorConfig& cfg = {});

/// Draws an initial condition from the system's sampling box:
///   projectile  x = y = 0, vx, vy ~ U[2, 15]
///   pendulum    theta ~ U[-pi/2, pi/2], w ~ U[-3, 3]  (libration regime)
///   spring-mass x ~ U[-1, 1], v ~ U[-3, 3]
std::vector<double> sample_initial(const SystemSpec& sys, Rng& rng);

} // namespace conslearn
