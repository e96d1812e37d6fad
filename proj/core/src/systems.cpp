#include "conslearn/systems.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace conslearn {

namespace {

void check_state(const SystemSpec& sys, std::span<const double> state, const char* who) {
    if (static_cast<int>(state.size()) != sys.state_dim) {
        throw InputError(std::string(who) + ": state has " + std::to_string(state.size()) +
                         " entries, expected " + std::to_string(sys.state_dim));
    }
    for (double v : state) {
        if (!std::isfinite(v)) {
            throw InputError(std::string(who) + ": non-finite state entry");
        }
    }
}

} // namespace

SystemSpec SystemSpec::make(SystemKind kind) {
    SystemSpec s;
    s.kind = kind;
    switch (kind) {
    case SystemKind::Projectile:
        s.state_dim = 4;
        s.dim_names = {"x", "y", "vx", "vy"};
        s.angular_dims = {};
        s.position_dims = {0, 1};
        s.velocity_dims = {2, 3};
        break;
    case SystemKind::Pendulum:
        s.state_dim = 2;
        s.dim_names = {"theta", "w"};
        s.angular_dims = {0};
        s.position_dims = {0};
        s.velocity_dims = {1};
        break;
    case SystemKind::SpringMass:
        s.state_dim = 2;
        s.dim_names = {"x", "v"};
        s.angular_dims = {};
        s.position_dims = {0};
        s.velocity_dims = {1};
        break;
    }
    return s;
}

SystemSpec SystemSpec::from_name(std::string_view name) {
    if (name == "projectile") return make(SystemKind::Projectile);
    if (name == "pendulum") return make(SystemKind::Pendulum);
    if (name == "spring-mass") return make(SystemKind::SpringMass);
    throw InputError("unknown system '" + std::string(name) +
                     "' (expected projectile, pendulum or spring-mass)");
}

std::string SystemSpec::name() const {
    switch (kind) {
    case SystemKind::Projectile: return "projectile";
    case SystemKind::Pendulum: return "pendulum";
    case SystemKind::SpringMass: return "spring-mass";
    }
    return "?";
}

double analytic_energy(const SystemSpec& sys, std::span<const double> state) {
    check_state(sys, state, "analytic_energy");
    switch (sys.kind) {
    case SystemKind::Projectile: {
        double vx = state[2], vy = state[3];
        return 0.5 * (vx * vx + vy * vy) + sys.g * state[1];
    }
    case SystemKind::Pendulum: {
        double th = state[0], w = state[1];
        return 0.5 * w * w - sys.g * std::cos(th);
    }
    case SystemKind::SpringMass: {
        double x = state[0], v = state[1];
        return 0.5 * sys.k * x * x + 0.5 * v * v;
    }
    }
    throw InputError("analytic_energy: bad system kind");
}

void step_exact(const SystemSpec& sys, std::span<const double> state, double dt,
                std::span<double> out) {
    check_state(sys, state, "step_exact");
    if (static_cast<int>(out.size()) != sys.state_dim) {
        throw InputError("step_exact: output span has wrong length");
    }
    if (!(dt >= 0.0) || !std::isfinite(dt)) {
        throw InputError("step_exact: dt must be finite and >= 0");
    }
    switch (sys.kind) {
    case SystemKind::Projectile: {
        double x = state[0], y = state[1], vx = state[2], vy = state[3];
        out[0] = x + vx * dt;
        out[1] = y + vy * dt - 0.5 * sys.g * dt * dt;
        out[2] = vx;
        out[3] = vy - sys.g * dt;
        return;
    }
    case SystemKind::SpringMass: {
        // Harmonic rotation at w0 = sqrt(k) in (x, v/w0) coordinates.
        double w0 = std::sqrt(sys.k);
        double c = std::cos(w0 * dt), s = std::sin(w0 * dt);
        double x = state[0], v = state[1];
        out[0] = x * c + (v / w0) * s;
        out[1] = v * c - x * w0 * s;
        return;
    }
    case SystemKind::Pendulum:
        throw ConfigError("step_exact: pendulum has no closed-form propagator");
    }
}

std::vector<double> step_exact(const SystemSpec& sys, std::span<const double> state,
                               double dt) {
    std::vector<double> out(static_cast<std::size_t>(sys.state_dim));
    step_exact(sys, state, dt, out);
    return out;
}

namespace {

// Right-hand side f(y). Small fixed-capacity buffers: state_dim <= 4.
using Vec4 = std::array<double, 4>;

inline void rhs(const SystemSpec& sys, const Vec4& y, Vec4& dy) {
    switch (sys.kind) {
    case SystemKind::Projectile:
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = 0.0;
        dy[3] = -sys.g;
        return;
    case SystemKind::Pendulum:
        dy[0] = y[1];
        dy[1] = -sys.g * std::sin(y[0]);
        return;
    case SystemKind::SpringMass:
        dy[0] = y[1];
        dy[1] = -sys.k * y[0];
        return;
    }
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - bhat, for the embedded 4th-order error estimate (e2 = 0).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

} // namespace

std::vector<double> integrate_rk45(const SystemSpec& sys, std::span<const double> s0,
                                   int n_steps, double dt, const IntegratorConfig& cfg) {
    check_state(sys, s0, "integrate_rk45");
    if (n_steps < 0) throw InputError("integrate_rk45: n_steps must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw InputError("integrate_rk45: dt must be finite and positive");
    }
    if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0)) {
        throw InputError("integrate_rk45: tolerances must be positive");
    }

    const int d = sys.state_dim;
    std::vector<double> out(static_cast<std::size_t>(n_steps + 1) * d);
    std::copy(s0.begin(), s0.end(), out.begin());
    if (n_steps == 0) return out;

    const double t_end = n_steps * dt;
    Vec4 y{}, ynew{}, k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, ytmp{};
    std::copy(s0.begin(), s0.end(), y.begin());
    rhs(sys, y, k1); // FSAL: k1 of the next step is k7 of the accepted one

    double t = 0.0;
    // Capping the internal step at the grid spacing keeps the cubic Hermite
    // dense output far below the step error (both ~h^4, h <= dt = 5e-3).
    const double h_max = dt;
    double h = h_max;
    double err_prev = 1.0;
    int next_out = 1;
    long n_internal = 0;

    while (next_out <= n_steps) {
        if (t + h > t_end) h = t_end - t;
        if (++n_internal > cfg.max_steps) {
            throw IntegrationError("integrate_rk45: exceeded max internal steps", t);
        }

        for (int i = 0; i < d; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        rhs(sys, ytmp, k2);
        for (int i = 0; i < d; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(sys, ytmp, k3);
        for (int i = 0; i < d; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(sys, ytmp, k4);
        for (int i = 0; i < d; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(sys, ytmp, k5);
        for (int i = 0; i < d; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                  a65 * k5[i]);
        rhs(sys, ytmp, k6);
        for (int i = 0; i < d; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                                  b6 * k6[i]);
        rhs(sys, ynew, k7);

        // Weighted RMS norm of the embedded error estimate.
        double err = 0.0;
        for (int i = 0; i < d; ++i) {
            double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                            e6 * k6[i] + e7 * k7[i]);
            double scale =
                cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            double q = e / scale;
            err += q * q;
        }
        err = std::sqrt(err / d);

        if (err <= 1.0 || h <= 1e-14 * std::max(1.0, std::abs(t))) {
            if (err > 1.0) {
                throw IntegrationError("integrate_rk45: step size underflow", t);
            }
            double t_new = t + h;
            // Emit dense output for every grid point inside (t, t_new].
            while (next_out <= n_steps) {
                double tq = next_out * dt;
                if (tq > t_new + 1e-12 * std::max(1.0, std::abs(t_new))) break;
                double th = h > 0.0 ? (tq - t) / h : 1.0;
                if (th > 1.0) th = 1.0;
                if (th < 0.0) th = 0.0;
                // Cubic Hermite on (y, k1) -> (ynew, k7).
                double h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
                double h10 = th * (1.0 - th) * (1.0 - th);
                double h01 = th * th * (3.0 - 2.0 * th);
                double h11 = th * th * (th - 1.0);
                double* row = out.data() + static_cast<std::size_t>(next_out) * d;
                for (int i = 0; i < d; ++i) {
                    row[i] = h00 * y[i] + h10 * h * k1[i] + h01 * ynew[i] +
                             h11 * h * k7[i];
                }
                ++next_out;
            }
            t = t_new;
            y = ynew;
            k1 = k7;

            // PI step controller (order 5, standard exponents).
            double e_clip = std::max(err, 1e-10);
            double fac = 0.9 * std::pow(e_clip, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            fac = std::clamp(fac, 0.2, 5.0);
            h = std::min(h * fac, h_max);
            err_prev = e_clip;
        } else {
            double fac = std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
            h *= fac;
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                throw IntegrationError("integrate_rk45: step size underflow", t);
            }
        }
    }

    for (double v : out) {
        if (!std::isfinite(v)) {
            throw IntegrationError("integrate_rk45: non-finite state produced", t);
        }
    }
    return out;
}

std::vector<double> sample_initial(const SystemSpec& sys, Rng& rng) {
    switch (sys.kind) {
    case SystemKind::Projectile: {
        double vx = rng.uniform(2.0, 15.0);
        double vy = rng.uniform(2.0, 15.0);
        return {0.0, 0.0, vx, vy};
    }
    case SystemKind::Pendulum: {
        constexpr double half_pi = std::numbers::pi / 2.0;
        double th = rng.uniform(-half_pi, half_pi);
        double w = rng.uniform(-3.0, 3.0);
        return {th, w};
    }
    case SystemKind::SpringMass: {
        double x = rng.uniform(-1.0, 1.0);
        double v = rng.uniform(-3.0, 3.0);
        return {x, v};
    }
    }
    throw InputError("sample_initial: bad system kind");
}

} // namespace conslearn
