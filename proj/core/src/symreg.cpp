#include "conslearn/symreg.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "conslearn/error.hpp"

namespace conslearn {

std::string FeatureTerm::name(const std::vector<std::string>& dim_names) const {
    switch (kind) {
    case Kind::One: return "1";
    case Kind::Linear: return dim_names.at(static_cast<std::size_t>(i));
    case Kind::Quadratic:
        if (i == j) return dim_names.at(static_cast<std::size_t>(i)) + "^2";
        return dim_names.at(static_cast<std::size_t>(i)) + "*" +
               dim_names.at(static_cast<std::size_t>(j));
    case Kind::Sin: return "sin(" + dim_names.at(static_cast<std::size_t>(i)) + ")";
    case Kind::Cos: return "cos(" + dim_names.at(static_cast<std::size_t>(i)) + ")";
    }
    return "?";
}

FeatureLibrary FeatureLibrary::for_system(const SystemSpec& sys) {
    FeatureLibrary lib;
    lib.dim_ = sys.state_dim;
    lib.dim_names_ = sys.dim_names;
    lib.terms_.push_back({FeatureTerm::Kind::One, -1, -1});
    for (int i = 0; i < sys.state_dim; ++i) {
        lib.terms_.push_back({FeatureTerm::Kind::Linear, i, -1});
    }
    for (int i = 0; i < sys.state_dim; ++i) {
        for (int j = i; j < sys.state_dim; ++j) {
            lib.terms_.push_back({FeatureTerm::Kind::Quadratic, i, j});
        }
    }
    for (int i : sys.angular_dims) {
        lib.terms_.push_back({FeatureTerm::Kind::Sin, i, -1});
        lib.terms_.push_back({FeatureTerm::Kind::Cos, i, -1});
    }
    return lib;
}

void FeatureLibrary::eval(std::span<const double> state, std::span<double> phi) const {
    if (static_cast<int>(state.size()) != dim_) {
        throw InputError("FeatureLibrary: state has wrong dimension");
    }
    if (phi.size() != terms_.size()) {
        throw InputError("FeatureLibrary: output span has wrong length");
    }
    for (std::size_t m = 0; m < terms_.size(); ++m) {
        const FeatureTerm& t = terms_[m];
        switch (t.kind) {
        case FeatureTerm::Kind::One: phi[m] = 1.0; break;
        case FeatureTerm::Kind::Linear: phi[m] = state[static_cast<std::size_t>(t.i)]; break;
        case FeatureTerm::Kind::Quadratic:
            phi[m] = state[static_cast<std::size_t>(t.i)] *
                     state[static_cast<std::size_t>(t.j)];
            break;
        case FeatureTerm::Kind::Sin: phi[m] = std::sin(state[static_cast<std::size_t>(t.i)]); break;
        case FeatureTerm::Kind::Cos: phi[m] = std::cos(state[static_cast<std::size_t>(t.i)]); break;
        }
    }
}

Eigen::MatrixXd FeatureLibrary::eval_batch(const Eigen::MatrixXd& states) const {
    if (states.cols() != dim_) {
        throw InputError("FeatureLibrary: states have wrong dimension");
    }
    const auto n = states.rows();
    Eigen::MatrixXd phi(n, size());
    for (int m = 0; m < size(); ++m) {
        const FeatureTerm& t = terms_[static_cast<std::size_t>(m)];
        switch (t.kind) {
        case FeatureTerm::Kind::One: phi.col(m).setOnes(); break;
        case FeatureTerm::Kind::Linear: phi.col(m) = states.col(t.i); break;
        case FeatureTerm::Kind::Quadratic:
            phi.col(m) = states.col(t.i).cwiseProduct(states.col(t.j));
            break;
        case FeatureTerm::Kind::Sin: phi.col(m) = states.col(t.i).array().sin(); break;
        case FeatureTerm::Kind::Cos: phi.col(m) = states.col(t.i).array().cos(); break;
        }
    }
    return phi;
}

Eigen::MatrixXd build_features(const SystemSpec& sys, const Eigen::MatrixXd& states) {
    return FeatureLibrary::for_system(sys).eval_batch(states);
}

Eigen::VectorXd stlsq_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                          const StlsqConfig& cfg) {
    if (features.rows() != target.size()) {
        throw InputError("stlsq_fit: features and target row counts differ");
    }
    if (features.rows() < 1 || features.cols() < 1) {
        throw InputError("stlsq_fit: empty problem");
    }
    if (cfg.threshold < 0.0 || cfg.ridge_lambda < 0.0 || cfg.max_iterations < 1) {
        throw InputError("stlsq_fit: bad config");
    }

    const auto m = static_cast<int>(features.cols());
    // Streaming normal equations: one pass builds G = X'X and c = X'y.
    Eigen::MatrixXd gram = features.transpose() * features;
    Eigen::VectorXd corr = features.transpose() * target;

    std::vector<int> active(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) active[static_cast<std::size_t>(k)] = k;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        if (active.empty()) break;
        const auto na = static_cast<int>(active.size());
        Eigen::MatrixXd g(na, na);
        Eigen::VectorXd c(na);
        for (int r = 0; r < na; ++r) {
            c(r) = corr(active[static_cast<std::size_t>(r)]);
            for (int s = 0; s < na; ++s) {
                g(r, s) = gram(active[static_cast<std::size_t>(r)],
                               active[static_cast<std::size_t>(s)]);
            }
        }
        g.diagonal().array() += cfg.ridge_lambda;

        Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
            if (cfg.ridge_lambda == 0.0) {
                throw NumericError(
                    "stlsq_fit: singular normal equations; set ridge_lambda > 0");
            }
        }
        Eigen::VectorXd wa = ldlt.solve(c);
        if (!wa.allFinite()) {
            throw NumericError("stlsq_fit: non-finite solution; increase ridge_lambda");
        }

        std::vector<int> next;
        next.reserve(active.size());
        for (int r = 0; r < na; ++r) {
            if (std::abs(wa(r)) >= cfg.threshold) next.push_back(active[static_cast<std::size_t>(r)]);
        }
        w.setZero();
        for (int r = 0; r < na; ++r) {
            if (std::abs(wa(r)) >= cfg.threshold) w(active[static_cast<std::size_t>(r)]) = wa(r);
        }
        if (next == active) break;
        active = std::move(next);
    }
    return w;
}

std::string format_equation(const FeatureLibrary& lib, std::span<const double> weights,
                            int decimals) {
    if (static_cast<int>(weights.size()) != lib.size()) {
        throw InputError("format_equation: weights length mismatch");
    }
    if (decimals < 0 || decimals > 17) {
        throw InputError("format_equation: decimals out of range");
    }
    std::string out;
    char buf[64];
    for (int k = 0; k < lib.size(); ++k) {
        double v = weights[static_cast<std::size_t>(k)];
        if (v == 0.0) continue;
        double mag = std::abs(v);
        std::snprintf(buf, sizeof(buf), "%.*f", decimals, mag);
        const FeatureTerm& term = lib.terms()[static_cast<std::size_t>(k)];
        std::string body = buf;
        if (term.kind != FeatureTerm::Kind::One) {
            body += "*" + term.name(lib.dim_names());
        }
        if (out.empty()) {
            out = (v < 0.0 ? "-" : "") + body;
        } else {
            out += (v < 0.0 ? " - " : " + ") + body;
        }
    }
    if (out.empty()) return "0";
    return out;
}

std::string equation_json(const FeatureLibrary& lib, std::span<const double> weights) {
    if (static_cast<int>(weights.size()) != lib.size()) {
        throw InputError("equation_json: weights length mismatch");
    }
    nlohmann::json terms = nlohmann::json::array();
    for (int k = 0; k < lib.size(); ++k) {
        const FeatureTerm& t = lib.terms()[static_cast<std::size_t>(k)];
        terms.push_back({{"term", t.name(lib.dim_names())},
                         {"weight", weights[static_cast<std::size_t>(k)]}});
    }
    nlohmann::json doc{{"terms", terms},
                       {"equation", format_equation(lib, weights, 2)}};
    return doc.dump(2);
}

} // namespace conslearn
