#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conslearn/systems.hpp"

namespace conslearn {

/// One symbolic candidate term: 1, s_i, s_i*s_j, sin(s_i) or cos(s_i).
struct FeatureTerm {
    enum class Kind { One, Linear, Quadratic, Sin, Cos };
    Kind kind = Kind::One;
    int i = -1;
    int j = -1;

    std::string name(const std::vector<std::string>& dim_names) const;
};

/// Ordered candidate-term library: constant, all state variables, all degree-2
/// monomials (i <= j, lexicographic), then sin/cos of each angular dimension.
class FeatureLibrary {
public:
    FeatureLibrary() = default;
    static FeatureLibrary for_system(const SystemSpec& sys);

    int size() const { return static_cast<int>(terms_.size()); }
    int state_dim() const { return dim_; }
    const std::vector<FeatureTerm>& terms() const { return terms_; }
    const std::vector<std::string>& dim_names() const { return dim_names_; }

    void eval(std::span<const double> state, std::span<double> phi) const;
    /// Rows are states; returns the N x M feature matrix.
    Eigen::MatrixXd eval_batch(const Eigen::MatrixXd& states) const;

private:
    std::vector<FeatureTerm> terms_;
    std::vector<std::string> dim_names_;
    int dim_ = 0;
};

/// Feature matrix for raw states (columns follow the library term order).
Eigen::MatrixXd build_features(const SystemSpec& sys, const Eigen::MatrixXd& states);

struct StlsqConfig {
    double threshold = 0.05;
    double ridge_lambda = 1e-10;
    int max_iterations = 20;
};

/// Sequentially thresholded least squares: alternate ridge solves on the
/// active set with zeroing of coefficients below threshold. Inactive terms
/// come back as exact zeros.
Eigen::VectorXd stlsq_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                          const StlsqConfig& cfg = {});

/// "5.00*x^2 + 0.50*v^2" style rendering: nonzero terms in library order,
/// fixed decimals, signs normalized.
std::string format_equation(const FeatureLibrary& lib, std::span<const double> weights,
                            int decimals);

/// JSON rendering of the fitted equation (term descriptors + weights).
std::string equation_json(const FeatureLibrary& lib, std::span<const double> weights);

} // namespace conslearn
