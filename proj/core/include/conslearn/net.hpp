#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "conslearn/error.hpp"
#include "conslearn/rng.hpp"

namespace conslearn {

/// silu(x) = x * sigmoid(x); the only hidden activation used here.
double silu(double x);
double silu_derivative(double x);

struct DenseLayer {
    Eigen::MatrixXd W; ///< out x in
    Eigen::VectorXd b;
};

/// Activations recorded by a tape-building forward pass. A tape is consumed by
/// exactly the forward call that produced it; the serial number catches reuse.
struct Tape {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;  ///< pre-activations per layer
    std::vector<Eigen::MatrixXd> post; ///< post-activations per hidden layer
    std::uint64_t serial = 0;
};

struct NetGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    void init_like(const std::vector<DenseLayer>& layers);
    void zero();
};

/// Fully-connected net, SiLU hidden activations, identity output layer.
/// Batched rows-are-samples interface; all math in double precision.
class DenseNet {
public:
    DenseNet() = default;
    /// dims = {in, hidden..., out}; weights ~ U[-a, a], a = sqrt(6/(fan_in+fan_out)).
    DenseNet(const std::vector<int>& dims, std::uint64_t seed);

    int in_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
    int out_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }
    std::vector<int> dims() const;
    std::size_t n_params() const;

    /// Plain batched evaluation (no tape).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
    /// Evaluation that records activations for a following backward().
    Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Tape& tape) const;
    /// Accumulates parameter gradients of sum_ij dY_ij * Y_ij into `grads`;
    /// optionally also returns the gradient with respect to the input rows.
    void backward(const Tape& tape, const Eigen::MatrixXd& dY, NetGrads& grads,
                  Eigen::MatrixXd* dX = nullptr) const;

    void flatten_params(std::vector<double>& out) const;
    void load_params(std::span<const double> flat);

    std::vector<DenseLayer> layers;

private:
    mutable std::uint64_t forward_serial_ = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over a DenseNet's tensors. Moments live here; step() applies one
/// update with an externally scheduled learning rate.
class Adam {
public:
    Adam() = default;
    Adam(const DenseNet& net, AdamConfig cfg);
    void step(DenseNet& net, const NetGrads& grads, double lr);
    std::int64_t updates_done() const { return t_; }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<Eigen::MatrixXd> mW_, vW_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

/// Adam for a flat coefficient vector (the polynomial model).
class AdamVector {
public:
    AdamVector() = default;
    AdamVector(int n, AdamConfig cfg);
    void step(Eigen::VectorXd& w, const Eigen::VectorXd& g, double lr);

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    Eigen::VectorXd m_, v_;
};

/// Learning-rate schedule per epoch: either constant, or a linear warmup into
/// cosine annealing with warm restarts (periods growing geometrically).
struct LrSchedule {
    enum class Kind { Constant, LinearWarmupThenCosineRestarts };

    Kind kind = Kind::Constant;
    double base_lr = 1e-3;
    double min_lr = 0.0;
    int warmup_epochs = 0;
    int restart_period = 100;
    int period_multiplier = 2;

    /// Strictly positive for every epoch >= 0.
    double lr_at(int epoch) const;
};

/// Classic sin/cos positional features of an integer timestep.
struct SinusoidalEmbedding {
    int dim = 32;
    double max_period = 10000.0;

    SinusoidalEmbedding() = default;
    SinusoidalEmbedding(int dim, double max_period = 10000.0);

    void embed(std::int64_t t, std::span<double> out) const;
    std::vector<double> embed(std::int64_t t) const;
};

/// Central-difference check of backward() on the scalar probe loss
/// L = 0.5 * |forward(X)|^2. Perturbs `n_probes` randomly chosen parameter
/// entries and input entries each; returns the worst relative error.
double fd_max_rel_err(DenseNet& net, const Eigen::MatrixXd& X, int n_probes,
                      std::uint64_t seed);

} // namespace conslearn
