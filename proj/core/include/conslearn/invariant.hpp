#pragma once

#include <memory>
#include <filesystem>

#include "conslearn/dataset.hpp"
#include "conslearn/net.hpp"
#include "conslearn/symreg.hpp"

namespace conslearn {

/// Weights of the conservation training objective:
///   consistency + lambda_var * hinge + lambda_align * alignment.
struct ConservationLossConfig {
    double lambda_var = 1.0;
    double var_epsilon = 0.1;
    double lambda_align = 0.2;
    /// Alignment targets come from clean t=0 energies even on noisy batches;
    /// set false to recompute energies from the (possibly noisy) stored states.
    bool clean_alignment_targets = true;
};

/// Mean squared change of the learned scalar between consecutive steps,
/// sum/(B*(T-1)); rows of `values` are trajectories.
double consistency_loss(const Eigen::MatrixXd& values);

/// lambda_var * max(0, epsilon - population variance of the t=0 values).
double variance_hinge(std::span<const double> initial_values,
                      const ConservationLossConfig& cfg);

/// Mean squared difference of batch z-scores of f and of the analytic energy
/// at t=0. Population statistics; stds below 1e-12 are degenerate.
double alignment_loss(std::span<const double> f0, std::span<const double> e0);

/// A scalar invariant model f(state). Subclasses own their parameters,
/// gradient accumulators and optimizer state.
class InvariantModel {
public:
    virtual ~InvariantModel() = default;

    virtual std::string kind() const = 0; ///< "cdn", "poly" or "se"
    virtual NormMode expected_normalization() const = 0;
    virtual int state_dim() const = 0;

    /// Batched evaluation; rows of `states` are states in the model's
    /// expected normalization.
    virtual Eigen::VectorXd values(const Eigen::MatrixXd& states) const = 0;

    virtual void zero_grads() = 0;
    /// Accumulates d(sum_i dvalues_i * f(states_i))/dparams.
    virtual void accumulate_value_grads(const Eigen::MatrixXd& states,
                                        const Eigen::VectorXd& dvalues) = 0;
    virtual void optimizer_step(double lr) = 0;

    virtual std::size_t n_params() const = 0;
    virtual void flatten_params(std::vector<double>& out) const = 0;
    virtual void load_params(std::span<const double> flat) = 0;
    /// Current gradient accumulators, flattened like the parameters.
    virtual void flatten_grads(std::vector<double>& out) const = 0;

    /// Evaluation on raw states: applies `norm_stats` first.
    Eigen::VectorXd values_raw(const Eigen::MatrixXd& raw_states) const;
    double value_raw(std::span<const double> raw_state) const;

    /// Stats of the training pipeline, kept for raw-state evaluation and
    /// serialized with checkpoints.
    NormStats norm_stats;
};

/// Unconstrained MLP invariant ("conservation discovery network"); expects
/// MinMax inputs.
class BlackBoxCdn final : public InvariantModel {
public:
    BlackBoxCdn(int state_dim, std::uint64_t seed, int width = 256, int n_hidden = 4,
                AdamConfig adam = {});

    std::string kind() const override { return "cdn"; }
    NormMode expected_normalization() const override { return NormMode::MinMax; }
    int state_dim() const override { return net.in_dim(); }
    Eigen::VectorXd values(const Eigen::MatrixXd& states) const override;
    void zero_grads() override;
    void accumulate_value_grads(const Eigen::MatrixXd& states,
                                const Eigen::VectorXd& dvalues) override;
    void optimizer_step(double lr) override;
    std::size_t n_params() const override { return net.n_params(); }
    void flatten_params(std::vector<double>& out) const override;
    void load_params(std::span<const double> flat) override;
    void flatten_grads(std::vector<double>& out) const override;

    DenseNet net;

private:
    NetGrads grads_;
    Adam adam_;
};

/// Linear model over the symbolic feature library, f(s) = w . phi(s);
/// expects raw inputs.
class PolynomialCdn final : public InvariantModel {
public:
    PolynomialCdn(const SystemSpec& sys, std::uint64_t seed, AdamConfig adam = {});

    std::string kind() const override { return "poly"; }
    NormMode expected_normalization() const override { return NormMode::Raw; }
    int state_dim() const override { return library.state_dim(); }
    Eigen::VectorXd values(const Eigen::MatrixXd& states) const override;
    void zero_grads() override;
    void accumulate_value_grads(const Eigen::MatrixXd& states,
                                const Eigen::VectorXd& dvalues) override;
    void optimizer_step(double lr) override;
    std::size_t n_params() const override { return static_cast<std::size_t>(w.size()); }
    void flatten_params(std::vector<double>& out) const override;
    void load_params(std::span<const double> flat) override;
    void flatten_grads(std::vector<double>& out) const override;

    FeatureLibrary library;
    Eigen::VectorXd w;

private:
    Eigen::VectorXd grad_;
    AdamVector adam_;
};

/// Separable energy H(s) = T_net(velocities) + V_net(positions); expects raw
/// inputs. Also provides input gradients, needed by the projection step.
class StructuredEnergyNet final : public InvariantModel {
public:
    StructuredEnergyNet(const SystemSpec& sys, std::uint64_t seed, int width = 128,
                        int n_hidden = 2, AdamConfig adam = {});

    std::string kind() const override { return "se"; }
    NormMode expected_normalization() const override { return NormMode::Raw; }
    int state_dim() const override { return dim_; }
    Eigen::VectorXd values(const Eigen::MatrixXd& states) const override;
    void zero_grads() override;
    void accumulate_value_grads(const Eigen::MatrixXd& states,
                                const Eigen::VectorXd& dvalues) override;
    void optimizer_step(double lr) override;
    std::size_t n_params() const override { return t_net.n_params() + v_net.n_params(); }
    void flatten_params(std::vector<double>& out) const override;
    void load_params(std::span<const double> flat) override;
    void flatten_grads(std::vector<double>& out) const override;

    /// H and dH/ds for every row of `states` (raw coordinates).
    void values_and_input_grads(const Eigen::MatrixXd& states, Eigen::VectorXd& h,
                                Eigen::MatrixXd& grads) const;
    double value_and_grad(std::span<const double> state, std::span<double> grad) const;

    DenseNet t_net; ///< velocity part
    DenseNet v_net; ///< position part
    std::vector<int> position_dims;
    std::vector<int> velocity_dims;

private:
    int dim_ = 0;
    NetGrads t_grads_, v_grads_;
    Adam t_adam_, v_adam_;
};

struct LossBreakdown {
    double total = 0.0;
    double consistency = 0.0;
    double hinge = 0.0;
    double alignment = 0.0;
};

/// Full-batch objective over every consecutive pair, with parameter gradients
/// accumulated into the model (zeroed first).
LossBreakdown total_loss(InvariantModel& model, const TrajectoryBatch& batch,
                         const ConservationLossConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct InvariantTrainOptions {
    int epochs = 300;
    /// 0 means one full pass over all training trajectories per epoch.
    int batches_per_epoch = 32;
    /// Trajectories per minibatch; the alignment term z-scores values over
    /// these, so it needs enough of them to see the batch energy ordering.
    int batch_traj = 64;
    /// Consecutive pairs sampled per trajectory per batch; 0 means all T-1.
    int pairs_per_traj = 16;
    LrSchedule schedule;
    std::uint64_t seed = 1;
    /// Validation-loss probe uses at most this many trajectories.
    int val_max_traj = 64;
};

/// Minibatch training on whole-trajectory batches. Deterministic per seed.
std::vector<EpochStats> train_invariant(InvariantModel& model,
                                        const TrajectoryBatch& train,
                                        const TrajectoryBatch& val,
                                        const ConservationLossConfig& cfg,
                                        const InvariantTrainOptions& opt);

/// f(s) for every state of the batch, in (trajectory, time) row order.
Eigen::VectorXd evaluate_invariant(const InvariantModel& model,
                                   const TrajectoryBatch& batch);

/// Central-difference check of total_loss parameter gradients.
double invariant_fd_max_rel_err(InvariantModel& model, const TrajectoryBatch& batch,
                                const ConservationLossConfig& cfg, int n_probes,
                                std::uint64_t seed);

void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochStats> history);

/// Provenance stored next to the weights in a checkpoint.
struct CheckpointInfo {
    std::string model_label; ///< cdn-aligned, cdn-noalign, poly-cdn, se
    std::string system;
    std::string dataset_tag;
    double noise_fraction = 0.0;
    int epochs = 0;
    std::uint64_t seed = 0;
    double lambda_align = 0.2;
};

void save_invariant_checkpoint(const InvariantModel& model, const CheckpointInfo& info,
                               const std::filesystem::path& path);

struct LoadedInvariant {
    std::unique_ptr<InvariantModel> model;
    CheckpointInfo info;
};

LoadedInvariant load_invariant_checkpoint(const std::filesystem::path& path);

} // namespace conslearn
