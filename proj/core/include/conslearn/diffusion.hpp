#pragma once

#include "conslearn/invariant.hpp"

namespace conslearn {

/// Linear beta schedule with precomputed alphas and cumulative products.
struct NoiseSchedule {
    int n_steps = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    static NoiseSchedule linear(int n_steps, double beta_start = 1e-4,
                                double beta_end = 0.02);
};

/// Conditional denoiser over one-step state deltas in standardized
/// coordinates. Input rows are [noised delta | s_t | f(s_t) | embed(t)].
class TransitionModel {
public:
    TransitionModel() = default;
    TransitionModel(int state_dim, NoiseSchedule schedule, std::uint64_t seed,
                    int width = 256, int n_hidden = 3, int embed_dim = 32);

    int state_dim() const { return state_dim_; }
    int input_dim() const { return 2 * state_dim_ + 1 + embedding.dim; }

    /// Predicted noise for a batch of (noised delta, condition, diffusion step)
    /// rows; `x` is N x D, `cond_state` N x D, `f` length N, `t` length N.
    Eigen::MatrixXd predict_noise(const Eigen::MatrixXd& x,
                                  const Eigen::MatrixXd& cond_state,
                                  const Eigen::VectorXd& f,
                                  const std::vector<int>& t) const;

    DenseNet denoiser;
    SinusoidalEmbedding embedding;
    NoiseSchedule schedule;
    /// Standardize stats mapping raw states into model coordinates.
    NormStats state_stats;

private:
    int state_dim_ = 0;
};

/// x_t = sqrt(abar_t) * delta + sqrt(1 - abar_t) * noise, noise ~ N(0, I).
void forward_diffuse(std::span<const double> delta, int t, const NoiseSchedule& schedule,
                     Rng& rng, std::span<double> x_out, std::span<double> noise_out);

struct DdpmTrainOptions {
    int epochs = 30;
    int batches_per_epoch = 100;
    int batch_size = 256;
    double lr = 1e-3;
    std::uint64_t seed = 5;
    /// Size of the fixed validation probe re-scored each epoch.
    int val_samples = 2048;
    /// Control experiment: conditions each delta on an unrelated state.
    bool shuffle_conditioning = false;
};

/// Noise-prediction training. `train`/`val` must be standardized; `cdn`
/// supplies the conditioning scalar from the raw states.
std::vector<EpochStats> train_ddpm(TransitionModel& model, const TrajectoryBatch& train,
                                   const TrajectoryBatch& val, const InvariantModel& cdn,
                                   const DdpmTrainOptions& opt);

/// Ancestral reverse-process sample of one delta (standardized coordinates).
Eigen::VectorXd sample_delta(const TransitionModel& model, std::span<const double> s_std,
                             double f_t, Rng& rng);

/// The projection formula on precomputed (value, gradient):
///   s' = s - (h - h0) * grad / (|grad|^2 + eps).
std::vector<double> project_step(std::span<const double> s, double h,
                                 std::span<const double> grad, double h0, double eps);

/// One first-order step toward the level set {H_SE = H0}, evaluating the
/// energy model at s.
std::vector<double> project_energy(std::span<const double> s_raw, double h0,
                                   const StructuredEnergyNet& se, double eps = 1e-8);

struct RolloutConfig {
    int horizon = 200;
    int projection_steps_per_sample = 1;
    double projection_epsilon = 1e-8;
};

/// Autoregressive generation from one raw initial state; returns
/// (horizon + 1) x D raw states, row 0 = s0.
std::vector<double> rollout(const TransitionModel& model, std::span<const double> s0_raw,
                            const RolloutConfig& cfg, const InvariantModel& cdn,
                            const StructuredEnergyNet& se, Rng& rng);

/// Rollouts from the first n_rollouts initial states of `truth` (raw batch),
/// advanced in lockstep so the denoiser runs on whole-batch rows. Trajectory i
/// consumes its own child stream of `seed`, so its noise draws do not depend
/// on n_rollouts.
TrajectoryBatch rollout_batch(const TransitionModel& model, const TrajectoryBatch& truth,
                              int n_rollouts, const RolloutConfig& cfg,
                              const InvariantModel& cdn, const StructuredEnergyNet& se,
                              std::uint64_t seed);

void save_transition_checkpoint(const TransitionModel& model, const CheckpointInfo& info,
                                const std::filesystem::path& path);

struct LoadedTransition {
    TransitionModel model;
    CheckpointInfo info;
};

LoadedTransition load_transition_checkpoint(const std::filesystem::path& path);

} // namespace conslearn
