#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conslearn/systems.hpp"

namespace conslearn {

enum class NormMode { Raw, MinMax, Standardize };

std::string to_string(NormMode mode);
NormMode norm_mode_from_string(std::string_view name);

/// Per-dimension normalization parameters. MinMax stores (lo, hi), Standardize
/// stores (mean, std); Raw keeps both vectors empty.
struct NormStats {
    NormMode mode = NormMode::Raw;
    std::vector<double> a; ///< lo or mean
    std::vector<double> b; ///< hi or std

    double to_normalized(double x, int dim) const;
    double to_raw(double x, int dim) const;
};

struct SplitSpec {
    double train_fraction = 0.9;
    std::uint64_t seed = 42;
};

/// A batch of trajectories, stored row-major as B x T x D. `traj_len` is the
/// number of stored states per trajectory (the t = 0 row included).
struct TrajectoryBatch {
    SystemSpec system;
    int n_traj = 0;
    int traj_len = 0;
    int dim = 0;
    double dt = 0.005;
    double noise_sigma_fraction = 0.0;
    NormMode normalization = NormMode::Raw;
    NormStats norm_stats;
    /// "simulated" for integrator output, "generated" for model rollouts.
    std::string provenance = "simulated";
    std::uint64_t gen_seed = 0;
    std::uint64_t noise_seed = 0;
    std::vector<double> states;
    /// Analytic energy of each trajectory's clean t=0 state. Carried through
    /// noise/normalization so alignment always targets clean energies.
    std::vector<double> t0_energy;

    double* traj(int i) { return states.data() + static_cast<std::size_t>(i) * traj_len * dim; }
    const double* traj(int i) const {
        return states.data() + static_cast<std::size_t>(i) * traj_len * dim;
    }
    std::span<const double> state_at(int i, int t) const {
        return {traj(i) + static_cast<std::size_t>(t) * dim, static_cast<std::size_t>(dim)};
    }
    std::size_t n_states() const { return static_cast<std::size_t>(n_traj) * traj_len; }
};

/// Simulates n_traj trajectories of n_steps states each (dt apart) from
/// initial conditions drawn with per-trajectory child streams of `seed`.
/// Projectile and spring-mass use the closed-form propagator, the pendulum the
/// adaptive integrator.
TrajectoryBatch generate_dataset(const SystemSpec& sys, int n_traj, int n_steps,
                                 double dt, std::uint64_t seed,
                                 const IntegratorConfig& icfg = {});

/// Additive Gaussian noise, sigma_d = fraction * std_d of the clean batch.
TrajectoryBatch add_noise(const TrajectoryBatch& batch, double fraction,
                          std::uint64_t seed);

/// Rescales all states with statistics computed from the training rows that
/// `split` would select. The returned batch stores the stats for inversion.
TrajectoryBatch normalize(const TrajectoryBatch& batch, NormMode mode,
                          const SplitSpec& spec);

/// Applies existing stats (e.g. a model checkpoint's) to a raw batch.
TrajectoryBatch apply_normalization(const TrajectoryBatch& batch, const NormStats& stats);

/// Sorted training-trajectory indices under the seeded permutation.
std::vector<int> train_indices(int n_traj, const SplitSpec& spec);

/// Trajectory-level split; round(train_fraction * B) trajectories train.
std::pair<TrajectoryBatch, TrajectoryBatch> split(const TrajectoryBatch& batch,
                                                  const SplitSpec& spec);

/// Keeps the first n trajectories (used by the budget presets).
TrajectoryBatch take_prefix(const TrajectoryBatch& batch, int n);

void save_batch(const TrajectoryBatch& batch, const std::filesystem::path& path);
TrajectoryBatch load_batch(const std::filesystem::path& path);

} // namespace conslearn
