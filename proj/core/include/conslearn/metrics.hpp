#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conslearn/dataset.hpp"

namespace conslearn {

/// One evaluated experiment arm; optionals stay empty when a metric does not
/// apply (e.g. rollout columns for a pure invariant eval).
struct MetricsReport {
    std::string system;
    std::string model;
    double noise_fraction = 0.0;
    std::optional<double> r2;
    std::optional<double> spearman_rho;
    std::optional<double> rollout_mse;
    std::optional<double> sigma_true;
    std::optional<double> sigma_gen;
    std::optional<double> ratio;
    std::uint64_t seed = 0;
    int n_traj = 0;
    int epochs = 0;
    /// Diagnostics, e.g. "degenerate-metric: zero variance in model output".
    std::string note;
};

/// Squared Pearson correlation; affine-invariant, sign-blind.
double pearson_r2(std::span<const double> a, std::span<const double> b);

/// Rank correlation with average ranks on ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Mean squared error over all B*T*D entries of two matching raw batches.
double rollout_mse(const TrajectoryBatch& generated, const TrajectoryBatch& truth);

struct EnergySpread {
    double sigma_gen = 0.0;
    double sigma_true = 0.0;
    double ratio = 0.0;
};

/// Median across trajectories of the within-trajectory std of the analytic
/// energy, for generated and true batches; ratio = sigma_gen / sigma_true.
EnergySpread energy_std_ratio(const TrajectoryBatch& generated,
                              const TrajectoryBatch& truth);

/// Max across trajectories of the within-trajectory energy std; the
/// data-integrity gate run before any training.
double drift_check(const TrajectoryBatch& batch);

/// Writes metrics.csv (fixed column order, empty fields for absent values)
/// and metrics.json under out_dir.
void emit_report(std::span<const MetricsReport> reports,
                 const std::filesystem::path& out_dir);

/// Reports previously written by emit_report; empty when none exist.
std::vector<MetricsReport> load_reports(const std::filesystem::path& out_dir);

/// Per-state time series of analytic vs learned energy for plotting; one CSV
/// row per (trajectory, t) under out_dir/energy_series/<run_id>.csv.
void emit_energy_series(const std::string& run_id, const TrajectoryBatch& raw_batch,
                        std::span<const double> learned_values,
                        const std::filesystem::path& out_dir);

} // namespace conslearn
