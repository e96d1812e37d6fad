#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace conslearn::cli {

/// Every knob of the pipeline, one struct per config-file section. Defaults
/// reproduce the clean-data desk-scale pipeline; the file only needs the keys
/// that differ.
struct RunCfg {
    std::string system = "spring-mass";
};

struct DataCfg {
    int n_traj = 5000;
    int n_steps = 200; ///< stored states per trajectory
    double dt = 0.005;
    double noise_fraction = 0.0;
    std::uint64_t gen_seed = 42;
    std::uint64_t noise_seed = 99;
    double train_fraction = 0.9;
    std::uint64_t split_seed = 42;
};

struct LossCfg {
    double lambda_var = 1.0;
    double var_epsilon = 0.1;
    double lambda_align = 0.2;
};

/// Shared shape for the two MLP invariant trainers. 300 epochs lands at the
/// end of the second cosine period, where the learning rate has annealed.
struct MlpTrainCfg {
    int width = 256;
    int hidden = 4;
    int epochs = 300;
    int batches_per_epoch = 32;
    /// Trajectories per minibatch; the alignment term z-scores over these, so
    /// it needs enough of them to see the batch's energy ordering.
    int batch_traj = 64;
    int pairs_per_traj = 16;
    double lr = 1e-3;
    double min_lr = 1e-5;
    int warmup_epochs = 5;
    int restart_period = 100;
    int period_multiplier = 2;
    std::uint64_t seed = 1;
    int val_max_traj = 64;
};

/// Polynomial model budgets: the long preset is the default; the short preset
/// swaps in the *_short values (fewer epochs on a data prefix).
struct PolyCfg {
    int epochs = 512;
    int max_traj = 50000;
    int epochs_short = 256;
    int max_traj_short = 20000;
    int batch_traj = 4096;
    double lr = 5.5e-4;
    std::uint64_t seed = 3;
    int val_max_traj = 64;
};

struct DdpmCfg {
    int width = 256;
    int hidden = 3;
    int embed_dim = 32;
    int n_diffusion_steps = 100;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int epochs = 30;
    int batches_per_epoch = 100;
    int batch_size = 256;
    double lr = 1e-3;
    std::uint64_t seed = 5;
    int val_samples = 2048;
    bool shuffle_conditioning = false;
};

struct RolloutCfg {
    int horizon = 200;
    int n_rollouts = 64;
    int projection_steps = 1;
    double projection_epsilon = 1e-8;
    std::uint64_t seed = 7;
};

struct SymregCfg {
    double threshold = 0.05;
    double ridge_lambda = 1e-10;
    int max_iterations = 20;
    int decimals = 2;
};

struct OutputCfg {
    /// Empty means: $CONSLEARN_OUT if set, else "out".
    std::string dir;
};

struct ExperimentConfig {
    RunCfg run;
    DataCfg data;
    LossCfg loss;
    MlpTrainCfg cdn;
    MlpTrainCfg se;
    DdpmCfg ddpm;
    PolyCfg poly;
    RolloutCfg rollout;
    SymregCfg symreg;
    OutputCfg output;
};

/// Config with per-model defaults applied (se differs from cdn in shape).
ExperimentConfig default_config();

/// Parses TOML-style "[section]" + "key = value" text. Unknown sections or
/// keys are rejected; every key is optional.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Full round-trippable rendering of every effective key, for run audit
/// trails.
std::string dump_config(const ExperimentConfig& cfg);

/// output.dir resolved against the environment fallback chain.
std::filesystem::path output_root(const ExperimentConfig& cfg);

} // namespace conslearn::cli
