#pragma once

#include <optional>
#include <string>

#include "config.hpp"

namespace conslearn::cli {

/// Per-system directory layout under the output root.
struct Layout {
    std::filesystem::path root;
    std::filesystem::path system_dir;
    std::filesystem::path data_dir;
    std::filesystem::path checkpoint_dir;
    std::filesystem::path history_dir;
    std::filesystem::path equation_dir;
    std::filesystem::path config_dir;

    static Layout make(const ExperimentConfig& cfg);
    std::filesystem::path clean_data() const { return data_dir / "clean.bin"; }
    std::filesystem::path noisy_data() const { return data_dir / "noisy.bin"; }
    std::filesystem::path checkpoint(const std::string& label) const {
        return checkpoint_dir / (label + ".bin");
    }
    std::filesystem::path history(const std::string& label) const {
        return history_dir / (label + ".csv");
    }
};

/// All commands return a process exit code; recoverable failures are typed
/// exceptions mapped by the entry point (config/input 1, numeric 3).
int cmd_gen_data(const ExperimentConfig& cfg, std::optional<double> noise_override);

int cmd_train(const ExperimentConfig& cfg, const std::string& model, bool noisy,
              const std::string& schedule, std::optional<int> epochs_override);

int cmd_eval(const ExperimentConfig& cfg, const std::string& target, bool noisy);

int cmd_rollout(const ExperimentConfig& cfg, const std::string& label);

int cmd_symreg(const ExperimentConfig& cfg, const std::string& target);

int cmd_report(const ExperimentConfig& cfg);

int cmd_grad_check(const ExperimentConfig& cfg);

} // namespace conslearn::cli
