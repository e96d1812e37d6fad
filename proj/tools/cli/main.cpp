#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "conslearn/error.hpp"
#include "pipeline.hpp"

namespace {

using conslearn::cli::ExperimentConfig;

/// Shared --config/--out/--system flags; resolution happens after parsing so
/// command-line overrides beat the file.
struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::string system;

    ExperimentConfig resolve() const {
        ExperimentConfig cfg = config_path.empty()
                                   ? conslearn::cli::default_config()
                                   : conslearn::cli::parse_config_file(config_path);
        if (!out_dir.empty()) cfg.output.dir = out_dir;
        if (!system.empty()) cfg.run.system = system;
        return cfg;
    }
};

void add_global_opts(CLI::App& app, GlobalOpts& g) {
    app.add_option("-c,--config", g.config_path, "Config file (TOML-style sections)");
    app.add_option("-o,--out", g.out_dir, "Output root (default: $CONSLEARN_OUT or ./out)");
    app.add_option("-s,--system", g.system,
                   "System: projectile, pendulum or spring-mass");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learns conserved quantities from simulated trajectories and "
                 "measures how well a guided diffusion model keeps them"};
    app.require_subcommand(1);
    GlobalOpts global;
    add_global_opts(app, global);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Simulate trajectories and gate on drift");
    std::optional<double> gen_noise;
    std::optional<int> gen_n_traj, gen_n_steps;
    gen->add_option("--noise", gen_noise, "Noise fraction; also writes noisy.bin");
    gen->add_option("--n-traj", gen_n_traj, "Trajectory count override");
    gen->add_option("--n-steps", gen_n_steps, "Steps per trajectory override");

    // train
    auto* train = app.add_subcommand("train", "Train one model on the generated data");
    std::string train_model;
    bool train_noisy = false;
    std::string train_schedule;
    std::optional<int> train_epochs;
    train->add_option("model", train_model, "cdn, cdn-noalign, poly, se or ddpm")
        ->required();
    train->add_flag("--noisy", train_noisy, "Train on the noisy dataset");
    train->add_option("--schedule", train_schedule, "Poly budget: short or long")
        ->check(CLI::IsMember({"short", "long"}));
    train->add_option("--epochs", train_epochs, "Epoch count override");

    // eval
    auto* eval = app.add_subcommand("eval", "Score an invariant against analytic energy");
    std::string eval_target;
    bool eval_noisy = false;
    eval->add_option("target", eval_target,
                     "Checkpoint label or path, or 'analytic' for the oracle row")
        ->required();
    eval->add_flag("--noisy", eval_noisy, "Evaluate on noisy validation states");

    // rollout
    auto* roll = app.add_subcommand("rollout",
                                    "Generate trajectories and measure the energy gap");
    std::string roll_label = "ddpm";
    std::optional<int> roll_horizon, roll_proj, roll_n;
    roll->add_option("--label", roll_label, "Transition-model checkpoint label");
    roll->add_option("--horizon", roll_horizon, "Steps to generate");
    roll->add_option("--projection-steps", roll_proj, "Level-set projections per step");
    roll->add_option("--n-rollouts", roll_n, "Validation trajectories to roll out");

    // symreg
    auto* sym = app.add_subcommand("symreg", "Recover a sparse closed form");
    std::string sym_target = "analytic";
    sym->add_option("target", sym_target,
                    "Checkpoint label or path, or 'analytic' (default)");

    // report
    app.add_subcommand("report", "Print every recorded metrics row");

    // grad-check
    app.add_subcommand("grad-check", "Finite-difference gate on analytic gradients");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the parse message
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = global.resolve();
        if (gen->parsed()) {
            if (gen_n_traj) cfg.data.n_traj = *gen_n_traj;
            if (gen_n_steps) cfg.data.n_steps = *gen_n_steps;
            return conslearn::cli::cmd_gen_data(cfg, gen_noise);
        }
        if (train->parsed()) {
            return conslearn::cli::cmd_train(cfg, train_model, train_noisy,
                                             train_schedule, train_epochs);
        }
        if (eval->parsed()) {
            return conslearn::cli::cmd_eval(cfg, eval_target, eval_noisy);
        }
        if (roll->parsed()) {
            if (roll_horizon) cfg.rollout.horizon = *roll_horizon;
            if (roll_proj) cfg.rollout.projection_steps = *roll_proj;
            if (roll_n) cfg.rollout.n_rollouts = *roll_n;
            return conslearn::cli::cmd_rollout(cfg, roll_label);
        }
        if (sym->parsed()) return conslearn::cli::cmd_symreg(cfg, sym_target);
        if (app.get_subcommand("report")->parsed()) {
            return conslearn::cli::cmd_report(cfg);
        }
        return conslearn::cli::cmd_grad_check(cfg);
    } catch (const conslearn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const conslearn::IntegrationError& e) {
        std::cerr << "integration error: " << e.what() << "\n";
        return 3;
    } catch (const conslearn::DegenerateMetricError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const conslearn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
