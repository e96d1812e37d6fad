#include "pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "conslearn/diffusion.hpp"
#include "conslearn/metrics.hpp"

namespace conslearn::cli {

namespace fs = std::filesystem;

Layout Layout::make(const ExperimentConfig& cfg) {
    Layout l;
    l.root = output_root(cfg);
    l.system_dir = l.root / cfg.run.system;
    l.data_dir = l.system_dir / "data";
    l.checkpoint_dir = l.system_dir / "checkpoints";
    l.history_dir = l.system_dir / "history";
    l.equation_dir = l.system_dir / "equations";
    l.config_dir = l.system_dir / "configs";
    return l;
}

namespace {

SystemSpec system_of(const ExperimentConfig& cfg) {
    return SystemSpec::from_name(cfg.run.system);
}

SplitSpec split_of(const ExperimentConfig& cfg) {
    return SplitSpec{cfg.data.train_fraction, cfg.data.split_seed};
}

void echo_config(const ExperimentConfig& cfg, const Layout& l, const std::string& name) {
    std::error_code ec;
    fs::create_directories(l.config_dir, ec);
    const fs::path path = l.config_dir / (name + ".cfg");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << dump_config(cfg);
}

TrajectoryBatch load_data(const Layout& l, bool noisy) {
    const fs::path path = noisy ? l.noisy_data() : l.clean_data();
    if (!fs::exists(path)) {
        throw IoError("dataset '" + path.string() + "' not found; run gen-data first");
    }
    return load_batch(path);
}

/// Keeps the listed trajectories, truncated to the first t_len states.
TrajectoryBatch truncate_batch(const TrajectoryBatch& b, int n_traj, int t_len) {
    if (n_traj < 1 || n_traj > b.n_traj || t_len < 1 || t_len > b.traj_len) {
        throw InputError("truncate_batch: selection out of range");
    }
    TrajectoryBatch out = b;
    out.n_traj = n_traj;
    out.traj_len = t_len;
    out.states.assign(static_cast<std::size_t>(n_traj) * t_len * b.dim, 0.0);
    out.t0_energy.assign(b.t0_energy.begin(), b.t0_energy.begin() + n_traj);
    for (int i = 0; i < n_traj; ++i) {
        const double* src = b.traj(i);
        std::copy(src, src + static_cast<std::size_t>(t_len) * b.dim, out.traj(i));
    }
    return out;
}

void append_report(const Layout& l, const MetricsReport& row) {
    auto reports = load_reports(l.root);
    reports.push_back(row);
    emit_report(reports, l.root);
}

std::string format_optional(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", *v);
    return buf;
}

void print_row(const MetricsReport& r) {
    std::cout << "system=" << r.system << " model=" << r.model
              << " noise=" << r.noise_fraction << " r2=" << format_optional(r.r2)
              << " spearman=" << format_optional(r.spearman_rho)
              << " rollout_mse=" << format_optional(r.rollout_mse)
              << " sigma_true=" << format_optional(r.sigma_true)
              << " sigma_gen=" << format_optional(r.sigma_gen)
              << " ratio=" << format_optional(r.ratio) << " seed=" << r.seed
              << " n_traj=" << r.n_traj << " epochs=" << r.epochs;
    if (!r.note.empty()) std::cout << " note=\"" << r.note << "\"";
    std::cout << "\n";
}

LrSchedule mlp_schedule(const MlpTrainCfg& m) {
    LrSchedule s;
    s.kind = LrSchedule::Kind::LinearWarmupThenCosineRestarts;
    s.base_lr = m.lr;
    s.min_lr = m.min_lr;
    s.warmup_epochs = m.warmup_epochs;
    s.restart_period = m.restart_period;
    s.period_multiplier = m.period_multiplier;
    return s;
}

InvariantTrainOptions mlp_options(const MlpTrainCfg& m) {
    InvariantTrainOptions opt;
    opt.epochs = m.epochs;
    opt.batches_per_epoch = m.batches_per_epoch;
    opt.batch_traj = m.batch_traj;
    opt.pairs_per_traj = m.pairs_per_traj;
    opt.schedule = mlp_schedule(m);
    opt.seed = m.seed;
    opt.val_max_traj = m.val_max_traj;
    return opt;
}

Eigen::MatrixXd batch_matrix(const TrajectoryBatch& b) {
    const auto n = static_cast<Eigen::Index>(b.n_states());
    Eigen::MatrixXd x(n, b.dim);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double* s = b.states.data() + static_cast<std::size_t>(r) * b.dim;
        for (int j = 0; j < b.dim; ++j) x(r, j) = s[j];
    }
    return x;
}

std::vector<double> analytic_energies(const TrajectoryBatch& b) {
    std::vector<double> e(b.n_states());
    std::size_t row = 0;
    for (int i = 0; i < b.n_traj; ++i) {
        for (int t = 0; t < b.traj_len; ++t, ++row) {
            e[row] = analytic_energy(b.system, b.state_at(i, t));
        }
    }
    return e;
}

} // namespace

// ---------------------------------------------------------------------------

int cmd_gen_data(const ExperimentConfig& cfg_in, std::optional<double> noise_override) {
    ExperimentConfig cfg = cfg_in;
    if (noise_override) cfg.data.noise_fraction = *noise_override;
    const SystemSpec sys = system_of(cfg);
    const Layout l = Layout::make(cfg);

    TrajectoryBatch clean = generate_dataset(sys, cfg.data.n_traj, cfg.data.n_steps,
                                             cfg.data.dt, cfg.data.gen_seed);
    const double drift = drift_check(clean);
    const double gate = sys.kind == SystemKind::Pendulum ? 1e-7 : 1e-10;
    std::cout << "system=" << cfg.run.system << " n_traj=" << cfg.data.n_traj
              << " drift=" << drift << " gate=" << gate << "\n";
    if (drift > gate) {
        std::cerr << "error: drift gate failed (" << drift << " > " << gate << ")\n";
        return 2;
    }

    save_batch(clean, l.clean_data());
    std::cout << "wrote " << l.clean_data().string() << "\n";
    if (cfg.data.noise_fraction > 0.0) {
        TrajectoryBatch noisy =
            add_noise(clean, cfg.data.noise_fraction, cfg.data.noise_seed);
        save_batch(noisy, l.noisy_data());
        std::cout << "wrote " << l.noisy_data().string() << "\n";
    }
    echo_config(cfg, l, "gen-data");
    return 0;
}

// ---------------------------------------------------------------------------

namespace {

int train_mlp_invariant(const ExperimentConfig& cfg, const std::string& model, bool noisy,
                        std::optional<int> epochs_override) {
    const SystemSpec sys = system_of(cfg);
    const Layout l = Layout::make(cfg);
    TrajectoryBatch raw = load_data(l, noisy);

    const bool is_se = model == "se";
    const bool aligned = model != "cdn-noalign";
    MlpTrainCfg mcfg = is_se ? cfg.se : cfg.cdn;
    if (epochs_override) mcfg.epochs = *epochs_override;

    ConservationLossConfig loss;
    loss.lambda_var = cfg.loss.lambda_var;
    loss.var_epsilon = cfg.loss.var_epsilon;
    loss.lambda_align = aligned ? cfg.loss.lambda_align : 0.0;

    std::unique_ptr<InvariantModel> m;
    if (is_se) {
        m = std::make_unique<StructuredEnergyNet>(sys, mcfg.seed, mcfg.width, mcfg.hidden);
    } else {
        m = std::make_unique<BlackBoxCdn>(sys.state_dim, mcfg.seed, mcfg.width,
                                          mcfg.hidden);
    }

    TrajectoryBatch prepared = m->expected_normalization() == NormMode::Raw
                                   ? raw
                                   : normalize(raw, m->expected_normalization(),
                                               split_of(cfg));
    auto [train, val] = split(prepared, split_of(cfg));
    auto history = train_invariant(*m, train, val, loss, mlp_options(mcfg));

    const std::string label = model + (noisy ? "-noisy" : "");
    CheckpointInfo info;
    info.model_label = label;
    info.system = cfg.run.system;
    info.dataset_tag = noisy ? "noisy" : "clean";
    info.noise_fraction = noisy ? raw.noise_sigma_fraction : 0.0;
    info.epochs = mcfg.epochs;
    info.seed = mcfg.seed;
    info.lambda_align = loss.lambda_align;
    save_invariant_checkpoint(*m, info, l.checkpoint(label));
    write_history_csv(l.history(label), history);
    echo_config(cfg, l, "train-" + label);

    std::cout << "trained " << label << " on " << cfg.run.system
              << " final_train_loss=" << history.back().train_loss
              << " final_val_loss=" << history.back().val_loss << "\n"
              << "wrote " << l.checkpoint(label).string() << "\n";
    return 0;
}

int train_poly(const ExperimentConfig& cfg, bool noisy, const std::string& schedule,
               std::optional<int> epochs_override) {
    if (!schedule.empty() && schedule != "short" && schedule != "long") {
        throw ConfigError("train poly: schedule must be 'short' or 'long'");
    }
    const bool short_preset = schedule == "short";
    const SystemSpec sys = system_of(cfg);
    const Layout l = Layout::make(cfg);
    TrajectoryBatch raw = load_data(l, noisy);

    const int want_traj = short_preset ? cfg.poly.max_traj_short : cfg.poly.max_traj;
    int epochs = short_preset ? cfg.poly.epochs_short : cfg.poly.epochs;
    if (epochs_override) epochs = *epochs_override;
    TrajectoryBatch prefix =
        raw.n_traj > want_traj ? take_prefix(raw, want_traj) : std::move(raw);

    ConservationLossConfig loss;
    loss.lambda_var = cfg.loss.lambda_var;
    loss.var_epsilon = cfg.loss.var_epsilon;
    loss.lambda_align = cfg.loss.lambda_align;

    PolynomialCdn model(sys, cfg.poly.seed);
    InvariantTrainOptions opt;
    opt.epochs = epochs;
    opt.batches_per_epoch = 0; // full pass per epoch
    opt.batch_traj = cfg.poly.batch_traj;
    opt.pairs_per_traj = 0; // every consecutive pair
    opt.schedule.kind = LrSchedule::Kind::Constant;
    opt.schedule.base_lr = cfg.poly.lr;
    opt.seed = cfg.poly.seed;
    opt.val_max_traj = cfg.poly.val_max_traj;

    auto [train, val] = split(prefix, split_of(cfg));
    auto history = train_invariant(model, train, val, loss, opt);

    const std::string label =
        std::string("poly-") + (short_preset ? "short" : "long") + (noisy ? "-noisy" : "");
    CheckpointInfo info;
    info.model_label = label;
    info.system = cfg.run.system;
    info.dataset_tag = noisy ? "noisy" : "clean";
    info.noise_fraction = noisy ? prefix.noise_sigma_fraction : 0.0;
    info.epochs = epochs;
    info.seed = cfg.poly.seed;
    info.lambda_align = loss.lambda_align;
    save_invariant_checkpoint(model, info, l.checkpoint(label));
    write_history_csv(l.history(label), history);
    echo_config(cfg, l, "train-" + label);

    std::cout << "trained " << label << " on " << cfg.run.system << " ("
              << prefix.n_traj << " trajectories, " << epochs << " epochs)"
              << " final_train_loss=" << history.back().train_loss << "\n"
              << "wrote " << l.checkpoint(label).string() << "\n";
    return 0;
}

int train_ddpm_cmd(const ExperimentConfig& cfg, bool noisy,
                   std::optional<int> epochs_override) {
    const Layout l = Layout::make(cfg);
    const std::string cdn_label = std::string("cdn") + (noisy ? "-noisy" : "");
    const fs::path cdn_path = l.checkpoint(cdn_label);
    if (!fs::exists(cdn_path)) {
        throw IoError("conditioning checkpoint '" + cdn_path.string() +
                      "' not found; run train cdn first");
    }
    LoadedInvariant cdn = load_invariant_checkpoint(cdn_path);

    TrajectoryBatch raw = load_data(l, noisy);
    TrajectoryBatch standardized = normalize(raw, NormMode::Standardize, split_of(cfg));
    auto [train, val] = split(standardized, split_of(cfg));

    DdpmCfg d = cfg.ddpm;
    if (epochs_override) d.epochs = *epochs_override;
    TransitionModel model(raw.dim,
                          NoiseSchedule::linear(d.n_diffusion_steps, d.beta_start,
                                                d.beta_end),
                          d.seed, d.width, d.hidden, d.embed_dim);
    DdpmTrainOptions opt;
    opt.epochs = d.epochs;
    opt.batches_per_epoch = d.batches_per_epoch;
    opt.batch_size = d.batch_size;
    opt.lr = d.lr;
    opt.seed = d.seed;
    opt.val_samples = d.val_samples;
    opt.shuffle_conditioning = d.shuffle_conditioning;
    auto history = train_ddpm(model, train, val, *cdn.model, opt);

    const std::string label = std::string("ddpm") + (noisy ? "-noisy" : "");
    CheckpointInfo info;
    info.model_label = label;
    info.system = cfg.run.system;
    info.dataset_tag = noisy ? "noisy" : "clean";
    info.noise_fraction = noisy ? raw.noise_sigma_fraction : 0.0;
    info.epochs = d.epochs;
    info.seed = d.seed;
    info.lambda_align = cdn.info.lambda_align;
    save_transition_checkpoint(model, info, l.checkpoint(label));
    write_history_csv(l.history(label), history);
    echo_config(cfg, l, "train-" + label);

    std::cout << "trained " << label << " on " << cfg.run.system
              << " final_train_loss=" << history.back().train_loss
              << " final_val_loss=" << history.back().val_loss << "\n"
              << "wrote " << l.checkpoint(label).string() << "\n";
    return 0;
}

} // namespace

int cmd_train(const ExperimentConfig& cfg, const std::string& model, bool noisy,
              const std::string& schedule, std::optional<int> epochs_override) {
    if (model == "cdn" || model == "cdn-noalign" || model == "se") {
        if (!schedule.empty()) {
            throw ConfigError("train: --schedule only applies to the poly model");
        }
        return train_mlp_invariant(cfg, model, noisy, epochs_override);
    }
    if (model == "poly") return train_poly(cfg, noisy, schedule, epochs_override);
    if (model == "ddpm") {
        if (!schedule.empty()) {
            throw ConfigError("train: --schedule only applies to the poly model");
        }
        return train_ddpm_cmd(cfg, noisy, epochs_override);
    }
    throw ConfigError("train: unknown model '" + model +
                      "' (expected cdn, cdn-noalign, poly, se or ddpm)");
}

// ---------------------------------------------------------------------------

int cmd_eval(const ExperimentConfig& cfg, const std::string& target, bool noisy) {
    const Layout l = Layout::make(cfg);

    TrajectoryBatch clean = load_data(l, false);
    auto [clean_train, clean_val] = split(clean, split_of(cfg));
    const std::vector<double> targets = analytic_energies(clean_val);

    MetricsReport row;
    row.system = cfg.run.system;
    row.n_traj = clean.n_traj;

    std::vector<double> values;
    if (target == "analytic") {
        row.model = "analytic";
        values = targets;
    } else {
        fs::path path = l.checkpoint(target);
        if (!fs::exists(path) && fs::exists(fs::path(target))) path = target;
        LoadedInvariant loaded = load_invariant_checkpoint(path);
        const bool eval_noisy = noisy || loaded.info.noise_fraction > 0.0;
        row.model = loaded.info.model_label;
        row.noise_fraction = loaded.info.noise_fraction;
        row.seed = loaded.info.seed;
        row.epochs = loaded.info.epochs;

        TrajectoryBatch eval_val = clean_val;
        if (eval_noisy) {
            TrajectoryBatch noisy_batch = load_data(l, true);
            eval_val = split(noisy_batch, split_of(cfg)).second;
        }
        Eigen::VectorXd v = loaded.model->values_raw(batch_matrix(eval_val));
        values.assign(v.data(), v.data() + v.size());
        emit_energy_series(row.model, eval_val, values, l.system_dir);
    }

    try {
        row.r2 = pearson_r2(values, targets);
        row.spearman_rho = spearman(values, targets);
    } catch (const DegenerateMetricError& e) {
        row.note = std::string("degenerate-metric: ") + e.what();
    }
    append_report(l, row);
    print_row(row);
    echo_config(cfg, l, "eval-" + row.model);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_rollout(const ExperimentConfig& cfg, const std::string& label) {
    const Layout l = Layout::make(cfg);
    LoadedTransition ddpm = load_transition_checkpoint(l.checkpoint(label));
    const bool noisy = ddpm.info.dataset_tag == "noisy";
    LoadedInvariant cdn =
        load_invariant_checkpoint(l.checkpoint(std::string("cdn") + (noisy ? "-noisy" : "")));
    LoadedInvariant se =
        load_invariant_checkpoint(l.checkpoint(std::string("se") + (noisy ? "-noisy" : "")));
    const auto* se_model = dynamic_cast<const StructuredEnergyNet*>(se.model.get());
    if (!se_model) throw IoError("rollout: 'se' checkpoint is not a structured energy model");

    TrajectoryBatch clean = load_data(l, false);
    const int horizon = cfg.rollout.horizon;
    if (clean.traj_len < horizon + 1) {
        throw ConfigError("rollout: dataset has " + std::to_string(clean.traj_len) +
                          " states per trajectory but horizon needs " +
                          std::to_string(horizon + 1) + "; regenerate with more steps");
    }
    TrajectoryBatch val = split(clean, split_of(cfg)).second;
    const int n_rollouts = std::min(cfg.rollout.n_rollouts, val.n_traj);
    TrajectoryBatch truth = truncate_batch(val, n_rollouts, horizon + 1);

    RolloutConfig rcfg;
    rcfg.horizon = horizon;
    rcfg.projection_steps_per_sample = cfg.rollout.projection_steps;
    rcfg.projection_epsilon = cfg.rollout.projection_epsilon;
    TrajectoryBatch gen = rollout_batch(ddpm.model, truth, n_rollouts, rcfg, *cdn.model,
                                        *se_model, cfg.rollout.seed);
    save_batch(gen, l.data_dir / ("generated-" + label + ".bin"));

    MetricsReport row;
    row.system = cfg.run.system;
    row.model = label + "-proj" + std::to_string(cfg.rollout.projection_steps);
    row.noise_fraction = ddpm.info.noise_fraction;
    row.rollout_mse = rollout_mse(gen, truth);
    const EnergySpread spread = energy_std_ratio(gen, truth);
    row.sigma_gen = spread.sigma_gen;
    row.sigma_true = spread.sigma_true;
    row.ratio = spread.ratio;
    row.seed = cfg.rollout.seed;
    row.n_traj = n_rollouts;
    row.epochs = ddpm.info.epochs;
    append_report(l, row);
    print_row(row);
    echo_config(cfg, l, "rollout-" + row.model);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_symreg(const ExperimentConfig& cfg, const std::string& target) {
    const SystemSpec sys = system_of(cfg);
    const Layout l = Layout::make(cfg);
    TrajectoryBatch clean = load_data(l, false);

    // A generous cap keeps the feature matrix small while staying far above
    // the recovery requirement.
    constexpr std::size_t kMaxStates = 250'000;
    const auto n_states = std::min(clean.n_states(), kMaxStates);
    Eigen::MatrixXd states(static_cast<Eigen::Index>(n_states), clean.dim);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n_states));
    for (std::size_t r = 0; r < n_states; ++r) {
        const double* s = clean.states.data() + r * static_cast<std::size_t>(clean.dim);
        for (int j = 0; j < clean.dim; ++j) states(static_cast<Eigen::Index>(r), j) = s[j];
    }

    std::string tag;
    if (target == "analytic") {
        tag = "analytic";
        for (Eigen::Index r = 0; r < states.rows(); ++r) {
            std::vector<double> s(clean.dim);
            for (int j = 0; j < clean.dim; ++j) s[static_cast<std::size_t>(j)] = states(r, j);
            y(r) = analytic_energy(clean.system, s);
        }
    } else {
        fs::path path = l.checkpoint(target);
        if (!fs::exists(path) && fs::exists(fs::path(target))) path = target;
        LoadedInvariant loaded = load_invariant_checkpoint(path);
        tag = loaded.info.model_label;
        y = loaded.model->values_raw(states);
    }

    const FeatureLibrary lib = FeatureLibrary::for_system(sys);
    const Eigen::MatrixXd phi = lib.eval_batch(states);
    StlsqConfig scfg;
    scfg.threshold = cfg.symreg.threshold;
    scfg.ridge_lambda = cfg.symreg.ridge_lambda;
    scfg.max_iterations = cfg.symreg.max_iterations;
    const Eigen::VectorXd w = stlsq_fit(phi, y, scfg);

    std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
    const std::string equation = format_equation(lib, ws, cfg.symreg.decimals);
    std::error_code ec;
    fs::create_directories(l.equation_dir, ec);
    {
        const fs::path path = l.equation_dir / (tag + ".txt");
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
        f << equation << "\n";
    }
    {
        const fs::path path = l.equation_dir / (tag + ".json");
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
        f << equation_json(lib, ws) << "\n";
    }
    echo_config(cfg, l, "symreg-" + tag);
    std::cout << cfg.run.system << " (" << tag << "): " << equation << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_report(const ExperimentConfig& cfg) {
    const Layout l = Layout::make(cfg);
    const auto reports = load_reports(l.root);
    if (reports.empty()) {
        std::cout << "no metrics recorded under " << l.root.string() << "\n";
        return 0;
    }
    std::printf("%-12s %-16s %-7s %-10s %-10s %-12s %-12s %-12s %-10s\n", "system",
                "model", "noise", "r2", "spearman", "rollout_mse", "sigma_true",
                "sigma_gen", "ratio");
    for (const auto& r : reports) {
        std::printf("%-12s %-16s %-7.3g %-10s %-10s %-12s %-12s %-12s %-10s\n",
                    r.system.c_str(), r.model.c_str(), r.noise_fraction,
                    format_optional(r.r2).c_str(), format_optional(r.spearman_rho).c_str(),
                    format_optional(r.rollout_mse).c_str(),
                    format_optional(r.sigma_true).c_str(),
                    format_optional(r.sigma_gen).c_str(), format_optional(r.ratio).c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_grad_check(const ExperimentConfig& cfg) {
    const SystemSpec sys = system_of(cfg);
    TrajectoryBatch raw = generate_dataset(sys, 48, 12, cfg.data.dt, cfg.data.gen_seed);
    ConservationLossConfig loss;
    loss.lambda_var = cfg.loss.lambda_var;
    loss.var_epsilon = cfg.loss.var_epsilon;
    loss.lambda_align = cfg.loss.lambda_align;

    constexpr double kTolerance = 1e-5;
    bool ok = true;
    auto check = [&](const std::string& name, double err) {
        std::cout << name << " max_rel_err=" << err
                  << (err <= kTolerance ? " ok" : " FAIL") << "\n";
        ok = ok && err <= kTolerance;
    };

    {
        TrajectoryBatch b = normalize(raw, NormMode::MinMax, split_of(cfg));
        BlackBoxCdn m(sys.state_dim, 11, 32, 2);
        check("cdn", invariant_fd_max_rel_err(m, b, loss, 30, 123));
    }
    {
        PolynomialCdn m(sys, 12);
        check("poly", invariant_fd_max_rel_err(m, raw, loss, 30, 124));
    }
    {
        StructuredEnergyNet m(sys, 13, 24, 2);
        check("se", invariant_fd_max_rel_err(m, raw, loss, 30, 125));
    }
    {
        DenseNet net({sys.state_dim, 24, 24, 3}, 14);
        Rng rng(77);
        Eigen::MatrixXd x(16, sys.state_dim);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
        }
        check("dense-net", fd_max_rel_err(net, x, 40, 321));
    }

    if (!ok) {
        std::cerr << "error: gradient check failed (tolerance " << kTolerance << ")\n";
        return 3;
    }
    return 0;
}

} // namespace conslearn::cli
