#include "conslearn/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "blob_io.hpp"

namespace conslearn {

NoiseSchedule NoiseSchedule::linear(int n_steps, double beta_start, double beta_end) {
    if (n_steps < 1) throw ConfigError("NoiseSchedule: n_steps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end) {
        throw ConfigError("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.n_steps = n_steps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.beta.resize(static_cast<std::size_t>(n_steps));
    s.alpha.resize(static_cast<std::size_t>(n_steps));
    s.alpha_bar.resize(static_cast<std::size_t>(n_steps));
    double abar = 1.0;
    for (int t = 0; t < n_steps; ++t) {
        double frac = n_steps > 1 ? static_cast<double>(t) / (n_steps - 1) : 0.0;
        double b = beta_start + (beta_end - beta_start) * frac;
        s.beta[static_cast<std::size_t>(t)] = b;
        s.alpha[static_cast<std::size_t>(t)] = 1.0 - b;
        abar *= 1.0 - b;
        s.alpha_bar[static_cast<std::size_t>(t)] = abar;
    }
    return s;
}

TransitionModel::TransitionModel(int state_dim, NoiseSchedule sched, std::uint64_t seed,
                                 int width, int n_hidden, int embed_dim)
    : embedding(embed_dim), schedule(std::move(sched)), state_dim_(state_dim) {
    if (state_dim < 1) throw ConfigError("TransitionModel: state_dim must be >= 1");
    if (width < 1 || n_hidden < 1) throw ConfigError("TransitionModel: bad architecture");
    if (schedule.n_steps < 1) throw ConfigError("TransitionModel: empty noise schedule");
    std::vector<int> dims;
    dims.push_back(input_dim());
    for (int l = 0; l < n_hidden; ++l) dims.push_back(width);
    dims.push_back(state_dim);
    denoiser = DenseNet(dims, seed);
}

namespace {

/// [noised delta | condition state | invariant value | timestep embedding].
Eigen::MatrixXd assemble_input(const TransitionModel& model, const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& cond_state, const Eigen::VectorXd& f,
                               const std::vector<int>& t) {
    const int d = model.state_dim();
    const auto n = x.rows();
    if (x.cols() != d || cond_state.cols() != d || cond_state.rows() != n ||
        f.size() != n || static_cast<Eigen::Index>(t.size()) != n) {
        throw InputError("predict_noise: shape mismatch");
    }
    Eigen::MatrixXd in(n, model.input_dim());
    in.leftCols(d) = x;
    in.middleCols(d, d) = cond_state;
    in.col(2 * d) = f;
    std::vector<double> emb(static_cast<std::size_t>(model.embedding.dim));
    for (Eigen::Index r = 0; r < n; ++r) {
        const int tr = t[static_cast<std::size_t>(r)];
        if (tr < 0 || tr >= model.schedule.n_steps) {
            throw InputError("predict_noise: diffusion step out of range");
        }
        model.embedding.embed(tr, emb);
        for (int k = 0; k < model.embedding.dim; ++k) {
            in(r, 2 * d + 1 + k) = emb[static_cast<std::size_t>(k)];
        }
    }
    return in;
}

/// Scalar coefficients of one ancestral reverse step.
struct ReverseCoeffs {
    double eps_scale = 0.0; ///< beta_t / sqrt(1 - abar_t)
    double inv_sqrt_alpha = 0.0;
    double sigma = 0.0; ///< 0 at t = 0
};

ReverseCoeffs reverse_coeffs(const NoiseSchedule& s, int t) {
    const auto ti = static_cast<std::size_t>(t);
    ReverseCoeffs c;
    c.eps_scale = s.beta[ti] / std::sqrt(1.0 - s.alpha_bar[ti]);
    c.inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha[ti]);
    if (t > 0) {
        c.sigma = std::sqrt(s.beta[ti] * (1.0 - s.alpha_bar[ti - 1]) /
                            (1.0 - s.alpha_bar[ti]));
    }
    return c;
}

} // namespace

Eigen::MatrixXd TransitionModel::predict_noise(const Eigen::MatrixXd& x,
                                               const Eigen::MatrixXd& cond_state,
                                               const Eigen::VectorXd& f,
                                               const std::vector<int>& t) const {
    return denoiser.forward(assemble_input(*this, x, cond_state, f, t));
}

void forward_diffuse(std::span<const double> delta, int t, const NoiseSchedule& schedule,
                     Rng& rng, std::span<double> x_out, std::span<double> noise_out) {
    if (t < 0 || t >= schedule.n_steps) {
        throw InputError("forward_diffuse: diffusion step out of range");
    }
    if (x_out.size() != delta.size() || noise_out.size() != delta.size()) {
        throw InputError("forward_diffuse: output span size mismatch");
    }
    const double abar = schedule.alpha_bar[static_cast<std::size_t>(t)];
    const double sa = std::sqrt(abar);
    const double sn = std::sqrt(1.0 - abar);
    for (std::size_t i = 0; i < delta.size(); ++i) {
        noise_out[i] = rng.normal();
        x_out[i] = sa * delta[i] + sn * noise_out[i];
    }
}

// ---------------------------------------------------------------------------
// Training

namespace {

/// One training/validation row: batch indices plus the diffusion step. The
/// conditioning indices differ from (traj, time) only under shuffled
/// conditioning.
struct DdpmSample {
    int traj = 0;
    int time = 0;
    int step = 0;
    int cond_traj = 0;
    int cond_time = 0;
};

DdpmSample draw_sample(Rng& rng, int n_traj, int traj_len, int n_steps, bool shuffle) {
    DdpmSample s;
    s.traj = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_traj)));
    s.time = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(traj_len - 1)));
    s.step = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_steps)));
    if (shuffle) {
        s.cond_traj = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_traj)));
        s.cond_time =
            static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(traj_len - 1)));
    } else {
        s.cond_traj = s.traj;
        s.cond_time = s.time;
    }
    return s;
}

/// Noised deltas, conditioning rows and noise targets for a list of samples.
struct DdpmRows {
    Eigen::MatrixXd x;
    Eigen::MatrixXd cond_std;
    Eigen::VectorXd f;
    Eigen::MatrixXd noise;
    std::vector<int> t;
};

DdpmRows build_rows(const TransitionModel& model, const TrajectoryBatch& batch,
                    const InvariantModel& cdn, std::span<const DdpmSample> samples,
                    Rng& rng) {
    const int d = batch.dim;
    const auto n = static_cast<Eigen::Index>(samples.size());
    DdpmRows rows;
    rows.x.resize(n, d);
    rows.cond_std.resize(n, d);
    rows.noise.resize(n, d);
    rows.t.resize(samples.size());
    Eigen::MatrixXd cond_raw(n, d);

    std::vector<double> delta(static_cast<std::size_t>(d));
    std::vector<double> x_buf(static_cast<std::size_t>(d));
    std::vector<double> noise_buf(static_cast<std::size_t>(d));
    for (Eigen::Index r = 0; r < n; ++r) {
        const DdpmSample& s = samples[static_cast<std::size_t>(r)];
        auto s_t = batch.state_at(s.traj, s.time);
        auto s_next = batch.state_at(s.traj, s.time + 1);
        for (int j = 0; j < d; ++j) delta[static_cast<std::size_t>(j)] = s_next[j] - s_t[j];
        forward_diffuse(delta, s.step, model.schedule, rng, x_buf, noise_buf);
        rows.t[static_cast<std::size_t>(r)] = s.step;
        auto c = batch.state_at(s.cond_traj, s.cond_time);
        for (int j = 0; j < d; ++j) {
            rows.x(r, j) = x_buf[static_cast<std::size_t>(j)];
            rows.noise(r, j) = noise_buf[static_cast<std::size_t>(j)];
            rows.cond_std(r, j) = c[j];
            cond_raw(r, j) = batch.norm_stats.to_raw(c[j], j);
        }
    }
    rows.f = cdn.values_raw(cond_raw);
    return rows;
}

void check_ddpm_batch(const TransitionModel& model, const TrajectoryBatch& batch,
                      const char* who) {
    if (batch.normalization != NormMode::Standardize) {
        throw ConfigError(std::string(who) + ": batch must be standardized, got " +
                          to_string(batch.normalization));
    }
    if (batch.dim != model.state_dim()) {
        throw InputError(std::string(who) + ": state dimension mismatch");
    }
    if (batch.traj_len < 2) {
        throw InputError(std::string(who) + ": trajectories too short");
    }
}

} // namespace

std::vector<EpochStats> train_ddpm(TransitionModel& model, const TrajectoryBatch& train,
                                   const TrajectoryBatch& val, const InvariantModel& cdn,
                                   const DdpmTrainOptions& opt) {
    check_ddpm_batch(model, train, "train_ddpm");
    if (cdn.state_dim() != model.state_dim()) {
        throw InputError("train_ddpm: conditioning model dimension mismatch");
    }
    if (opt.epochs < 1 || opt.batches_per_epoch < 1 || opt.batch_size < 1) {
        throw ConfigError("train_ddpm: epochs, batches and batch size must be >= 1");
    }

    model.state_stats = train.norm_stats;
    const int d = model.state_dim();
    const double inv_nd = 1.0 / (static_cast<double>(opt.batch_size) * d);

    Rng root(opt.seed);
    Rng train_rng = root.child(0);
    Rng val_rng = root.child(1);

    // Fixed validation probe: indices and noise drawn once, re-scored each
    // epoch so the series is comparable across epochs.
    DdpmRows val_rows;
    bool have_val = false;
    if (opt.val_samples > 0 && val.n_traj > 0) {
        check_ddpm_batch(model, val, "train_ddpm (validation)");
        std::vector<DdpmSample> vs(static_cast<std::size_t>(opt.val_samples));
        for (auto& s : vs) {
            s = draw_sample(val_rng, val.n_traj, val.traj_len, model.schedule.n_steps,
                            opt.shuffle_conditioning);
        }
        val_rows = build_rows(model, val, cdn, vs, val_rng);
        have_val = true;
    }

    NetGrads grads;
    grads.init_like(model.denoiser.layers);
    Adam adam(model.denoiser, AdamConfig{});
    Tape tape;

    std::vector<EpochStats> history;
    history.reserve(static_cast<std::size_t>(opt.epochs));
    std::vector<DdpmSample> samples(static_cast<std::size_t>(opt.batch_size));

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int b = 0; b < opt.batches_per_epoch; ++b) {
            for (auto& s : samples) {
                s = draw_sample(train_rng, train.n_traj, train.traj_len,
                                model.schedule.n_steps, opt.shuffle_conditioning);
            }
            DdpmRows rows = build_rows(model, train, cdn, samples, train_rng);
            Eigen::MatrixXd in = assemble_input(model, rows.x, rows.cond_std, rows.f, rows.t);
            Eigen::MatrixXd pred = model.denoiser.forward(in, tape);
            Eigen::MatrixXd resid = pred - rows.noise;
            double loss = resid.squaredNorm() * inv_nd;
            if (!std::isfinite(loss)) {
                throw NumericError("train_ddpm: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " + std::to_string(b));
            }
            grads.zero();
            model.denoiser.backward(tape, 2.0 * inv_nd * resid, grads);
            adam.step(model.denoiser, grads, opt.lr);
            loss_sum += loss;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / opt.batches_per_epoch;
        stats.lr = opt.lr;
        if (have_val) {
            Eigen::MatrixXd pred = model.predict_noise(val_rows.x, val_rows.cond_std,
                                                       val_rows.f, val_rows.t);
            stats.val_loss = (pred - val_rows.noise).squaredNorm() /
                             (static_cast<double>(val_rows.x.rows()) * d);
        } else {
            stats.val_loss = std::numeric_limits<double>::quiet_NaN();
        }
        history.push_back(stats);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Sampling

Eigen::VectorXd sample_delta(const TransitionModel& model, std::span<const double> s_std,
                             double f_t, Rng& rng) {
    const int d = model.state_dim();
    if (static_cast<int>(s_std.size()) != d) {
        throw InputError("sample_delta: state dimension mismatch");
    }
    Eigen::MatrixXd x(1, d);
    for (int j = 0; j < d; ++j) x(0, j) = rng.normal();
    Eigen::MatrixXd cond(1, d);
    for (int j = 0; j < d; ++j) cond(0, j) = s_std[static_cast<std::size_t>(j)];
    Eigen::VectorXd f(1);
    f(0) = f_t;
    std::vector<int> t_vec(1);

    for (int t = model.schedule.n_steps - 1; t >= 0; --t) {
        t_vec[0] = t;
        Eigen::MatrixXd eps = model.predict_noise(x, cond, f, t_vec);
        const ReverseCoeffs c = reverse_coeffs(model.schedule, t);
        for (int j = 0; j < d; ++j) {
            x(0, j) = (x(0, j) - c.eps_scale * eps(0, j)) * c.inv_sqrt_alpha;
        }
        if (t > 0) {
            for (int j = 0; j < d; ++j) x(0, j) += c.sigma * rng.normal();
        }
    }
    return x.row(0).transpose();
}

std::vector<double> project_step(std::span<const double> s, double h,
                                 std::span<const double> grad, double h0, double eps) {
    if (!(eps > 0.0)) throw ConfigError("project_step: eps must be positive");
    if (grad.size() != s.size()) throw InputError("project_step: gradient size mismatch");
    double g2 = 0.0;
    for (double g : grad) {
        if (!std::isfinite(g)) throw NumericError("project_step: non-finite gradient");
        g2 += g * g;
    }
    const double scale = (h - h0) / (g2 + eps);
    std::vector<double> out(s.begin(), s.end());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= scale * grad[j];
    return out;
}

std::vector<double> project_energy(std::span<const double> s_raw, double h0,
                                   const StructuredEnergyNet& se, double eps) {
    std::vector<double> grad(s_raw.size());
    const double h = se.value_and_grad(s_raw, grad);
    return project_step(s_raw, h, grad, h0, eps);
}

namespace {

void check_rollout_cfg(const RolloutConfig& cfg) {
    if (cfg.horizon < 0) throw ConfigError("rollout: horizon must be >= 0");
    if (cfg.projection_steps_per_sample < 0) {
        throw ConfigError("rollout: projection_steps_per_sample must be >= 0");
    }
    if (!(cfg.projection_epsilon > 0.0)) {
        throw ConfigError("rollout: projection_epsilon must be positive");
    }
}

} // namespace

std::vector<double> rollout(const TransitionModel& model, std::span<const double> s0_raw,
                            const RolloutConfig& cfg, const InvariantModel& cdn,
                            const StructuredEnergyNet& se, Rng& rng) {
    check_rollout_cfg(cfg);
    const int d = model.state_dim();
    if (static_cast<int>(s0_raw.size()) != d) {
        throw InputError("rollout: initial state dimension mismatch");
    }

    std::vector<double> out(static_cast<std::size_t>(cfg.horizon + 1) * d);
    std::copy(s0_raw.begin(), s0_raw.end(), out.begin());
    const double h0 = se.value_raw(s0_raw);

    std::vector<double> s(s0_raw.begin(), s0_raw.end());
    std::vector<double> s_std(static_cast<std::size_t>(d));
    for (int step = 1; step <= cfg.horizon; ++step) {
        for (int j = 0; j < d; ++j) {
            s_std[static_cast<std::size_t>(j)] =
                model.state_stats.to_normalized(s[static_cast<std::size_t>(j)], j);
        }
        const double f_t = cdn.value_raw(s);
        Eigen::VectorXd delta = sample_delta(model, s_std, f_t, rng);
        for (int j = 0; j < d; ++j) {
            s[static_cast<std::size_t>(j)] =
                model.state_stats.to_raw(s_std[static_cast<std::size_t>(j)] + delta(j), j);
        }
        for (int p = 0; p < cfg.projection_steps_per_sample; ++p) {
            s = project_energy(s, h0, se, cfg.projection_epsilon);
        }
        for (int j = 0; j < d; ++j) {
            double v = s[static_cast<std::size_t>(j)];
            if (!std::isfinite(v)) {
                throw NumericError("rollout: non-finite state at step " +
                                   std::to_string(step));
            }
            out[static_cast<std::size_t>(step) * d + static_cast<std::size_t>(j)] = v;
        }
    }
    return out;
}

TrajectoryBatch rollout_batch(const TransitionModel& model, const TrajectoryBatch& truth,
                              int n_rollouts, const RolloutConfig& cfg,
                              const InvariantModel& cdn, const StructuredEnergyNet& se,
                              std::uint64_t seed) {
    check_rollout_cfg(cfg);
    if (truth.normalization != NormMode::Raw) {
        throw ConfigError("rollout_batch: ground-truth batch must be raw");
    }
    if (n_rollouts < 1 || n_rollouts > truth.n_traj) {
        throw InputError("rollout_batch: n_rollouts out of range");
    }
    const int d = model.state_dim();
    if (truth.dim != d) throw InputError("rollout_batch: state dimension mismatch");

    TrajectoryBatch gen;
    gen.system = truth.system;
    gen.n_traj = n_rollouts;
    gen.traj_len = cfg.horizon + 1;
    gen.dim = d;
    gen.dt = truth.dt;
    gen.provenance = "generated";
    gen.gen_seed = seed;
    gen.states.resize(static_cast<std::size_t>(n_rollouts) * gen.traj_len * d);
    gen.t0_energy.resize(static_cast<std::size_t>(n_rollouts));

    const auto n = static_cast<Eigen::Index>(n_rollouts);
    Eigen::MatrixXd s_raw(n, d);
    Eigen::VectorXd h0(n);
    std::vector<Rng> streams;
    streams.reserve(static_cast<std::size_t>(n_rollouts));
    Rng root(seed);
    std::vector<double> state(static_cast<std::size_t>(d));
    for (int i = 0; i < n_rollouts; ++i) {
        auto s0 = truth.state_at(i, 0);
        for (int j = 0; j < d; ++j) s_raw(i, j) = s0[j];
        std::copy(s0.begin(), s0.end(), state.begin());
        h0(i) = se.value_raw(state);
        gen.t0_energy[static_cast<std::size_t>(i)] = analytic_energy(truth.system, state);
        streams.push_back(root.child(static_cast<std::uint64_t>(i)));
        double* row = gen.traj(i);
        for (int j = 0; j < d; ++j) row[j] = s0[j];
    }

    Eigen::MatrixXd s_std(n, d), x(n, d), h_grads;
    Eigen::VectorXd f(n), h_vals;
    std::vector<int> t_vec(static_cast<std::size_t>(n_rollouts));
    for (int step = 1; step <= cfg.horizon; ++step) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                s_std(i, j) = model.state_stats.to_normalized(s_raw(i, j), j);
            }
        }
        f = cdn.values_raw(s_raw);

        // Ancestral sampling in lockstep; trajectory i draws only from its own
        // stream, in the same order as a serial rollout.
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) x(i, j) = streams[static_cast<std::size_t>(i)].normal();
        }
        for (int t = model.schedule.n_steps - 1; t >= 0; --t) {
            std::fill(t_vec.begin(), t_vec.end(), t);
            Eigen::MatrixXd eps = model.predict_noise(x, s_std, f, t_vec);
            const ReverseCoeffs c = reverse_coeffs(model.schedule, t);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (int j = 0; j < d; ++j) {
                    x(i, j) = (x(i, j) - c.eps_scale * eps(i, j)) * c.inv_sqrt_alpha;
                }
                if (t > 0) {
                    for (int j = 0; j < d; ++j) {
                        x(i, j) += c.sigma * streams[static_cast<std::size_t>(i)].normal();
                    }
                }
            }
        }

        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                s_raw(i, j) = model.state_stats.to_raw(s_std(i, j) + x(i, j), j);
            }
        }
        for (int p = 0; p < cfg.projection_steps_per_sample; ++p) {
            se.values_and_input_grads(s_raw, h_vals, h_grads);
            for (Eigen::Index i = 0; i < n; ++i) {
                double g2 = 0.0;
                for (int j = 0; j < d; ++j) g2 += h_grads(i, j) * h_grads(i, j);
                if (!std::isfinite(g2)) {
                    throw NumericError("rollout_batch: non-finite gradient at step " +
                                       std::to_string(step));
                }
                double scale = (h_vals(i) - h0(i)) / (g2 + cfg.projection_epsilon);
                for (int j = 0; j < d; ++j) s_raw(i, j) -= scale * h_grads(i, j);
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            double* row = gen.traj(static_cast<int>(i)) +
                          static_cast<std::size_t>(step) * d;
            for (int j = 0; j < d; ++j) {
                if (!std::isfinite(s_raw(i, j))) {
                    throw NumericError("rollout_batch: non-finite state in trajectory " +
                                       std::to_string(i) + " at step " +
                                       std::to_string(step));
                }
                row[j] = s_raw(i, j);
            }
        }
    }
    return gen;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kNetMagic = "CONSLNET";
} // namespace

void save_transition_checkpoint(const TransitionModel& model, const CheckpointInfo& info,
                                const std::filesystem::path& path) {
    nlohmann::json meta{
        {"schema", "transition-checkpoint"},
        {"state_dim", model.state_dim()},
        {"dims", model.denoiser.dims()},
        {"embed_dim", model.embedding.dim},
        {"embed_max_period", model.embedding.max_period},
        {"schedule",
         {{"n_steps", model.schedule.n_steps},
          {"beta_start", model.schedule.beta_start},
          {"beta_end", model.schedule.beta_end}}},
        {"norm",
         {{"mode", to_string(model.state_stats.mode)},
          {"a", model.state_stats.a},
          {"b", model.state_stats.b}}},
        {"info",
         {{"model_label", info.model_label},
          {"system", info.system},
          {"dataset_tag", info.dataset_tag},
          {"noise_fraction", info.noise_fraction},
          {"epochs", info.epochs},
          {"seed", info.seed},
          {"lambda_align", info.lambda_align}}}};
    std::vector<double> params;
    model.denoiser.flatten_params(params);
    detail::write_blob(path, kNetMagic, 1, meta, params);
}

LoadedTransition load_transition_checkpoint(const std::filesystem::path& path) {
    detail::Blob blob = detail::read_blob(path, kNetMagic);
    const auto& m = blob.meta;
    try {
        if (m.at("schema").get<std::string>() != "transition-checkpoint") {
            throw IoError("'" + path.string() + "': not a transition checkpoint");
        }
        const auto& sj = m.at("schedule");
        NoiseSchedule schedule = NoiseSchedule::linear(sj.at("n_steps").get<int>(),
                                                       sj.at("beta_start").get<double>(),
                                                       sj.at("beta_end").get<double>());
        auto dims = m.at("dims").get<std::vector<int>>();
        if (dims.size() < 3) throw IoError("'" + path.string() + "': bad dims");
        const int state_dim = m.at("state_dim").get<int>();

        LoadedTransition out;
        out.model = TransitionModel(state_dim, std::move(schedule), 0, dims[1],
                                    static_cast<int>(dims.size()) - 2,
                                    m.at("embed_dim").get<int>());
        out.model.embedding.max_period = m.at("embed_max_period").get<double>();
        if (out.model.denoiser.dims() != dims) {
            throw IoError("'" + path.string() + "': architecture mismatch");
        }
        if (blob.payload.size() != out.model.denoiser.n_params()) {
            throw IoError("'" + path.string() + "': parameter payload size mismatch");
        }
        out.model.denoiser.load_params(blob.payload);
        out.model.state_stats.mode =
            norm_mode_from_string(m.at("norm").at("mode").get<std::string>());
        out.model.state_stats.a = m.at("norm").at("a").get<std::vector<double>>();
        out.model.state_stats.b = m.at("norm").at("b").get<std::vector<double>>();

        const auto& ij = m.at("info");
        out.info.model_label = ij.at("model_label").get<std::string>();
        out.info.system = ij.at("system").get<std::string>();
        out.info.dataset_tag = ij.at("dataset_tag").get<std::string>();
        out.info.noise_fraction = ij.at("noise_fraction").get<double>();
        out.info.epochs = ij.at("epochs").get<int>();
        out.info.seed = ij.at("seed").get<std::uint64_t>();
        out.info.lambda_align = ij.at("lambda_align").get<double>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': metadata field error: " + e.what());
    }
}

} // namespace conslearn
