#include "conslearn/invariant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "blob_io.hpp"

namespace conslearn {

namespace {

constexpr int kValueChunk = 16384; // rows per forward pass
constexpr int kGradChunk = 2048;   // rows per tape (bounds activation memory)

double population_std(std::span<const double> x, double* mean_out = nullptr) {
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(x.size());
    if (mean_out) *mean_out = mu;
    return std::sqrt(var);
}

} // namespace

double consistency_loss(const Eigen::MatrixXd& values) {
    if (values.cols() < 2) {
        throw InputError("consistency_loss: need at least two time steps");
    }
    const auto b = values.rows();
    const auto t = values.cols();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index k = 0; k + 1 < t; ++k) {
            double d = values(i, k + 1) - values(i, k);
            sum += d * d;
        }
    }
    return sum / (static_cast<double>(b) * static_cast<double>(t - 1));
}

double variance_hinge(std::span<const double> initial_values,
                      const ConservationLossConfig& cfg) {
    if (initial_values.size() < 2) {
        throw InputError("variance_hinge: need at least two trajectories");
    }
    double sd = population_std(initial_values);
    return cfg.lambda_var * std::max(0.0, cfg.var_epsilon - sd * sd);
}

double alignment_loss(std::span<const double> f0, std::span<const double> e0) {
    if (f0.size() != e0.size()) {
        throw InputError("alignment_loss: length mismatch");
    }
    if (f0.size() < 2) {
        throw InputError("alignment_loss: need at least two trajectories");
    }
    double mu_f = 0.0, mu_e = 0.0;
    double sd_f = population_std(f0, &mu_f);
    double sd_e = population_std(e0, &mu_e);
    if (sd_f < 1e-12 || sd_e < 1e-12) {
        throw AlignmentDegenerateError(
            "alignment_loss: zero-variance batch (std below 1e-12)");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < f0.size(); ++i) {
        double zf = (f0[i] - mu_f) / sd_f;
        double ze = (e0[i] - mu_e) / sd_e;
        sum += (zf - ze) * (zf - ze);
    }
    return sum / static_cast<double>(f0.size());
}

// ---------------------------------------------------------------------------
// InvariantModel shared evaluation helpers

Eigen::VectorXd InvariantModel::values_raw(const Eigen::MatrixXd& raw_states) const {
    if (norm_stats.mode == NormMode::Raw) return values(raw_states);
    Eigen::MatrixXd x = raw_states;
    for (int j = 0; j < x.cols(); ++j) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            x(r, j) = norm_stats.to_normalized(x(r, j), j);
        }
    }
    return values(x);
}

double InvariantModel::value_raw(std::span<const double> raw_state) const {
    Eigen::MatrixXd x(1, static_cast<int>(raw_state.size()));
    for (std::size_t j = 0; j < raw_state.size(); ++j) x(0, static_cast<int>(j)) = raw_state[j];
    return values_raw(x)(0);
}

// ---------------------------------------------------------------------------
// BlackBoxCdn

BlackBoxCdn::BlackBoxCdn(int state_dim, std::uint64_t seed, int width, int n_hidden,
                         AdamConfig adam) {
    if (state_dim < 1 || width < 1 || n_hidden < 1) {
        throw ConfigError("BlackBoxCdn: bad architecture");
    }
    std::vector<int> dims;
    dims.push_back(state_dim);
    for (int l = 0; l < n_hidden; ++l) dims.push_back(width);
    dims.push_back(1);
    net = DenseNet(dims, seed);
    grads_.init_like(net.layers);
    adam_ = Adam(net, adam);
}

Eigen::VectorXd BlackBoxCdn::values(const Eigen::MatrixXd& states) const {
    Eigen::VectorXd out(states.rows());
    for (Eigen::Index r0 = 0; r0 < states.rows(); r0 += kValueChunk) {
        auto n = std::min<Eigen::Index>(kValueChunk, states.rows() - r0);
        out.segment(r0, n) = net.forward(states.middleRows(r0, n));
    }
    return out;
}

void BlackBoxCdn::zero_grads() { grads_.zero(); }

void BlackBoxCdn::accumulate_value_grads(const Eigen::MatrixXd& states,
                                         const Eigen::VectorXd& dvalues) {
    if (states.rows() != dvalues.size()) {
        throw InputError("BlackBoxCdn: dvalues length mismatch");
    }
    Tape tape;
    for (Eigen::Index r0 = 0; r0 < states.rows(); r0 += kGradChunk) {
        auto n = std::min<Eigen::Index>(kGradChunk, states.rows() - r0);
        net.forward(states.middleRows(r0, n), tape);
        net.backward(tape, dvalues.segment(r0, n), grads_);
    }
}

void BlackBoxCdn::optimizer_step(double lr) { adam_.step(net, grads_, lr); }

void BlackBoxCdn::flatten_params(std::vector<double>& out) const {
    net.flatten_params(out);
}

void BlackBoxCdn::load_params(std::span<const double> flat) { net.load_params(flat); }

void BlackBoxCdn::flatten_grads(std::vector<double>& out) const {
    out.clear();
    out.reserve(n_params());
    for (std::size_t l = 0; l < grads_.dW.size(); ++l) {
        const auto& dw = grads_.dW[l];
        const auto& db = grads_.db[l];
        out.insert(out.end(), dw.data(), dw.data() + dw.size());
        out.insert(out.end(), db.data(), db.data() + db.size());
    }
}

// ---------------------------------------------------------------------------
// PolynomialCdn

PolynomialCdn::PolynomialCdn(const SystemSpec& sys, std::uint64_t seed, AdamConfig adam) {
    library = FeatureLibrary::for_system(sys);
    // Small random init: w = 0 is a saddle of the objective (zero variance,
    // zero consistency gradient), so start slightly off it.
    w.resize(library.size());
    Rng rng(seed);
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = rng.uniform(-0.1, 0.1);
    grad_ = Eigen::VectorXd::Zero(library.size());
    adam_ = AdamVector(library.size(), adam);
}

Eigen::VectorXd PolynomialCdn::values(const Eigen::MatrixXd& states) const {
    Eigen::VectorXd out(states.rows());
    for (Eigen::Index r0 = 0; r0 < states.rows(); r0 += kValueChunk) {
        auto n = std::min<Eigen::Index>(kValueChunk, states.rows() - r0);
        out.segment(r0, n) = library.eval_batch(states.middleRows(r0, n)) * w;
    }
    return out;
}

void PolynomialCdn::zero_grads() { grad_.setZero(); }

void PolynomialCdn::accumulate_value_grads(const Eigen::MatrixXd& states,
                                           const Eigen::VectorXd& dvalues) {
    if (states.rows() != dvalues.size()) {
        throw InputError("PolynomialCdn: dvalues length mismatch");
    }
    for (Eigen::Index r0 = 0; r0 < states.rows(); r0 += kValueChunk) {
        auto n = std::min<Eigen::Index>(kValueChunk, states.rows() - r0);
        grad_.noalias() += library.eval_batch(states.middleRows(r0, n)).transpose() *
                           dvalues.segment(r0, n);
    }
}

void PolynomialCdn::optimizer_step(double lr) { adam_.step(w, grad_, lr); }

void PolynomialCdn::flatten_params(std::vector<double>& out) const {
    out.assign(w.data(), w.data() + w.size());
}

void PolynomialCdn::load_params(std::span<const double> flat) {
    if (flat.size() != static_cast<std::size_t>(w.size())) {
        throw InputError("PolynomialCdn: parameter payload size mismatch");
    }
    std::copy(flat.begin(), flat.end(), w.data());
}

void PolynomialCdn::flatten_grads(std::vector<double>& out) const {
    out.assign(grad_.data(), grad_.data() + grad_.size());
}

// ---------------------------------------------------------------------------
// StructuredEnergyNet

StructuredEnergyNet::StructuredEnergyNet(const SystemSpec& sys, std::uint64_t seed,
                                         int width, int n_hidden, AdamConfig adam) {
    if (sys.position_dims.empty() || sys.velocity_dims.empty()) {
        throw ConfigError("StructuredEnergyNet: system lacks a position/velocity split");
    }
    position_dims = sys.position_dims;
    velocity_dims = sys.velocity_dims;
    dim_ = sys.state_dim;

    auto make_dims = [&](int in) {
        std::vector<int> dims{in};
        for (int l = 0; l < n_hidden; ++l) dims.push_back(width);
        dims.push_back(1);
        return dims;
    };
    Rng rng(seed);
    t_net = DenseNet(make_dims(static_cast<int>(velocity_dims.size())), rng.next_u64());
    v_net = DenseNet(make_dims(static_cast<int>(position_dims.size())), rng.next_u64());
    t_grads_.init_like(t_net.layers);
    v_grads_.init_like(v_net.layers);
    t_adam_ = Adam(t_net, adam);
    v_adam_ = Adam(v_net, adam);
}

namespace {

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.col(static_cast<Eigen::Index>(k)) = x.col(idx[k]);
    }
    return out;
}

} // namespace

Eigen::VectorXd StructuredEnergyNet::values(const Eigen::MatrixXd& states) const {
    if (states.cols() != dim_) {
        throw InputError("StructuredEnergyNet: state dimension mismatch");
    }
    Eigen::VectorXd out(states.rows());
    for (Eigen::Index r0 = 0; r0 < states.rows(); r0 += kValueChunk) {
        auto n = std::min<Eigen::Index>(kValueChunk, states.rows() - r0);
        Eigen::MatrixXd block = states.middleRows(r0, n);
        out.segment(r0, n) = t_net.forward(gather_cols(block, velocity_dims)) +
                             v_net.forward(gather_cols(block, position_dims));
    }
    return out;
}

void StructuredEnergyNet::zero_grads() {
    t_grads_.zero();
    v_grads_.zero();
}

void StructuredEnergyNet::accumulate_value_grads(const Eigen::MatrixXd& states,
                                                 const Eigen::VectorXd& dvalues) {
    if (states.rows() != dvalues.size()) {
        throw InputError("StructuredEnergyNet: dvalues length mismatch");
    }
    Tape tape;
    for (Eigen::Index r0 = 0; r0 < states.rows(); r0 += kGradChunk) {
        auto n = std::min<Eigen::Index>(kGradChunk, states.rows() - r0);
        Eigen::MatrixXd block = states.middleRows(r0, n);
        Eigen::MatrixXd dy = dvalues.segment(r0, n);
        t_net.forward(gather_cols(block, velocity_dims), tape);
        t_net.backward(tape, dy, t_grads_);
        v_net.forward(gather_cols(block, position_dims), tape);
        v_net.backward(tape, dy, v_grads_);
    }
}

void StructuredEnergyNet::optimizer_step(double lr) {
    t_adam_.step(t_net, t_grads_, lr);
    v_adam_.step(v_net, v_grads_, lr);
}

void StructuredEnergyNet::flatten_params(std::vector<double>& out) const {
    std::vector<double> tmp;
    t_net.flatten_params(out);
    v_net.flatten_params(tmp);
    out.insert(out.end(), tmp.begin(), tmp.end());
}

void StructuredEnergyNet::load_params(std::span<const double> flat) {
    std::size_t nt = t_net.n_params();
    if (flat.size() != nt + v_net.n_params()) {
        throw InputError("StructuredEnergyNet: parameter payload size mismatch");
    }
    t_net.load_params(flat.subspan(0, nt));
    v_net.load_params(flat.subspan(nt));
}

void StructuredEnergyNet::flatten_grads(std::vector<double>& out) const {
    out.clear();
    out.reserve(n_params());
    auto push = [&out](const NetGrads& g) {
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            out.insert(out.end(), g.dW[l].data(), g.dW[l].data() + g.dW[l].size());
            out.insert(out.end(), g.db[l].data(), g.db[l].data() + g.db[l].size());
        }
    };
    push(t_grads_);
    push(v_grads_);
}

void StructuredEnergyNet::values_and_input_grads(const Eigen::MatrixXd& states,
                                                 Eigen::VectorXd& h,
                                                 Eigen::MatrixXd& grads) const {
    if (states.cols() != dim_) {
        throw InputError("StructuredEnergyNet: state dimension mismatch");
    }
    const auto n = states.rows();
    h.resize(n);
    grads.setZero(n, dim_);
    Tape tape;
    NetGrads scratch;
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
    Eigen::MatrixXd dx;

    Eigen::MatrixXd xv = gather_cols(states, velocity_dims);
    h = t_net.forward(xv, tape);
    scratch.init_like(t_net.layers);
    t_net.backward(tape, ones, scratch, &dx);
    for (std::size_t k = 0; k < velocity_dims.size(); ++k) {
        grads.col(velocity_dims[k]) = dx.col(static_cast<Eigen::Index>(k));
    }

    Eigen::MatrixXd xq = gather_cols(states, position_dims);
    h += v_net.forward(xq, tape).col(0);
    scratch.init_like(v_net.layers);
    v_net.backward(tape, ones, scratch, &dx);
    for (std::size_t k = 0; k < position_dims.size(); ++k) {
        grads.col(position_dims[k]) = dx.col(static_cast<Eigen::Index>(k));
    }
}

double StructuredEnergyNet::value_and_grad(std::span<const double> state,
                                           std::span<double> grad) const {
    if (static_cast<int>(state.size()) != dim_ || static_cast<int>(grad.size()) != dim_) {
        throw InputError("StructuredEnergyNet: state/grad length mismatch");
    }
    Eigen::MatrixXd x(1, dim_);
    for (int j = 0; j < dim_; ++j) x(0, j) = state[static_cast<std::size_t>(j)];
    Eigen::VectorXd h;
    Eigen::MatrixXd g;
    values_and_input_grads(x, h, g);
    for (int j = 0; j < dim_; ++j) grad[static_cast<std::size_t>(j)] = g(0, j);
    return h(0);
}

// ---------------------------------------------------------------------------
// Objective over trajectory slices

namespace {

// States gathered for one loss evaluation: the t=0 rows plus selected
// consecutive pairs, already in model coordinates.
struct BatchSlice {
    Eigen::MatrixXd x0;
    Eigen::MatrixXd xa, xb;
    Eigen::VectorXd e0;
};

BatchSlice build_slice(const TrajectoryBatch& batch, const std::vector<int>& traj,
                       const std::vector<int>& pair_starts,
                       const ConservationLossConfig& cfg) {
    const int d = batch.dim;
    const auto nb = static_cast<Eigen::Index>(traj.size());
    const auto np = static_cast<Eigen::Index>(pair_starts.size());

    BatchSlice s;
    s.x0.resize(nb, d);
    s.xa.resize(nb * np, d);
    s.xb.resize(nb * np, d);
    s.e0.resize(nb);

    for (Eigen::Index r = 0; r < nb; ++r) {
        const int i = traj[static_cast<std::size_t>(r)];
        const double* row = batch.traj(i);
        for (int j = 0; j < d; ++j) s.x0(r, j) = row[j];
        if (cfg.clean_alignment_targets) {
            s.e0(r) = batch.t0_energy[static_cast<std::size_t>(i)];
        } else {
            // Recompute from the stored t=0 state (raw coordinates).
            std::vector<double> raw(static_cast<std::size_t>(d));
            for (int j = 0; j < d; ++j) raw[static_cast<std::size_t>(j)] = batch.norm_stats.to_raw(row[j], j);
            s.e0(r) = analytic_energy(batch.system, raw);
        }
        for (Eigen::Index p = 0; p < np; ++p) {
            const int t = pair_starts[static_cast<std::size_t>(p)];
            const double* a = row + static_cast<std::size_t>(t) * d;
            const double* b = a + d;
            for (int j = 0; j < d; ++j) {
                s.xa(r * np + p, j) = a[j];
                s.xb(r * np + p, j) = b[j];
            }
        }
    }
    return s;
}

LossBreakdown eval_slice(InvariantModel& model, const BatchSlice& s,
                         const ConservationLossConfig& cfg, bool with_grads) {
    const auto nb = s.x0.rows();
    const auto np = s.xa.rows();
    if (nb < 2) throw InputError("conservation loss: need at least two trajectories");
    if (np < 1) throw InputError("conservation loss: need at least one pair");

    Eigen::VectorXd f0 = model.values(s.x0);
    Eigen::VectorXd fa = model.values(s.xa);
    Eigen::VectorXd fb = model.values(s.xb);

    LossBreakdown out;
    Eigen::VectorXd diff = fb - fa;
    out.consistency = diff.squaredNorm() / static_cast<double>(np);

    double mu_f = f0.mean();
    double var_f = (f0.array() - mu_f).square().sum() / static_cast<double>(nb);
    out.hinge = std::max(0.0, cfg.var_epsilon - var_f);

    Eigen::VectorXd df0 = Eigen::VectorXd::Zero(nb);
    if (with_grads && var_f < cfg.var_epsilon) {
        df0 = cfg.lambda_var * (-2.0 / static_cast<double>(nb)) *
              (f0.array() - mu_f).matrix();
    }

    if (cfg.lambda_align > 0.0) {
        double sd_f = std::sqrt(var_f);
        double mu_e = s.e0.mean();
        double sd_e = std::sqrt((s.e0.array() - mu_e).square().sum() /
                                static_cast<double>(nb));
        if (sd_f < 1e-12 || sd_e < 1e-12) {
            throw AlignmentDegenerateError(
                "alignment term: zero-variance batch (std below 1e-12)");
        }
        Eigen::VectorXd zf = (f0.array() - mu_f) / sd_f;
        Eigen::VectorXd ze = (s.e0.array() - mu_e) / sd_e;
        Eigen::VectorXd u = zf - ze;
        out.alignment = u.squaredNorm() / static_cast<double>(nb);
        if (with_grads) {
            // d/df0 of mean((zf - ze)^2); mean(u) = 0 since both z-scores are
            // centered, leaving the unit-variance correction term.
            double uz = u.dot(zf) / static_cast<double>(nb);
            df0 += cfg.lambda_align * (2.0 / (static_cast<double>(nb) * sd_f)) *
                   (u - uz * zf);
        }
    }

    out.total = out.consistency + cfg.lambda_var * out.hinge +
                cfg.lambda_align * out.alignment;

    if (with_grads) {
        Eigen::VectorXd dfb = (2.0 / static_cast<double>(np)) * diff;
        Eigen::VectorXd dfa = -dfb;
        model.zero_grads();
        model.accumulate_value_grads(s.x0, df0);
        model.accumulate_value_grads(s.xa, dfa);
        model.accumulate_value_grads(s.xb, dfb);
    }
    return out;
}

std::vector<int> all_pair_starts(int traj_len) {
    std::vector<int> starts(static_cast<std::size_t>(traj_len - 1));
    std::iota(starts.begin(), starts.end(), 0);
    return starts;
}

void check_normalization(const InvariantModel& model, const TrajectoryBatch& batch,
                         const char* who) {
    if (batch.normalization != model.expected_normalization()) {
        throw ConfigError(std::string(who) + ": batch is " +
                          to_string(batch.normalization) + " but the model expects " +
                          to_string(model.expected_normalization()));
    }
    if (batch.dim != model.state_dim()) {
        throw InputError(std::string(who) + ": state dimension mismatch");
    }
}

} // namespace

LossBreakdown total_loss(InvariantModel& model, const TrajectoryBatch& batch,
                         const ConservationLossConfig& cfg) {
    check_normalization(model, batch, "total_loss");
    if (batch.traj_len < 2) throw InputError("total_loss: need trajectories of length >= 2");
    std::vector<int> traj(static_cast<std::size_t>(batch.n_traj));
    std::iota(traj.begin(), traj.end(), 0);
    BatchSlice s = build_slice(batch, traj, all_pair_starts(batch.traj_len), cfg);
    return eval_slice(model, s, cfg, true);
}

std::vector<EpochStats> train_invariant(InvariantModel& model,
                                        const TrajectoryBatch& train,
                                        const TrajectoryBatch& val,
                                        const ConservationLossConfig& cfg,
                                        const InvariantTrainOptions& opt) {
    check_normalization(model, train, "train_invariant");
    check_normalization(model, val, "train_invariant (validation)");
    if (train.traj_len < 2) throw InputError("train_invariant: trajectories too short");
    if (opt.epochs < 1) throw InputError("train_invariant: epochs must be >= 1");
    if (opt.batch_traj < 2) throw InputError("train_invariant: batch_traj must be >= 2");

    model.norm_stats = train.norm_stats;

    const int t_len = train.traj_len;
    const int n_pairs = opt.pairs_per_traj;
    Rng rng(opt.seed);
    std::vector<int> pool;

    auto sample_pairs = [&](std::vector<int>& starts) {
        if (n_pairs <= 0 || n_pairs >= t_len - 1) {
            starts = all_pair_starts(t_len);
            return;
        }
        // Partial Fisher-Yates over [0, T-1): first n_pairs entries.
        pool.resize(static_cast<std::size_t>(t_len - 1));
        std::iota(pool.begin(), pool.end(), 0);
        starts.resize(static_cast<std::size_t>(n_pairs));
        for (int k = 0; k < n_pairs; ++k) {
            auto j = k + static_cast<int>(rng.uniform_index(
                             static_cast<std::uint64_t>(t_len - 1 - k)));
            std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
            starts[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
        }
    };

    // Validation probe: fixed prefix, all pairs, no gradients.
    const int n_val = std::min(opt.val_max_traj, val.n_traj);
    std::vector<int> val_traj(static_cast<std::size_t>(n_val));
    std::iota(val_traj.begin(), val_traj.end(), 0);
    BatchSlice val_slice =
        n_val >= 2 ? build_slice(val, val_traj, all_pair_starts(val.traj_len), cfg)
                   : BatchSlice{};

    const int batch_traj = std::min(opt.batch_traj, train.n_traj);
    std::vector<int> perm(static_cast<std::size_t>(train.n_traj));
    std::iota(perm.begin(), perm.end(), 0);

    std::vector<EpochStats> history;
    history.reserve(static_cast<std::size_t>(opt.epochs));

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        const double lr = opt.schedule.lr_at(epoch);
        double loss_sum = 0.0;
        int n_batches = 0;

        auto run_batch = [&](const std::vector<int>& traj_idx, int batch_no) {
            std::vector<int> starts;
            sample_pairs(starts);
            BatchSlice s = build_slice(train, traj_idx, starts, cfg);
            LossBreakdown lb = eval_slice(model, s, cfg, true);
            if (!std::isfinite(lb.total)) {
                throw NumericError("train_invariant: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_no));
            }
            model.optimizer_step(lr);
            loss_sum += lb.total;
            ++n_batches;
        };

        if (opt.batches_per_epoch > 0) {
            std::vector<int> idx(static_cast<std::size_t>(batch_traj));
            for (int k = 0; k < opt.batches_per_epoch; ++k) {
                int attempts = 0;
                while (true) {
                    for (auto& v : idx) {
                        v = static_cast<int>(rng.uniform_index(
                            static_cast<std::uint64_t>(train.n_traj)));
                    }
                    try {
                        run_batch(idx, k);
                        break;
                    } catch (const AlignmentDegenerateError&) {
                        // Degenerate batch: re-sample, as the objective asks.
                        if (++attempts > 5) throw;
                    }
                }
            }
        } else {
            // Full pass over shuffled trajectories.
            for (int i = train.n_traj - 1; i > 0; --i) {
                auto j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
                std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
            }
            int batch_no = 0;
            for (int off = 0; off + 1 < train.n_traj; off += batch_traj) {
                int n = std::min(batch_traj, train.n_traj - off);
                if (n < 2) break;
                std::vector<int> idx(perm.begin() + off, perm.begin() + off + n);
                run_batch(idx, batch_no++);
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = n_batches > 0 ? loss_sum / n_batches
                                         : std::numeric_limits<double>::quiet_NaN();
        stats.lr = lr;
        if (n_val >= 2) {
            try {
                stats.val_loss = eval_slice(model, val_slice, cfg, false).total;
            } catch (const AlignmentDegenerateError&) {
                stats.val_loss = std::numeric_limits<double>::quiet_NaN();
            }
        } else {
            stats.val_loss = std::numeric_limits<double>::quiet_NaN();
        }
        history.push_back(stats);
    }
    return history;
}

Eigen::VectorXd evaluate_invariant(const InvariantModel& model,
                                   const TrajectoryBatch& batch) {
    check_normalization(model, batch, "evaluate_invariant");
    const int d = batch.dim;
    const auto n = static_cast<Eigen::Index>(batch.n_states());
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double* s = batch.states.data() + static_cast<std::size_t>(r) * d;
        for (int j = 0; j < d; ++j) x(r, j) = s[j];
    }
    return model.values(x);
}

double invariant_fd_max_rel_err(InvariantModel& model, const TrajectoryBatch& batch,
                                const ConservationLossConfig& cfg, int n_probes,
                                std::uint64_t seed) {
    total_loss(model, batch, cfg);
    std::vector<double> grads;
    model.flatten_grads(grads);
    std::vector<double> params;
    model.flatten_params(params);

    Rng rng(seed);
    double worst = 0.0;
    for (int p = 0; p < n_probes; ++p) {
        auto idx = rng.uniform_index(params.size());
        double orig = params[idx];
        double h = 1e-5 * std::max(1.0, std::abs(orig));
        params[idx] = orig + h;
        model.load_params(params);
        double lp = total_loss(model, batch, cfg).total;
        params[idx] = orig - h;
        model.load_params(params);
        double lm = total_loss(model, batch, cfg).total;
        params[idx] = orig;
        model.load_params(params);
        double fd = (lp - lm) / (2.0 * h);
        double rel = std::abs(fd - grads[idx]) /
                     std::max(1e-8, std::abs(fd) + std::abs(grads[idx]));
        worst = std::max(worst, rel);
    }
    return worst;
}

void write_history_csv(const std::filesystem::path& path,
                       std::span<const EpochStats> history) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << "epoch,train_loss,val_loss,lr\n";
    f.precision(17);
    for (const auto& row : history) {
        f << row.epoch << ',' << row.train_loss << ',' << row.val_loss << ',' << row.lr
          << '\n';
    }
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kNetMagic = "CONSLNET";

nlohmann::json norm_to_json(const NormStats& ns) {
    return {{"mode", to_string(ns.mode)}, {"a", ns.a}, {"b", ns.b}};
}

NormStats norm_from_json(const nlohmann::json& j) {
    NormStats ns;
    ns.mode = norm_mode_from_string(j.at("mode").get<std::string>());
    ns.a = j.at("a").get<std::vector<double>>();
    ns.b = j.at("b").get<std::vector<double>>();
    return ns;
}

nlohmann::json info_to_json(const CheckpointInfo& info) {
    return {{"model_label", info.model_label},
            {"system", info.system},
            {"dataset_tag", info.dataset_tag},
            {"noise_fraction", info.noise_fraction},
            {"epochs", info.epochs},
            {"seed", info.seed},
            {"lambda_align", info.lambda_align}};
}

CheckpointInfo info_from_json(const nlohmann::json& j) {
    CheckpointInfo info;
    info.model_label = j.at("model_label").get<std::string>();
    info.system = j.at("system").get<std::string>();
    info.dataset_tag = j.at("dataset_tag").get<std::string>();
    info.noise_fraction = j.at("noise_fraction").get<double>();
    info.epochs = j.at("epochs").get<int>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.lambda_align = j.at("lambda_align").get<double>();
    return info;
}

} // namespace

void save_invariant_checkpoint(const InvariantModel& model, const CheckpointInfo& info,
                               const std::filesystem::path& path) {
    nlohmann::json meta{{"schema", "invariant-checkpoint"},
                        {"kind", model.kind()},
                        {"state_dim", model.state_dim()},
                        {"norm", norm_to_json(model.norm_stats)},
                        {"info", info_to_json(info)}};
    if (const auto* cdn = dynamic_cast<const BlackBoxCdn*>(&model)) {
        meta["dims"] = cdn->net.dims();
    } else if (const auto* se = dynamic_cast<const StructuredEnergyNet*>(&model)) {
        meta["t_dims"] = se->t_net.dims();
        meta["v_dims"] = se->v_net.dims();
    } else if (const auto* poly = dynamic_cast<const PolynomialCdn*>(&model)) {
        meta["n_terms"] = poly->library.size();
    }
    std::vector<double> params;
    model.flatten_params(params);
    detail::write_blob(path, kNetMagic, 1, meta, params);
}

LoadedInvariant load_invariant_checkpoint(const std::filesystem::path& path) {
    detail::Blob blob = detail::read_blob(path, kNetMagic);
    const auto& m = blob.meta;
    try {
        if (m.at("schema").get<std::string>() != "invariant-checkpoint") {
            throw IoError("'" + path.string() + "': not an invariant checkpoint");
        }
        LoadedInvariant out;
        out.info = info_from_json(m.at("info"));
        SystemSpec sys = SystemSpec::from_name(out.info.system);
        const std::string kind = m.at("kind").get<std::string>();

        if (kind == "cdn") {
            auto dims = m.at("dims").get<std::vector<int>>();
            if (dims.size() < 3) throw IoError("'" + path.string() + "': bad dims");
            out.model = std::make_unique<BlackBoxCdn>(dims.front(), 0, dims[1],
                                                      static_cast<int>(dims.size()) - 2);
        } else if (kind == "se") {
            auto t_dims = m.at("t_dims").get<std::vector<int>>();
            out.model = std::make_unique<StructuredEnergyNet>(
                sys, 0, t_dims.size() > 2 ? t_dims[1] : 1,
                static_cast<int>(t_dims.size()) - 2);
        } else if (kind == "poly") {
            out.model = std::make_unique<PolynomialCdn>(sys, 0);
            if (m.at("n_terms").get<int>() !=
                static_cast<const PolynomialCdn*>(out.model.get())->library.size()) {
                throw IoError("'" + path.string() + "': library size mismatch");
            }
        } else {
            throw IoError("'" + path.string() + "': unknown model kind '" + kind + "'");
        }

        if (m.at("state_dim").get<int>() != out.model->state_dim()) {
            throw IoError("'" + path.string() + "': state_dim mismatch");
        }
        if (blob.payload.size() != out.model->n_params()) {
            throw IoError("'" + path.string() + "': parameter payload size mismatch");
        }
        out.model->load_params(blob.payload);
        out.model->norm_stats = norm_from_json(m.at("norm"));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': metadata field error: " + e.what());
    }
}

} // namespace conslearn
