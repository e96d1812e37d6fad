#include "conslearn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "blob_io.hpp"

namespace conslearn {

std::string to_string(NormMode mode) {
    switch (mode) {
    case NormMode::Raw: return "raw";
    case NormMode::MinMax: return "minmax";
    case NormMode::Standardize: return "standardize";
    }
    return "?";
}

NormMode norm_mode_from_string(std::string_view name) {
    if (name == "raw") return NormMode::Raw;
    if (name == "minmax") return NormMode::MinMax;
    if (name == "standardize") return NormMode::Standardize;
    throw InputError("unknown normalization mode '" + std::string(name) + "'");
}

double NormStats::to_normalized(double x, int dim) const {
    switch (mode) {
    case NormMode::Raw: return x;
    case NormMode::MinMax: return (x - a[dim]) / (b[dim] - a[dim]);
    case NormMode::Standardize: return (x - a[dim]) / b[dim];
    }
    return x;
}

double NormStats::to_raw(double x, int dim) const {
    switch (mode) {
    case NormMode::Raw: return x;
    case NormMode::MinMax: return a[dim] + x * (b[dim] - a[dim]);
    case NormMode::Standardize: return a[dim] + x * b[dim];
    }
    return x;
}

TrajectoryBatch generate_dataset(const SystemSpec& sys, int n_traj, int n_steps,
                                 double dt, std::uint64_t seed,
                                 const IntegratorConfig& icfg) {
    if (n_traj < 1) throw InputError("generate_dataset: n_traj must be >= 1");
    if (n_steps < 1) throw InputError("generate_dataset: n_steps must be >= 1");
    if (!(dt > 0.0)) throw InputError("generate_dataset: dt must be positive");

    TrajectoryBatch batch;
    batch.system = sys;
    batch.n_traj = n_traj;
    batch.traj_len = n_steps;
    batch.dim = sys.state_dim;
    batch.dt = dt;
    batch.gen_seed = seed;
    batch.states.resize(batch.n_states() * sys.state_dim);
    batch.t0_energy.resize(n_traj);

    Rng root(seed);
    const int d = sys.state_dim;
    for (int i = 0; i < n_traj; ++i) {
        Rng stream = root.child(static_cast<std::uint64_t>(i));
        std::vector<double> s0 = sample_initial(sys, stream);
        batch.t0_energy[i] = analytic_energy(sys, s0);
        double* row = batch.traj(i);
        if (sys.kind == SystemKind::Pendulum) {
            std::vector<double> traj;
            try {
                traj = integrate_rk45(sys, s0, n_steps - 1, dt, icfg);
            } catch (const IntegrationError& e) {
                throw IntegrationError("trajectory " + std::to_string(i) + ": " + e.what(),
                                       e.last_good_time);
            }
            std::copy(traj.begin(), traj.end(), row);
        } else {
            std::copy(s0.begin(), s0.end(), row);
            for (int t = 1; t < n_steps; ++t) {
                step_exact(sys, {row + static_cast<std::size_t>(t - 1) * d,
                                 static_cast<std::size_t>(d)},
                           dt,
                           {row + static_cast<std::size_t>(t) * d,
                            static_cast<std::size_t>(d)});
            }
        }
    }
    return batch;
}

TrajectoryBatch add_noise(const TrajectoryBatch& batch, double fraction,
                          std::uint64_t seed) {
    if (batch.normalization != NormMode::Raw) {
        throw StateError("add_noise: batch must be raw");
    }
    if (batch.noise_sigma_fraction != 0.0) {
        throw StateError("add_noise: noise was already applied to this batch");
    }
    if (!(fraction >= 0.0) || !std::isfinite(fraction)) {
        throw InputError("add_noise: fraction must be finite and >= 0");
    }
    if (fraction == 0.0) return batch;

    const int d = batch.dim;
    const std::size_t n = batch.n_states();

    // Per-dimension std over the whole clean batch (population).
    std::vector<double> mean(d, 0.0), sigma(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double* s = batch.states.data() + r * d;
        for (int j = 0; j < d; ++j) mean[j] += s[j];
    }
    for (int j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* s = batch.states.data() + r * d;
        for (int j = 0; j < d; ++j) {
            double c = s[j] - mean[j];
            sigma[j] += c * c;
        }
    }
    for (int j = 0; j < d; ++j) sigma[j] = std::sqrt(sigma[j] / static_cast<double>(n));

    TrajectoryBatch out = batch;
    out.noise_sigma_fraction = fraction;
    out.noise_seed = seed;
    Rng root(seed);
    for (int i = 0; i < batch.n_traj; ++i) {
        Rng stream = root.child(static_cast<std::uint64_t>(i));
        double* row = out.traj(i);
        for (int t = 0; t < batch.traj_len; ++t) {
            for (int j = 0; j < d; ++j) {
                row[static_cast<std::size_t>(t) * d + j] +=
                    fraction * sigma[j] * stream.normal();
            }
        }
    }
    return out;
}

std::vector<int> train_indices(int n_traj, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw InputError("split: train_fraction must lie in (0, 1)");
    }
    if (n_traj < 2) throw InputError("split: need at least 2 trajectories");

    std::vector<int> perm(static_cast<std::size_t>(n_traj));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(spec.seed);
    // Fisher-Yates with our own rng; std::shuffle is implementation-defined.
    for (int i = n_traj - 1; i > 0; --i) {
        auto j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[i], perm[j]);
    }
    auto n_train = static_cast<int>(std::lround(spec.train_fraction * n_traj));
    n_train = std::clamp(n_train, 1, n_traj - 1);
    std::vector<int> train(perm.begin(), perm.begin() + n_train);
    std::sort(train.begin(), train.end());
    return train;
}

namespace {

TrajectoryBatch select_trajectories(const TrajectoryBatch& batch,
                                    const std::vector<int>& idx) {
    TrajectoryBatch out = batch;
    out.n_traj = static_cast<int>(idx.size());
    out.states.resize(static_cast<std::size_t>(out.n_traj) * batch.traj_len * batch.dim);
    out.t0_energy.resize(idx.size());
    const std::size_t stride = static_cast<std::size_t>(batch.traj_len) * batch.dim;
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(batch.traj(idx[r]), stride, out.states.data() + r * stride);
        out.t0_energy[r] = batch.t0_energy[idx[r]];
    }
    return out;
}

} // namespace

TrajectoryBatch normalize(const TrajectoryBatch& batch, NormMode mode,
                          const SplitSpec& spec) {
    if (batch.normalization != NormMode::Raw) {
        throw StateError("normalize: batch is already normalized");
    }
    TrajectoryBatch out = batch;
    if (mode == NormMode::Raw) return out;

    const int d = batch.dim;
    std::vector<int> tr = train_indices(batch.n_traj, spec);

    NormStats stats;
    stats.mode = mode;
    stats.a.assign(d, 0.0);
    stats.b.assign(d, 0.0);

    if (mode == NormMode::MinMax) {
        stats.a.assign(d, std::numeric_limits<double>::infinity());
        stats.b.assign(d, -std::numeric_limits<double>::infinity());
        for (int i : tr) {
            const double* row = batch.traj(i);
            for (int t = 0; t < batch.traj_len; ++t) {
                for (int j = 0; j < d; ++j) {
                    double v = row[static_cast<std::size_t>(t) * d + j];
                    stats.a[j] = std::min(stats.a[j], v);
                    stats.b[j] = std::max(stats.b[j], v);
                }
            }
        }
        for (int j = 0; j < d; ++j) {
            if (!(stats.b[j] > stats.a[j])) {
                throw NormalizationError("normalize: dimension '" +
                                         batch.system.dim_names[j] +
                                         "' is constant on the training rows");
            }
        }
    } else {
        const auto n = static_cast<double>(tr.size()) * batch.traj_len;
        for (int i : tr) {
            const double* row = batch.traj(i);
            for (int t = 0; t < batch.traj_len; ++t) {
                for (int j = 0; j < d; ++j) {
                    stats.a[j] += row[static_cast<std::size_t>(t) * d + j];
                }
            }
        }
        for (int j = 0; j < d; ++j) stats.a[j] /= n;
        for (int i : tr) {
            const double* row = batch.traj(i);
            for (int t = 0; t < batch.traj_len; ++t) {
                for (int j = 0; j < d; ++j) {
                    double c = row[static_cast<std::size_t>(t) * d + j] - stats.a[j];
                    stats.b[j] += c * c;
                }
            }
        }
        for (int j = 0; j < d; ++j) {
            stats.b[j] = std::sqrt(stats.b[j] / n);
            if (!(stats.b[j] > 0.0)) {
                throw NormalizationError("normalize: dimension '" +
                                         batch.system.dim_names[j] +
                                         "' has zero variance on the training rows");
            }
        }
    }

    out.normalization = mode;
    out.norm_stats = stats;
    const std::size_t total = batch.n_states();
    for (std::size_t r = 0; r < total; ++r) {
        double* s = out.states.data() + r * d;
        for (int j = 0; j < d; ++j) s[j] = stats.to_normalized(s[j], j);
    }
    return out;
}

TrajectoryBatch apply_normalization(const TrajectoryBatch& batch, const NormStats& stats) {
    if (batch.normalization != NormMode::Raw) {
        throw StateError("apply_normalization: batch is already normalized");
    }
    TrajectoryBatch out = batch;
    if (stats.mode == NormMode::Raw) return out;
    if (static_cast<int>(stats.a.size()) != batch.dim ||
        static_cast<int>(stats.b.size()) != batch.dim) {
        throw InputError("apply_normalization: stats dimension mismatch");
    }
    out.normalization = stats.mode;
    out.norm_stats = stats;
    const int d = batch.dim;
    const std::size_t total = batch.n_states();
    for (std::size_t r = 0; r < total; ++r) {
        double* s = out.states.data() + r * d;
        for (int j = 0; j < d; ++j) s[j] = stats.to_normalized(s[j], j);
    }
    return out;
}

std::pair<TrajectoryBatch, TrajectoryBatch> split(const TrajectoryBatch& batch,
                                                  const SplitSpec& spec) {
    std::vector<int> tr = train_indices(batch.n_traj, spec);
    std::vector<char> in_train(static_cast<std::size_t>(batch.n_traj), 0);
    for (int i : tr) in_train[static_cast<std::size_t>(i)] = 1;
    std::vector<int> va;
    va.reserve(static_cast<std::size_t>(batch.n_traj) - tr.size());
    for (int i = 0; i < batch.n_traj; ++i) {
        if (!in_train[static_cast<std::size_t>(i)]) va.push_back(i);
    }
    return {select_trajectories(batch, tr), select_trajectories(batch, va)};
}

TrajectoryBatch take_prefix(const TrajectoryBatch& batch, int n) {
    if (n < 1 || n > batch.n_traj) {
        throw InputError("take_prefix: n out of range");
    }
    if (n == batch.n_traj) return batch;
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    return select_trajectories(batch, idx);
}

namespace {
constexpr std::string_view kTrajMagic = "CONSLTRJ";
}

void save_batch(const TrajectoryBatch& batch, const std::filesystem::path& path) {
    nlohmann::json meta{
        {"schema", "trajectory-batch"},
        {"system", batch.system.name()},
        {"g", batch.system.g},
        {"k", batch.system.k},
        {"n_traj", batch.n_traj},
        {"traj_len", batch.traj_len},
        {"dim", batch.dim},
        {"dt", batch.dt},
        {"noise_sigma_fraction", batch.noise_sigma_fraction},
        {"normalization", to_string(batch.normalization)},
        {"norm_a", batch.norm_stats.a},
        {"norm_b", batch.norm_stats.b},
        {"provenance", batch.provenance},
        {"gen_seed", batch.gen_seed},
        {"noise_seed", batch.noise_seed},
        {"t0_energy", batch.t0_energy},
    };
    detail::write_blob(path, kTrajMagic, 1, meta, batch.states);
}

TrajectoryBatch load_batch(const std::filesystem::path& path) {
    detail::Blob blob = detail::read_blob(path, kTrajMagic);
    const auto& m = blob.meta;
    try {
        TrajectoryBatch batch;
        batch.system = SystemSpec::from_name(m.at("system").get<std::string>());
        batch.system.g = m.at("g").get<double>();
        batch.system.k = m.at("k").get<double>();
        batch.n_traj = m.at("n_traj").get<int>();
        batch.traj_len = m.at("traj_len").get<int>();
        batch.dim = m.at("dim").get<int>();
        batch.dt = m.at("dt").get<double>();
        batch.noise_sigma_fraction = m.at("noise_sigma_fraction").get<double>();
        batch.normalization = norm_mode_from_string(m.at("normalization").get<std::string>());
        batch.norm_stats.mode = batch.normalization;
        batch.norm_stats.a = m.at("norm_a").get<std::vector<double>>();
        batch.norm_stats.b = m.at("norm_b").get<std::vector<double>>();
        batch.provenance = m.at("provenance").get<std::string>();
        batch.gen_seed = m.at("gen_seed").get<std::uint64_t>();
        batch.noise_seed = m.at("noise_seed").get<std::uint64_t>();
        batch.t0_energy = m.at("t0_energy").get<std::vector<double>>();

        if (batch.dim != batch.system.state_dim) {
            throw IoError("'" + path.string() + "': dim does not match system");
        }
        std::size_t expect = static_cast<std::size_t>(batch.n_traj) * batch.traj_len *
                             batch.dim;
        if (blob.payload.size() != expect) {
            throw IoError("'" + path.string() + "': payload has " +
                          std::to_string(blob.payload.size()) + " values, header implies " +
                          std::to_string(expect));
        }
        if (batch.t0_energy.size() != static_cast<std::size_t>(batch.n_traj)) {
            throw IoError("'" + path.string() + "': t0_energy length mismatch");
        }
        batch.states = std::move(blob.payload);
        return batch;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': metadata field error: " + e.what());
    }
}

} // namespace conslearn
