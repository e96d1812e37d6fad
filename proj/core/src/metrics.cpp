#include "conslearn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace conslearn {

namespace {

void check_pair_lengths(std::span<const double> a, std::span<const double> b,
                        const char* who) {
    if (a.size() != b.size()) throw InputError(std::string(who) + ": length mismatch");
    if (a.size() < 2) throw InputError(std::string(who) + ": need at least two values");
}

/// Centered second moments: (sum of squares of a, of b, cross term).
struct Moments {
    double ssa = 0.0;
    double ssb = 0.0;
    double sab = 0.0;
};

Moments centered_moments(std::span<const double> a, std::span<const double> b) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(a.size());
    mb /= static_cast<double>(b.size());
    Moments m;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        m.ssa += da * da;
        m.ssb += db * db;
        m.sab += da * db;
    }
    return m;
}

} // namespace

double pearson_r2(std::span<const double> a, std::span<const double> b) {
    check_pair_lengths(a, b, "pearson_r2");
    const Moments m = centered_moments(a, b);
    if (m.ssa == 0.0 || m.ssb == 0.0) {
        throw DegenerateMetricError("pearson_r2: zero variance input");
    }
    const double r2 = (m.sab * m.sab) / (m.ssa * m.ssb);
    // Guard against rounding pushing an exact correlation past 1.
    return std::min(r2, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    const auto n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&x](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        // Positions i..j share the value; average of ranks i+1 .. j+1.
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    check_pair_lengths(a, b, "spearman");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const Moments m = centered_moments(ra, rb);
    if (m.ssa == 0.0 || m.ssb == 0.0) {
        throw DegenerateMetricError("spearman: zero rank variance");
    }
    const double rho = m.sab / std::sqrt(m.ssa * m.ssb);
    return std::clamp(rho, -1.0, 1.0);
}

double rollout_mse(const TrajectoryBatch& generated, const TrajectoryBatch& truth) {
    if (generated.normalization != NormMode::Raw || truth.normalization != NormMode::Raw) {
        throw ConfigError("rollout_mse: both batches must be raw");
    }
    if (generated.n_traj != truth.n_traj || generated.traj_len != truth.traj_len ||
        generated.dim != truth.dim) {
        throw InputError("rollout_mse: shape mismatch");
    }
    if (generated.states.empty()) throw InputError("rollout_mse: empty batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < generated.states.size(); ++i) {
        const double d = generated.states[i] - truth.states[i];
        sum += d * d;
    }
    return sum / static_cast<double>(generated.states.size());
}

namespace {

/// Within-trajectory population std of the analytic energy, per trajectory.
std::vector<double> per_traj_energy_std(const TrajectoryBatch& batch) {
    if (batch.normalization != NormMode::Raw) {
        throw ConfigError("energy statistics need a raw batch");
    }
    if (batch.n_traj < 1 || batch.traj_len < 1) {
        throw InputError("energy statistics: empty batch");
    }
    std::vector<double> stds(static_cast<std::size_t>(batch.n_traj));
    std::vector<double> e(static_cast<std::size_t>(batch.traj_len));
    for (int i = 0; i < batch.n_traj; ++i) {
        double mean = 0.0;
        for (int t = 0; t < batch.traj_len; ++t) {
            e[static_cast<std::size_t>(t)] = analytic_energy(batch.system, batch.state_at(i, t));
            mean += e[static_cast<std::size_t>(t)];
        }
        mean /= batch.traj_len;
        double var = 0.0;
        for (double v : e) var += (v - mean) * (v - mean);
        var /= batch.traj_len;
        stds[static_cast<std::size_t>(i)] = std::sqrt(var);
    }
    return stds;
}

double median(std::vector<double> xs) {
    const auto n = xs.size();
    std::sort(xs.begin(), xs.end());
    if (n % 2 == 1) return xs[n / 2];
    return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace

EnergySpread energy_std_ratio(const TrajectoryBatch& generated,
                              const TrajectoryBatch& truth) {
    EnergySpread out;
    out.sigma_gen = median(per_traj_energy_std(generated));
    out.sigma_true = median(per_traj_energy_std(truth));
    // Identical spreads (including the all-constant 0/0 case) count as parity.
    out.ratio = out.sigma_gen == out.sigma_true ? 1.0 : out.sigma_gen / out.sigma_true;
    return out;
}

double drift_check(const TrajectoryBatch& batch) {
    const std::vector<double> stds = per_traj_energy_std(batch);
    return *std::max_element(stds.begin(), stds.end());
}

// ---------------------------------------------------------------------------
// Report files

namespace {

std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_optional(const std::optional<double>& v) {
    return v ? csv_double(*v) : std::string{};
}

nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j{{"system", r.system},
                     {"model", r.model},
                     {"noise_fraction", r.noise_fraction},
                     {"seed", r.seed},
                     {"n_traj", r.n_traj},
                     {"epochs", r.epochs},
                     {"note", r.note}};
    if (r.r2) j["r2"] = *r.r2;
    if (r.spearman_rho) j["spearman"] = *r.spearman_rho;
    if (r.rollout_mse) j["rollout_mse"] = *r.rollout_mse;
    if (r.sigma_true) j["sigma_true"] = *r.sigma_true;
    if (r.sigma_gen) j["sigma_gen"] = *r.sigma_gen;
    if (r.ratio) j["ratio"] = *r.ratio;
    return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.system = j.at("system").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.noise_fraction = j.at("noise_fraction").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_traj = j.at("n_traj").get<int>();
    r.epochs = j.at("epochs").get<int>();
    r.note = j.value("note", std::string{});
    if (j.contains("r2")) r.r2 = j.at("r2").get<double>();
    if (j.contains("spearman")) r.spearman_rho = j.at("spearman").get<double>();
    if (j.contains("rollout_mse")) r.rollout_mse = j.at("rollout_mse").get<double>();
    if (j.contains("sigma_true")) r.sigma_true = j.at("sigma_true").get<double>();
    if (j.contains("sigma_gen")) r.sigma_gen = j.at("sigma_gen").get<double>();
    if (j.contains("ratio")) r.ratio = j.at("ratio").get<double>();
    return r;
}

} // namespace

void emit_report(std::span<const MetricsReport> reports,
                 const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    const auto csv_path = out_dir / "metrics.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open '" + csv_path.string() + "' for writing");
    csv << "system,model,noise_fraction,r2,spearman,rollout_mse,sigma_true,sigma_gen,"
           "ratio,seed,n_traj,epochs\n";
    for (const auto& r : reports) {
        csv << r.system << ',' << r.model << ',' << csv_double(r.noise_fraction) << ','
            << csv_optional(r.r2) << ',' << csv_optional(r.spearman_rho) << ','
            << csv_optional(r.rollout_mse) << ',' << csv_optional(r.sigma_true) << ','
            << csv_optional(r.sigma_gen) << ',' << csv_optional(r.ratio) << ',' << r.seed
            << ',' << r.n_traj << ',' << r.epochs << '\n';
    }
    if (!csv) throw IoError("write failed for '" + csv_path.string() + "'");
    csv.close();

    nlohmann::json root{{"energy_aggregator", "median"},
                        {"reports", nlohmann::json::array()}};
    for (const auto& r : reports) root["reports"].push_back(report_to_json(r));
    const auto json_path = out_dir / "metrics.json";
    std::ofstream js(json_path, std::ios::trunc);
    if (!js) throw IoError("cannot open '" + json_path.string() + "' for writing");
    js << root.dump(2) << '\n';
    if (!js) throw IoError("write failed for '" + json_path.string() + "'");
}

std::vector<MetricsReport> load_reports(const std::filesystem::path& out_dir) {
    const auto json_path = out_dir / "metrics.json";
    std::ifstream in(json_path);
    if (!in) return {};
    nlohmann::json root;
    try {
        in >> root;
        std::vector<MetricsReport> out;
        for (const auto& j : root.at("reports")) out.push_back(report_from_json(j));
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + json_path.string() + "': " + e.what());
    }
}

void emit_energy_series(const std::string& run_id, const TrajectoryBatch& raw_batch,
                        std::span<const double> learned_values,
                        const std::filesystem::path& out_dir) {
    if (raw_batch.normalization != NormMode::Raw) {
        throw ConfigError("emit_energy_series: batch must be raw");
    }
    if (learned_values.size() != raw_batch.n_states()) {
        throw InputError("emit_energy_series: learned value count mismatch");
    }
    const auto dir = out_dir / "energy_series";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const auto path = dir / (run_id + ".csv");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << "traj,t,analytic_energy,learned_value\n";
    std::size_t row = 0;
    for (int i = 0; i < raw_batch.n_traj; ++i) {
        for (int t = 0; t < raw_batch.traj_len; ++t, ++row) {
            f << i << ',' << t << ','
              << csv_double(analytic_energy(raw_batch.system, raw_batch.state_at(i, t)))
              << ',' << csv_double(learned_values[row]) << '\n';
        }
    }
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

} // namespace conslearn
