#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "conslearn/error.hpp"

namespace conslearn::cli {

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.se.width = 128;
    cfg.se.hidden = 2;
    cfg.se.seed = 2;
    return cfg;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Typed setter for one "section.key".
using Setter = std::function<void(const std::string&)>;

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config: key '" + key + "' needs true or false, got '" + v + "'");
}

std::string parse_string(const std::string& v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\''))) {
        return v.substr(1, v.size() - 2);
    }
    return v;
}

std::map<std::string, Setter> build_registry(ExperimentConfig& cfg) {
    std::map<std::string, Setter> reg;
    auto add_int = [&reg](const std::string& key, int& field) {
        reg[key] = [key, &field](const std::string& v) {
            field = static_cast<int>(parse_int(key, v));
        };
    };
    auto add_u64 = [&reg](const std::string& key, std::uint64_t& field) {
        reg[key] = [key, &field](const std::string& v) {
            field = static_cast<std::uint64_t>(parse_int(key, v));
        };
    };
    auto add_double = [&reg](const std::string& key, double& field) {
        reg[key] = [key, &field](const std::string& v) { field = parse_double(key, v); };
    };
    auto add_bool = [&reg](const std::string& key, bool& field) {
        reg[key] = [key, &field](const std::string& v) { field = parse_bool(key, v); };
    };
    auto add_string = [&reg](const std::string& key, std::string& field) {
        reg[key] = [&field](const std::string& v) { field = parse_string(v); };
    };

    add_string("run.system", cfg.run.system);

    add_int("data.n_traj", cfg.data.n_traj);
    add_int("data.n_steps", cfg.data.n_steps);
    add_double("data.dt", cfg.data.dt);
    add_double("data.noise_fraction", cfg.data.noise_fraction);
    add_u64("data.gen_seed", cfg.data.gen_seed);
    add_u64("data.noise_seed", cfg.data.noise_seed);
    add_double("data.train_fraction", cfg.data.train_fraction);
    add_u64("data.split_seed", cfg.data.split_seed);

    add_double("loss.lambda_var", cfg.loss.lambda_var);
    add_double("loss.var_epsilon", cfg.loss.var_epsilon);
    add_double("loss.lambda_align", cfg.loss.lambda_align);

    auto add_mlp = [&](const std::string& sec, MlpTrainCfg& m) {
        add_int(sec + ".width", m.width);
        add_int(sec + ".hidden", m.hidden);
        add_int(sec + ".epochs", m.epochs);
        add_int(sec + ".batches_per_epoch", m.batches_per_epoch);
        add_int(sec + ".batch_traj", m.batch_traj);
        add_int(sec + ".pairs_per_traj", m.pairs_per_traj);
        add_double(sec + ".lr", m.lr);
        add_double(sec + ".min_lr", m.min_lr);
        add_int(sec + ".warmup_epochs", m.warmup_epochs);
        add_int(sec + ".restart_period", m.restart_period);
        add_int(sec + ".period_multiplier", m.period_multiplier);
        add_u64(sec + ".seed", m.seed);
        add_int(sec + ".val_max_traj", m.val_max_traj);
    };
    add_mlp("cdn", cfg.cdn);
    add_mlp("se", cfg.se);

    add_int("poly.epochs", cfg.poly.epochs);
    add_int("poly.max_traj", cfg.poly.max_traj);
    add_int("poly.epochs_short", cfg.poly.epochs_short);
    add_int("poly.max_traj_short", cfg.poly.max_traj_short);
    add_int("poly.batch_traj", cfg.poly.batch_traj);
    add_double("poly.lr", cfg.poly.lr);
    add_u64("poly.seed", cfg.poly.seed);
    add_int("poly.val_max_traj", cfg.poly.val_max_traj);

    add_int("ddpm.width", cfg.ddpm.width);
    add_int("ddpm.hidden", cfg.ddpm.hidden);
    add_int("ddpm.embed_dim", cfg.ddpm.embed_dim);
    add_int("ddpm.n_diffusion_steps", cfg.ddpm.n_diffusion_steps);
    add_double("ddpm.beta_start", cfg.ddpm.beta_start);
    add_double("ddpm.beta_end", cfg.ddpm.beta_end);
    add_int("ddpm.epochs", cfg.ddpm.epochs);
    add_int("ddpm.batches_per_epoch", cfg.ddpm.batches_per_epoch);
    add_int("ddpm.batch_size", cfg.ddpm.batch_size);
    add_double("ddpm.lr", cfg.ddpm.lr);
    add_u64("ddpm.seed", cfg.ddpm.seed);
    add_int("ddpm.val_samples", cfg.ddpm.val_samples);
    add_bool("ddpm.shuffle_conditioning", cfg.ddpm.shuffle_conditioning);

    add_int("rollout.horizon", cfg.rollout.horizon);
    add_int("rollout.n_rollouts", cfg.rollout.n_rollouts);
    add_int("rollout.projection_steps", cfg.rollout.projection_steps);
    add_double("rollout.projection_epsilon", cfg.rollout.projection_epsilon);
    add_u64("rollout.seed", cfg.rollout.seed);

    add_double("symreg.threshold", cfg.symreg.threshold);
    add_double("symreg.ridge_lambda", cfg.symreg.ridge_lambda);
    add_int("symreg.max_iterations", cfg.symreg.max_iterations);
    add_int("symreg.decimals", cfg.symreg.decimals);

    add_string("output.dir", cfg.output.dir);
    return reg;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_config();
    auto reg = build_registry(cfg);

    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string s = trim(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(std::string_view(s).substr(1, s.size() - 2));
            if (section.empty()) {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": empty section name");
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string value = trim(std::string_view(s).substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }
        const std::string full = section.empty() ? key : section + "." + key;
        auto it = reg.find(full);
        if (it == reg.end()) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": unknown key '" + full + "'");
        }
        it->second(value);
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string dump_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[run]\n"
       << "system = " << c.run.system << "\n\n";
    os << "[data]\n"
       << "n_traj = " << c.data.n_traj << "\n"
       << "n_steps = " << c.data.n_steps << "\n"
       << "dt = " << fmt(c.data.dt) << "\n"
       << "noise_fraction = " << fmt(c.data.noise_fraction) << "\n"
       << "gen_seed = " << c.data.gen_seed << "\n"
       << "noise_seed = " << c.data.noise_seed << "\n"
       << "train_fraction = " << fmt(c.data.train_fraction) << "\n"
       << "split_seed = " << c.data.split_seed << "\n\n";
    os << "[loss]\n"
       << "lambda_var = " << fmt(c.loss.lambda_var) << "\n"
       << "var_epsilon = " << fmt(c.loss.var_epsilon) << "\n"
       << "lambda_align = " << fmt(c.loss.lambda_align) << "\n\n";
    auto mlp = [&os](const char* sec, const MlpTrainCfg& m) {
        os << '[' << sec << "]\n"
           << "width = " << m.width << "\n"
           << "hidden = " << m.hidden << "\n"
           << "epochs = " << m.epochs << "\n"
           << "batches_per_epoch = " << m.batches_per_epoch << "\n"
           << "batch_traj = " << m.batch_traj << "\n"
           << "pairs_per_traj = " << m.pairs_per_traj << "\n"
           << "lr = " << fmt(m.lr) << "\n"
           << "min_lr = " << fmt(m.min_lr) << "\n"
           << "warmup_epochs = " << m.warmup_epochs << "\n"
           << "restart_period = " << m.restart_period << "\n"
           << "period_multiplier = " << m.period_multiplier << "\n"
           << "seed = " << m.seed << "\n"
           << "val_max_traj = " << m.val_max_traj << "\n\n";
    };
    mlp("cdn", c.cdn);
    mlp("se", c.se);
    os << "[poly]\n"
       << "epochs = " << c.poly.epochs << "\n"
       << "max_traj = " << c.poly.max_traj << "\n"
       << "epochs_short = " << c.poly.epochs_short << "\n"
       << "max_traj_short = " << c.poly.max_traj_short << "\n"
       << "batch_traj = " << c.poly.batch_traj << "\n"
       << "lr = " << fmt(c.poly.lr) << "\n"
       << "seed = " << c.poly.seed << "\n"
       << "val_max_traj = " << c.poly.val_max_traj << "\n\n";
    os << "[ddpm]\n"
       << "width = " << c.ddpm.width << "\n"
       << "hidden = " << c.ddpm.hidden << "\n"
       << "embed_dim = " << c.ddpm.embed_dim << "\n"
       << "n_diffusion_steps = " << c.ddpm.n_diffusion_steps << "\n"
       << "beta_start = " << fmt(c.ddpm.beta_start) << "\n"
       << "beta_end = " << fmt(c.ddpm.beta_end) << "\n"
       << "epochs = " << c.ddpm.epochs << "\n"
       << "batches_per_epoch = " << c.ddpm.batches_per_epoch << "\n"
       << "batch_size = " << c.ddpm.batch_size << "\n"
       << "lr = " << fmt(c.ddpm.lr) << "\n"
       << "seed = " << c.ddpm.seed << "\n"
       << "val_samples = " << c.ddpm.val_samples << "\n"
       << "shuffle_conditioning = " << (c.ddpm.shuffle_conditioning ? "true" : "false")
       << "\n\n";
    os << "[rollout]\n"
       << "horizon = " << c.rollout.horizon << "\n"
       << "n_rollouts = " << c.rollout.n_rollouts << "\n"
       << "projection_steps = " << c.rollout.projection_steps << "\n"
       << "projection_epsilon = " << fmt(c.rollout.projection_epsilon) << "\n"
       << "seed = " << c.rollout.seed << "\n\n";
    os << "[symreg]\n"
       << "threshold = " << fmt(c.symreg.threshold) << "\n"
       << "ridge_lambda = " << fmt(c.symreg.ridge_lambda) << "\n"
       << "max_iterations = " << c.symreg.max_iterations << "\n"
       << "decimals = " << c.symreg.decimals << "\n\n";
    os << "[output]\n"
       << "dir = " << c.output.dir << "\n";
    return os.str();
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
    if (!cfg.output.dir.empty()) return cfg.output.dir;
    if (const char* env = std::getenv("CONSLEARN_OUT"); env && *env) return env;
    return "out";
}

} // namespace conslearn::cli
