#include "conslearn/net.hpp"

#include <cmath>
#include <numbers>

namespace conslearn {

double silu(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return x * s;
}

double silu_derivative(double x) {
    double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

void NetGrads::init_like(const std::vector<DenseLayer>& layers) {
    dW.resize(layers.size());
    db.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        dW[l] = Eigen::MatrixXd::Zero(layers[l].W.rows(), layers[l].W.cols());
        db[l] = Eigen::VectorXd::Zero(layers[l].b.size());
    }
}

void NetGrads::zero() {
    for (auto& m : dW) m.setZero();
    for (auto& v : db) v.setZero();
}

DenseNet::DenseNet(const std::vector<int>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ConfigError("DenseNet: need at least in and out dims");
    for (int d : dims) {
        if (d < 1) throw ConfigError("DenseNet: layer widths must be positive");
    }
    Rng rng(seed);
    layers.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        int fan_in = dims[l], fan_out = dims[l + 1];
        double a = std::sqrt(6.0 / (fan_in + fan_out));
        auto& layer = layers[l];
        layer.W.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) layer.W(r, c) = rng.uniform(-a, a);
        }
        layer.b = Eigen::VectorXd::Zero(fan_out);
    }
}

std::vector<int> DenseNet::dims() const {
    std::vector<int> d;
    if (layers.empty()) return d;
    d.push_back(static_cast<int>(layers.front().W.cols()));
    for (const auto& layer : layers) d.push_back(static_cast<int>(layer.W.rows()));
    return d;
}

std::size_t DenseNet::n_params() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += static_cast<std::size_t>(layer.W.size()) + layer.b.size();
    }
    return n;
}

namespace {

void check_input(const DenseNet& net, const Eigen::MatrixXd& X) {
    if (net.layers.empty()) throw StateError("DenseNet: uninitialized network");
    if (X.cols() != net.in_dim()) {
        throw InputError("DenseNet: input has " + std::to_string(X.cols()) +
                         " columns, expected " + std::to_string(net.in_dim()));
    }
}

} // namespace

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& X) const {
    check_input(*this, X);
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = a * layers[l].W.transpose();
        z.rowwise() += layers[l].b.transpose();
        if (l + 1 < layers.size()) {
            a = z.unaryExpr([](double x) { return silu(x); });
        } else {
            a = std::move(z);
        }
    }
    return a;
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& X, Tape& tape) const {
    check_input(*this, X);
    tape.input = X;
    tape.pre.assign(layers.size(), {});
    tape.post.assign(layers.size(), {});
    tape.serial = ++forward_serial_;

    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = a * layers[l].W.transpose();
        z.rowwise() += layers[l].b.transpose();
        tape.pre[l] = z;
        if (l + 1 < layers.size()) {
            a = z.unaryExpr([](double x) { return silu(x); });
            tape.post[l] = a;
        } else {
            a = std::move(z);
        }
    }
    return a;
}

void DenseNet::backward(const Tape& tape, const Eigen::MatrixXd& dY, NetGrads& grads,
                        Eigen::MatrixXd* dX) const {
    if (layers.empty()) throw StateError("DenseNet: uninitialized network");
    if (tape.pre.size() != layers.size()) {
        throw StateError("DenseNet: tape does not belong to this network");
    }
    if (tape.serial != forward_serial_) {
        throw StateError("DenseNet: stale tape (another tape forward ran since)");
    }
    if (dY.rows() != tape.input.rows() || dY.cols() != out_dim()) {
        throw InputError("DenseNet: dY shape mismatch");
    }
    if (grads.dW.size() != layers.size()) grads.init_like(layers);

    Eigen::MatrixXd dz = dY;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Eigen::MatrixXd& a_prev = li == 0 ? tape.input : tape.post[li - 1];
        grads.dW[li].noalias() += dz.transpose() * a_prev;
        grads.db[li] += dz.colwise().sum().transpose();
        if (li == 0 && dX == nullptr) break;
        Eigen::MatrixXd da = dz * layers[li].W;
        if (li == 0) {
            *dX = std::move(da);
            break;
        }
        dz = da.cwiseProduct(
            tape.pre[li - 1].unaryExpr([](double x) { return silu_derivative(x); }));
    }
}

void DenseNet::flatten_params(std::vector<double>& out) const {
    out.clear();
    out.reserve(n_params());
    for (const auto& layer : layers) {
        out.insert(out.end(), layer.W.data(), layer.W.data() + layer.W.size());
        out.insert(out.end(), layer.b.data(), layer.b.data() + layer.b.size());
    }
}

void DenseNet::load_params(std::span<const double> flat) {
    if (flat.size() != n_params()) {
        throw InputError("DenseNet: parameter payload has " + std::to_string(flat.size()) +
                         " values, expected " + std::to_string(n_params()));
    }
    std::size_t off = 0;
    for (auto& layer : layers) {
        std::copy_n(flat.data() + off, layer.W.size(), layer.W.data());
        off += static_cast<std::size_t>(layer.W.size());
        std::copy_n(flat.data() + off, layer.b.size(), layer.b.data());
        off += static_cast<std::size_t>(layer.b.size());
    }
}

Adam::Adam(const DenseNet& net, AdamConfig cfg) : cfg_(cfg) {
    mW_.resize(net.layers.size());
    vW_.resize(net.layers.size());
    mb_.resize(net.layers.size());
    vb_.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        mW_[l] = Eigen::MatrixXd::Zero(net.layers[l].W.rows(), net.layers[l].W.cols());
        vW_[l] = mW_[l];
        mb_[l] = Eigen::VectorXd::Zero(net.layers[l].b.size());
        vb_[l] = mb_[l];
    }
}

void Adam::step(DenseNet& net, const NetGrads& grads, double lr) {
    if (mW_.size() != net.layers.size() || grads.dW.size() != net.layers.size()) {
        throw InputError("Adam: optimizer/net/grads layer count mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!grads.dW[l].allFinite() || !grads.db[l].allFinite()) {
            throw NumericError("Adam: non-finite gradient in layer " + std::to_string(l));
        }
        auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
            v = (cfg_.beta2 * v.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
            p.array() -=
                lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
        };
        update(net.layers[l].W, mW_[l], vW_[l], grads.dW[l]);
        update(net.layers[l].b, mb_[l], vb_[l], grads.db[l]);
    }
}

AdamVector::AdamVector(int n, AdamConfig cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void AdamVector::step(Eigen::VectorXd& w, const Eigen::VectorXd& g, double lr) {
    if (w.size() != m_.size() || g.size() != m_.size()) {
        throw InputError("AdamVector: size mismatch");
    }
    if (!g.allFinite()) throw NumericError("AdamVector: non-finite gradient");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
    v_ = (cfg_.beta2 * v_.array() + (1.0 - cfg_.beta2) * g.array().square()).matrix();
    w.array() -= lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
}

double LrSchedule::lr_at(int epoch) const {
    if (epoch < 0) throw InputError("LrSchedule: epoch must be >= 0");
    if (!(base_lr > 0.0)) throw ConfigError("LrSchedule: base_lr must be positive");
    const double floor = std::max(min_lr, 1e-8 * base_lr);
    if (kind == Kind::Constant) return base_lr;

    if (warmup_epochs > 0 && epoch < warmup_epochs) {
        double ramp = base_lr * static_cast<double>(epoch) / warmup_epochs;
        return std::max(ramp, floor);
    }
    long tau = epoch - warmup_epochs;
    long period = std::max(1, restart_period);
    const int mult = std::max(1, period_multiplier);
    while (tau >= period) {
        tau -= period;
        period *= mult;
    }
    double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(tau) /
                                          static_cast<double>(period)));
    return std::max(min_lr + (base_lr - min_lr) * cosine, floor);
}

SinusoidalEmbedding::SinusoidalEmbedding(int dim, double max_period)
    : dim(dim), max_period(max_period) {
    if (dim < 2 || dim % 2 != 0) {
        throw ConfigError("SinusoidalEmbedding: dim must be even and >= 2");
    }
    if (!(max_period > 1.0)) {
        throw ConfigError("SinusoidalEmbedding: max_period must exceed 1");
    }
}

void SinusoidalEmbedding::embed(std::int64_t t, std::span<double> out) const {
    if (static_cast<int>(out.size()) != dim) {
        throw InputError("SinusoidalEmbedding: output span has wrong length");
    }
    const int half = dim / 2;
    for (int k = 0; k < half; ++k) {
        double freq =
            half > 1 ? std::pow(max_period, -static_cast<double>(k) / (half - 1)) : 1.0;
        double arg = freq * static_cast<double>(t);
        out[static_cast<std::size_t>(2 * k)] = std::sin(arg);
        out[static_cast<std::size_t>(2 * k + 1)] = std::cos(arg);
    }
}

std::vector<double> SinusoidalEmbedding::embed(std::int64_t t) const {
    std::vector<double> out(static_cast<std::size_t>(dim));
    embed(t, out);
    return out;
}

namespace {

double probe_loss(const DenseNet& net, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd y = net.forward(X);
    return 0.5 * y.squaredNorm();
}

} // namespace

double fd_max_rel_err(DenseNet& net, const Eigen::MatrixXd& X, int n_probes,
                      std::uint64_t seed) {
    if (n_probes < 1) throw InputError("fd_max_rel_err: n_probes must be >= 1");

    Tape tape;
    Eigen::MatrixXd y = net.forward(X, tape);
    NetGrads grads;
    grads.init_like(net.layers);
    Eigen::MatrixXd dX;
    net.backward(tape, y, grads, &dX);

    Rng rng(seed);
    double worst = 0.0;
    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
    };
    auto central = [&](double* slot) {
        double orig = *slot;
        double h = 1e-6 * std::max(1.0, std::abs(orig));
        *slot = orig + h;
        double lp = probe_loss(net, X);
        *slot = orig - h;
        double lm = probe_loss(net, X);
        *slot = orig;
        return (lp - lm) / (2.0 * h);
    };

    for (int p = 0; p < n_probes; ++p) {
        auto l = static_cast<std::size_t>(rng.uniform_index(net.layers.size()));
        auto& layer = net.layers[l];
        auto nw = static_cast<std::uint64_t>(layer.W.size());
        auto pick = rng.uniform_index(nw + static_cast<std::uint64_t>(layer.b.size()));
        double analytic = 0.0;
        double fd = 0.0;
        if (pick < nw) {
            analytic = grads.dW[l].data()[pick];
            fd = central(layer.W.data() + pick);
        } else {
            analytic = grads.db[l].data()[pick - nw];
            fd = central(layer.b.data() + (pick - nw));
        }
        worst = std::max(worst, rel(analytic, fd));
    }

    Eigen::MatrixXd xwork = X;
    for (int p = 0; p < n_probes; ++p) {
        auto idx = rng.uniform_index(static_cast<std::uint64_t>(xwork.size()));
        double orig = xwork.data()[idx];
        double h = 1e-6 * std::max(1.0, std::abs(orig));
        xwork.data()[idx] = orig + h;
        double lp = probe_loss(net, xwork);
        xwork.data()[idx] = orig - h;
        double lm = probe_loss(net, xwork);
        xwork.data()[idx] = orig;
        double fd = (lp - lm) / (2.0 * h);
        worst = std::max(worst, rel(dX.data()[idx], fd));
    }
    return worst;
}

} // namespace conslearn
