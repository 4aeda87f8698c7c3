#include "mrfno/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>

#include "mrfno/fft.hpp"
#include "mrfno/util.hpp"

namespace mrfno {

namespace {

constexpr double kLog2Pi = 1.8378770664093453; // log(2 pi)

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * (1.0 / std::numbers::sqrt2))); }
double gelu_grad(double z) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return 0.5 * (1.0 + std::erf(z * (1.0 / std::numbers::sqrt2))) + z * phi;
}

Eigen::MatrixXd apply_act(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Gelu: return z.unaryExpr([](double v) { return gelu(v); });
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

Eigen::MatrixXd act_deriv(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Gelu: return z.unaryExpr([](double v) { return gelu_grad(v); });
        case Activation::Relu:
            return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::Tanh: {
            Eigen::MatrixXd t = z.array().tanh().matrix();
            return (1.0 - t.array().square()).matrix();
        }
    }
    return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

// Spectrum bookkeeping for one grid: where each weight bin lives in the full
// DFT array, its conjugate partner (-1 when the bin has none), and the factor
// the backward pass applies (bins with a conjugate partner count twice).
struct SpectralMap {
    std::vector<long> off;
    std::vector<long> conj_off;
    std::vector<double> scale;
};

SpectralMap spectral_map(const GridSpec& grid, const std::vector<int>& modes) {
    SpectralMap map;
    if (grid.dims() == 1) {
        const int n = grid.axes[0].n;
        const int m = modes[0];
        if (n < 2 * m)
            throw ModeTruncationError("grid of " + std::to_string(n) +
                                      " nodes cannot carry " + std::to_string(m) + " modes");
        for (int k = 0; k < m; ++k) {
            map.off.push_back(k);
            map.conj_off.push_back(k == 0 ? -1 : n - k);
            map.scale.push_back(k == 0 ? 1.0 : 2.0);
        }
    } else {
        const int n0 = grid.axes[0].n;
        const int n1 = grid.axes[1].n;
        const int m0 = modes[0];
        const int m1 = modes.size() > 1 ? modes[1] : modes[0];
        if (n0 < 2 * m0 || n1 < 2 * m1)
            throw ModeTruncationError("grid " + std::to_string(n0) + "x" + std::to_string(n1) +
                                      " cannot carry " + std::to_string(m0) + "x" +
                                      std::to_string(m1) + " modes");
        for (int s0 = -(m0 - 1); s0 <= m0 - 1; ++s0)
            for (int k1 = 0; k1 < m1; ++k1) {
                const long a = (s0 + n0) % n0;
                map.off.push_back(a * n1 + k1);
                if (k1 == 0) {
                    map.conj_off.push_back(-1);
                    map.scale.push_back(1.0);
                } else {
                    const long ac = (n0 - s0) % n0;
                    map.conj_off.push_back(ac * n1 + (n1 - k1));
                    map.scale.push_back(2.0);
                }
            }
    }
    return map;
}

using CMap = Eigen::Map<const Eigen::MatrixXd>;
using MMap = Eigen::Map<Eigen::MatrixXd>;

} // namespace

Activation activation_from_name(const std::string& name) {
    if (name == "gelu") return Activation::Gelu;
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation: " + name);
}

InputSignature signature_for(const TaskSpec& task) {
    InputSignature sig;
    sig.dims = task.highest().grid.dims();
    sig.n_resolutions = task.R();
    if (task.kind == TaskKind::NS) {
        sig.in_channels = task.controls.ns_slices / 2;
        sig.out_channels = task.controls.ns_slices / 2;
    } else {
        sig.in_channels = 1;
        sig.out_channels = 1;
    }
    return sig;
}

FnoModel::FnoModel(ModelConfig config, InputSignature sig)
    : config_(std::move(config)), sig_(sig), act_(activation_from_name(config_.activation)) {
    if (config_.width < 1 || config_.n_layers < 1)
        throw ConfigError("model width and layer count must be at least 1");
    if (config_.n_modes.empty()) throw ConfigError("n_modes must name at least one axis");
    feature_dim_ = sig_.in_channels + sig_.dims + sig_.n_resolutions;

    const int W = config_.width;
    const int m0 = config_.n_modes[0];
    const int m1 = config_.n_modes.size() > 1 ? config_.n_modes[1] : m0;
    n_bins_ = sig_.dims == 1 ? m0 : (2 * m0 - 1) * m1;

    long off = 0;
    auto alloc = [&](long rows, long cols, bool cplx = false) {
        Slot s{off, rows, cols};
        off += rows * cols * (cplx ? 2 : 1);
        return s;
    };
    s_lift_w1_ = alloc(feature_dim_, config_.lift_hidden);
    s_lift_b1_ = alloc(1, config_.lift_hidden);
    s_lift_w2_ = alloc(config_.lift_hidden, W);
    s_lift_b2_ = alloc(1, W);
    for (int l = 0; l < config_.n_layers; ++l) {
        s_spec_.push_back(alloc(W, static_cast<long>(n_bins_) * W, true));
        s_pw_.push_back(alloc(W, W));
        s_pb_.push_back(alloc(1, W));
    }
    s_mean_w1_ = alloc(W, config_.proj_hidden);
    s_mean_b1_ = alloc(1, config_.proj_hidden);
    s_mean_w2_ = alloc(config_.proj_hidden, sig_.out_channels);
    s_mean_b2_ = alloc(1, sig_.out_channels);
    s_var_cw_ = alloc(W, W);
    s_var_cb_ = alloc(1, W);
    s_var_w1_ = alloc(W, config_.proj_hidden);
    s_var_b1_ = alloc(1, config_.proj_hidden);
    s_var_w2_ = alloc(config_.proj_hidden, 1);
    s_var_b2_ = alloc(1, 1);
    total_params_ = off;
}

namespace {

CMap cm(const Eigen::VectorXd& t, const long off, long rows, long cols) {
    return CMap(t.data() + off, rows, cols);
}

MMap mm(Eigen::VectorXd& t, const long off, long rows, long cols) {
    return MMap(t.data() + off, rows, cols);
}

} // namespace

#define MRFNO_VIEW(name, slot)                                             \
    Eigen::Map<Eigen::MatrixXd> FnoModel::name(Eigen::VectorXd& t) const { \
        return mm(t, slot.off, slot.rows, slot.cols);                      \
    }

MRFNO_VIEW(lift_w1, s_lift_w1_)
MRFNO_VIEW(lift_b1, s_lift_b1_)
MRFNO_VIEW(lift_w2, s_lift_w2_)
MRFNO_VIEW(lift_b2, s_lift_b2_)
MRFNO_VIEW(mean_w1, s_mean_w1_)
MRFNO_VIEW(mean_b1, s_mean_b1_)
MRFNO_VIEW(mean_w2, s_mean_w2_)
MRFNO_VIEW(mean_b2, s_mean_b2_)
MRFNO_VIEW(var_conv_w, s_var_cw_)
MRFNO_VIEW(var_conv_b, s_var_cb_)
MRFNO_VIEW(var_w1, s_var_w1_)
MRFNO_VIEW(var_b1, s_var_b1_)
MRFNO_VIEW(var_w2, s_var_w2_)
MRFNO_VIEW(var_b2, s_var_b2_)
#undef MRFNO_VIEW

Eigen::Map<Eigen::MatrixXd> FnoModel::pointwise_w(Eigen::VectorXd& t, int layer) const {
    const Slot& s = s_pw_[static_cast<size_t>(layer)];
    return mm(t, s.off, s.rows, s.cols);
}

Eigen::Map<Eigen::MatrixXd> FnoModel::pointwise_b(Eigen::VectorXd& t, int layer) const {
    const Slot& s = s_pb_[static_cast<size_t>(layer)];
    return mm(t, s.off, s.rows, s.cols);
}

Eigen::Map<Eigen::MatrixXcd> FnoModel::spectral_w(Eigen::VectorXd& t, int layer, int bin) const {
    const Slot& s = s_spec_[static_cast<size_t>(layer)];
    const int W = config_.width;
    auto* base = reinterpret_cast<std::complex<double>*>(t.data() + s.off);
    return Eigen::Map<Eigen::MatrixXcd>(base + static_cast<long>(bin) * W * W, W, W);
}

Eigen::VectorXd FnoModel::init_params(std::uint64_t seed) const {
    Eigen::VectorXd theta(total_params_);
    std::mt19937_64 rng(seed);
    auto fill_linear = [&](const Slot& w, const Slot& b, long fan_in) {
        const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-s, s);
        for (long i = 0; i < w.rows * w.cols; ++i) theta(w.off + i) = u(rng);
        for (long i = 0; i < b.rows * b.cols; ++i) theta(b.off + i) = u(rng);
    };
    fill_linear(s_lift_w1_, s_lift_b1_, feature_dim_);
    fill_linear(s_lift_w2_, s_lift_b2_, config_.lift_hidden);
    const double spec_scale = 1.0 / (static_cast<double>(config_.width) * config_.width);
    std::uniform_real_distribution<double> us(0.0, spec_scale);
    for (int l = 0; l < config_.n_layers; ++l) {
        const Slot& s = s_spec_[static_cast<size_t>(l)];
        for (long i = 0; i < s.rows * s.cols * 2; ++i) theta(s.off + i) = us(rng);
        fill_linear(s_pw_[static_cast<size_t>(l)], s_pb_[static_cast<size_t>(l)], config_.width);
    }
    fill_linear(s_mean_w1_, s_mean_b1_, config_.width);
    fill_linear(s_mean_w2_, s_mean_b2_, config_.proj_hidden);
    fill_linear(s_var_cw_, s_var_cb_, config_.width);
    fill_linear(s_var_w1_, s_var_b1_, config_.width);
    fill_linear(s_var_w2_, s_var_b2_, config_.proj_hidden);
    return theta;
}

// --- forward -----------------------------------------------------------------

namespace {

Eigen::MatrixXd assemble_features(const GridSpec& grid, const Eigen::MatrixXd& values,
                                  const Eigen::VectorXd& embedding, int B) {
    const long n = grid.num_nodes();
    const int dims = grid.dims();
    const int cin = static_cast<int>(values.cols());
    const int R = static_cast<int>(embedding.size());
    Eigen::MatrixXd coords = grid.coordinates();
    Eigen::MatrixXd feats(n * B, cin + dims + R);
    feats.leftCols(cin) = values;
    for (int b = 0; b < B; ++b) feats.block(b * n, cin, n, dims) = coords;
    for (int r = 0; r < R; ++r) feats.col(cin + dims + r).setConstant(embedding(r));
    return feats;
}

} // namespace

struct FnoModel::Cache {
    int B = 1;
    long n = 0;
    Eigen::MatrixXd feats;
    Eigen::MatrixXd lift_z1, lift_a1;
    std::vector<Eigen::MatrixXd> v;  // v[0] = lift output, v[l+1] = layer l output
    std::vector<Eigen::MatrixXd> z;  // pre-activation per layer
    std::vector<std::vector<Eigen::MatrixXcd>> vhat; // per layer, per bin (B x W)
    Eigen::MatrixXd mean_z1, mean_a1, mean_out;
    Eigen::MatrixXd var_cz, var_ca, var_z1, var_a1, var_field;
    Eigen::VectorXd eta_raw, eta;
};

void FnoModel::spectral_conv(const Eigen::VectorXd& theta, int layer, const GridSpec& grid,
                             int B, const Eigen::MatrixXd& field, Eigen::MatrixXd& out,
                             std::vector<Eigen::MatrixXcd>* vhat_bins) const {
    const long n = grid.num_nodes();
    const int W = config_.width;
    const int n0 = grid.axes[0].n;
    const int n1 = grid.dims() == 2 ? grid.axes[1].n : 0;
    const SpectralMap map = spectral_map(grid, config_.n_modes);

    Eigen::MatrixXcd buf = field.cast<std::complex<double>>();
    for (int c = 0; c < W; ++c) fft::transform_many(buf.col(c).data(), n0, n1, B, -1);

    Eigen::MatrixXcd spec = Eigen::MatrixXcd::Zero(n * B, W);
    const Slot& s = s_spec_[static_cast<size_t>(layer)];
    const auto* wbase = reinterpret_cast<const std::complex<double>*>(theta.data() + s.off);
    Eigen::MatrixXcd vk(B, W), hk(B, W);
    if (vhat_bins) vhat_bins->resize(map.off.size());
    for (size_t k = 0; k < map.off.size(); ++k) {
        for (int b = 0; b < B; ++b) vk.row(b) = buf.row(b * n + map.off[k]);
        Eigen::Map<const Eigen::MatrixXcd> rk(wbase + static_cast<long>(k) * W * W, W, W);
        hk.noalias() = vk * rk.transpose();
        for (int b = 0; b < B; ++b) {
            spec.row(b * n + map.off[k]) = hk.row(b);
            if (map.conj_off[k] >= 0) spec.row(b * n + map.conj_off[k]) = hk.row(b).conjugate();
        }
        if (vhat_bins) (*vhat_bins)[k] = vk;
    }
    for (int c = 0; c < W; ++c) fft::transform_many(spec.col(c).data(), n0, n1, B, +1);
    out = spec.real() / static_cast<double>(n);
}

void FnoModel::spectral_conv_grad(const Eigen::VectorXd& theta, int layer, const GridSpec& grid,
                                  int B, const Eigen::MatrixXd& upstream,
                                  const std::vector<Eigen::MatrixXcd>& vhat_bins,
                                  Eigen::VectorXd& grad, Eigen::MatrixXd& dfield) const {
    const long n = grid.num_nodes();
    const int W = config_.width;
    const int n0 = grid.axes[0].n;
    const int n1 = grid.dims() == 2 ? grid.axes[1].n : 0;
    const SpectralMap map = spectral_map(grid, config_.n_modes);

    Eigen::MatrixXcd gbuf = upstream.cast<std::complex<double>>();
    for (int c = 0; c < W; ++c) fft::transform_many(gbuf.col(c).data(), n0, n1, B, -1);

    Eigen::MatrixXcd gv = Eigen::MatrixXcd::Zero(n * B, W);
    const Slot& s = s_spec_[static_cast<size_t>(layer)];
    const auto* wbase = reinterpret_cast<const std::complex<double>*>(theta.data() + s.off);
    auto* gbase = reinterpret_cast<std::complex<double>*>(grad.data() + s.off);
    Eigen::MatrixXcd ghk(B, W), gvk(B, W);
    for (size_t k = 0; k < map.off.size(); ++k) {
        for (int b = 0; b < B; ++b) ghk.row(b) = gbuf.row(b * n + map.off[k]);
        ghk *= map.scale[k] / static_cast<double>(n);
        Eigen::Map<const Eigen::MatrixXcd> rk(wbase + static_cast<long>(k) * W * W, W, W);
        Eigen::Map<Eigen::MatrixXcd> grk(gbase + static_cast<long>(k) * W * W, W, W);
        grk.noalias() += ghk.transpose() * vhat_bins[k].conjugate();
        gvk.noalias() = ghk * rk.conjugate();
        for (int b = 0; b < B; ++b) gv.row(b * n + map.off[k]) = gvk.row(b);
    }
    for (int c = 0; c < W; ++c) fft::transform_many(gv.col(c).data(), n0, n1, B, +1);
    dfield += gv.real();
}

FnoModel::Prediction FnoModel::forward(const Eigen::VectorXd& theta, const GridSpec& grid,
                                       const Eigen::MatrixXd& values,
                                       const Eigen::VectorXd& embedding, Cache* cache) const {
    if (grid.dims() != sig_.dims)
        throw ConfigError("model built for " + std::to_string(sig_.dims) + "D grids");
    if (values.cols() != sig_.in_channels)
        throw ConfigError("expected " + std::to_string(sig_.in_channels) + " input channels");
    if (embedding.size() != sig_.n_resolutions)
        throw InvalidResolutionError("embedding length " + std::to_string(embedding.size()) +
                                     " != R = " + std::to_string(sig_.n_resolutions));
    const long n = grid.num_nodes();
    if (values.rows() % n != 0) throw ConfigError("batch rows are not a multiple of grid nodes");
    const int B = static_cast<int>(values.rows() / n);
    const int W = config_.width;

    Cache local;
    Cache& c = cache ? *cache : local;
    c.B = B;
    c.n = n;

    c.feats = assemble_features(grid, values, embedding, B);
    c.lift_z1 = c.feats * cm(theta, s_lift_w1_.off, s_lift_w1_.rows, s_lift_w1_.cols);
    c.lift_z1.rowwise() += cm(theta, s_lift_b1_.off, 1, s_lift_b1_.cols).row(0);
    c.lift_a1 = apply_act(act_, c.lift_z1);

    c.v.assign(static_cast<size_t>(config_.n_layers) + 1, Eigen::MatrixXd());
    c.z.assign(static_cast<size_t>(config_.n_layers), Eigen::MatrixXd());
    c.vhat.assign(static_cast<size_t>(config_.n_layers), {});
    c.v[0] = c.lift_a1 * cm(theta, s_lift_w2_.off, s_lift_w2_.rows, s_lift_w2_.cols);
    c.v[0].rowwise() += cm(theta, s_lift_b2_.off, 1, s_lift_b2_.cols).row(0);

    Eigen::MatrixXd spec_out;
    for (int l = 0; l < config_.n_layers; ++l) {
        const auto& vl = c.v[static_cast<size_t>(l)];
        Eigen::MatrixXd zl = vl * cm(theta, s_pw_[static_cast<size_t>(l)].off, W, W);
        zl.rowwise() += cm(theta, s_pb_[static_cast<size_t>(l)].off, 1, W).row(0);
        spectral_conv(theta, l, grid, B, vl, spec_out,
                      cache ? &c.vhat[static_cast<size_t>(l)] : nullptr);
        zl += spec_out;
        c.z[static_cast<size_t>(l)] = zl;
        c.v[static_cast<size_t>(l) + 1] = apply_act(act_, zl);
    }
    const auto& vout = c.v[static_cast<size_t>(config_.n_layers)];

    c.mean_z1 = vout * cm(theta, s_mean_w1_.off, s_mean_w1_.rows, s_mean_w1_.cols);
    c.mean_z1.rowwise() += cm(theta, s_mean_b1_.off, 1, s_mean_b1_.cols).row(0);
    c.mean_a1 = apply_act(act_, c.mean_z1);
    c.mean_out = c.mean_a1 * cm(theta, s_mean_w2_.off, s_mean_w2_.rows, s_mean_w2_.cols);
    c.mean_out.rowwise() += cm(theta, s_mean_b2_.off, 1, s_mean_b2_.cols).row(0);

    c.var_cz = vout * cm(theta, s_var_cw_.off, s_var_cw_.rows, s_var_cw_.cols);
    c.var_cz.rowwise() += cm(theta, s_var_cb_.off, 1, s_var_cb_.cols).row(0);
    c.var_ca = apply_act(act_, c.var_cz);
    c.var_z1 = c.var_ca * cm(theta, s_var_w1_.off, s_var_w1_.rows, s_var_w1_.cols);
    c.var_z1.rowwise() += cm(theta, s_var_b1_.off, 1, s_var_b1_.cols).row(0);
    c.var_a1 = apply_act(act_, c.var_z1);
    c.var_field = c.var_a1 * cm(theta, s_var_w2_.off, s_var_w2_.rows, s_var_w2_.cols);
    c.var_field.array() += theta(s_var_b2_.off);

    c.eta_raw.resize(B);
    c.eta.resize(B);
    const double floor_log = std::log(kVarianceFloor);
    for (int b = 0; b < B; ++b) {
        c.eta_raw(b) = c.var_field.middleRows(b * n, n).mean();
        c.eta(b) = std::max(c.eta_raw(b), floor_log);
    }

    if (!c.mean_out.allFinite() || !c.eta.allFinite())
        throw Error("non-finite model output (parameter norm " + fmt_double(theta.norm()) + ")");
    return Prediction{c.mean_out, c.eta};
}

FnoModel::Prediction FnoModel::predict_batch(const Eigen::VectorXd& theta, const GridSpec& grid,
                                             const Eigen::MatrixXd& values,
                                             const Eigen::VectorXd& embedding) const {
    return forward(theta, grid, values, embedding, nullptr);
}

std::pair<DiscretizedFunction, double> FnoModel::predict(const Eigen::VectorXd& theta,
                                                         const DiscretizedFunction& f,
                                                         const Eigen::VectorXd& embedding) const {
    auto p = forward(theta, f.grid, f.values, embedding, nullptr);
    return {DiscretizedFunction(f.grid, std::move(p.mean), f.resolution_index), p.eta(0)};
}

Eigen::MatrixXd FnoModel::lift(const Eigen::VectorXd& theta, const GridSpec& grid,
                               const Eigen::MatrixXd& values, const Eigen::VectorXd& embedding,
                               int batch) const {
    if (embedding.size() != sig_.n_resolutions)
        throw InvalidResolutionError("embedding length mismatch in lift");
    Eigen::MatrixXd feats = assemble_features(grid, values, embedding, batch);
    Eigen::MatrixXd z1 = feats * cm(theta, s_lift_w1_.off, s_lift_w1_.rows, s_lift_w1_.cols);
    z1.rowwise() += cm(theta, s_lift_b1_.off, 1, s_lift_b1_.cols).row(0);
    Eigen::MatrixXd out =
        apply_act(act_, z1) * cm(theta, s_lift_w2_.off, s_lift_w2_.rows, s_lift_w2_.cols);
    out.rowwise() += cm(theta, s_lift_b2_.off, 1, s_lift_b2_.cols).row(0);
    return out;
}

Eigen::MatrixXd FnoModel::apply_fourier_layer(const Eigen::VectorXd& theta, int layer,
                                              const GridSpec& grid, const Eigen::MatrixXd& field,
                                              int batch) const {
    const int W = config_.width;
    if (field.cols() != W) throw ConfigError("fourier layer expects width-channel fields");
    Eigen::MatrixXd z = field * cm(theta, s_pw_[static_cast<size_t>(layer)].off, W, W);
    z.rowwise() += cm(theta, s_pb_[static_cast<size_t>(layer)].off, 1, W).row(0);
    Eigen::MatrixXd spec_out;
    spectral_conv(theta, layer, grid, batch, field, spec_out, nullptr);
    z += spec_out;
    return apply_act(act_, z);
}

Eigen::MatrixXd FnoModel::last_layer_features(const Eigen::VectorXd& theta, const GridSpec& grid,
                                              const Eigen::MatrixXd& values,
                                              const Eigen::VectorXd& embedding, int batch) const {
    Eigen::MatrixXd v = lift(theta, grid, values, embedding, batch);
    for (int l = 0; l < config_.n_layers; ++l) v = apply_fourier_layer(theta, l, grid, v, batch);
    return v;
}

// --- loss and gradient ---------------------------------------------------------

double FnoModel::nll_batch(const Eigen::VectorXd& theta, const GridSpec& grid,
                           const Eigen::MatrixXd& values, const Eigen::MatrixXd& targets,
                           const Eigen::VectorXd& embedding) const {
    auto p = forward(theta, grid, values, embedding, nullptr);
    const long n = grid.num_nodes();
    const int B = static_cast<int>(values.rows() / n);
    const double d = static_cast<double>(n) * sig_.out_channels;
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const double ss = (p.mean.middleRows(b * n, n) - targets.middleRows(b * n, n)).squaredNorm();
        loss += 0.5 * d * (p.eta(b) + kLog2Pi) + ss / (2.0 * std::exp(p.eta(b)));
    }
    return loss;
}

double FnoModel::nll_and_grad(const Eigen::VectorXd& theta, const GridSpec& grid,
                              const Eigen::MatrixXd& values, const Eigen::MatrixXd& targets,
                              const Eigen::VectorXd& embedding, Eigen::VectorXd& grad) const {
    Cache c;
    forward(theta, grid, values, embedding, &c);
    const long n = c.n;
    const int B = c.B;
    const int W = config_.width;
    const double d = static_cast<double>(n) * sig_.out_channels;
    const double floor_log = std::log(kVarianceFloor);

    grad.setZero(total_params_);

    Eigen::MatrixXd dmean(c.mean_out.rows(), c.mean_out.cols());
    Eigen::VectorXd deta(B);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const Eigen::MatrixXd resid =
            c.mean_out.middleRows(b * n, n) - targets.middleRows(b * n, n);
        const double ss = resid.squaredNorm();
        const double e_eta = std::exp(c.eta(b));
        loss += 0.5 * d * (c.eta(b) + kLog2Pi) + ss / (2.0 * e_eta);
        dmean.middleRows(b * n, n) = resid / e_eta;
        deta(b) = c.eta_raw(b) > floor_log ? 0.5 * d - ss / (2.0 * e_eta) : 0.0;
    }

    const auto& vout = c.v[static_cast<size_t>(config_.n_layers)];

    // variance head
    Eigen::MatrixXd dfield(c.var_field.rows(), 1);
    for (int b = 0; b < B; ++b)
        dfield.middleRows(b * n, n).setConstant(deta(b) / static_cast<double>(n));
    mm(grad, s_var_w2_.off, s_var_w2_.rows, s_var_w2_.cols).noalias() += c.var_a1.transpose() * dfield;
    grad(s_var_b2_.off) += dfield.sum();
    Eigen::MatrixXd dva1 = dfield * cm(theta, s_var_w2_.off, s_var_w2_.rows, s_var_w2_.cols).transpose();
    Eigen::MatrixXd dvz1 = dva1.cwiseProduct(act_deriv(act_, c.var_z1));
    mm(grad, s_var_w1_.off, s_var_w1_.rows, s_var_w1_.cols).noalias() += c.var_ca.transpose() * dvz1;
    mm(grad, s_var_b1_.off, 1, s_var_b1_.cols).row(0) += dvz1.colwise().sum();
    Eigen::MatrixXd dvca = dvz1 * cm(theta, s_var_w1_.off, s_var_w1_.rows, s_var_w1_.cols).transpose();
    Eigen::MatrixXd dvcz = dvca.cwiseProduct(act_deriv(act_, c.var_cz));
    mm(grad, s_var_cw_.off, s_var_cw_.rows, s_var_cw_.cols).noalias() += vout.transpose() * dvcz;
    mm(grad, s_var_cb_.off, 1, s_var_cb_.cols).row(0) += dvcz.colwise().sum();
    Eigen::MatrixXd dv = dvcz * cm(theta, s_var_cw_.off, s_var_cw_.rows, s_var_cw_.cols).transpose();

    // mean head
    mm(grad, s_mean_w2_.off, s_mean_w2_.rows, s_mean_w2_.cols).noalias() +=
        c.mean_a1.transpose() * dmean;
    mm(grad, s_mean_b2_.off, 1, s_mean_b2_.cols).row(0) += dmean.colwise().sum();
    Eigen::MatrixXd dma1 = dmean * cm(theta, s_mean_w2_.off, s_mean_w2_.rows, s_mean_w2_.cols).transpose();
    Eigen::MatrixXd dmz1 = dma1.cwiseProduct(act_deriv(act_, c.mean_z1));
    mm(grad, s_mean_w1_.off, s_mean_w1_.rows, s_mean_w1_.cols).noalias() += vout.transpose() * dmz1;
    mm(grad, s_mean_b1_.off, 1, s_mean_b1_.cols).row(0) += dmz1.colwise().sum();
    dv.noalias() += dmz1 * cm(theta, s_mean_w1_.off, s_mean_w1_.rows, s_mean_w1_.cols).transpose();

    // Fourier layers, reversed
    for (int l = config_.n_layers - 1; l >= 0; --l) {
        Eigen::MatrixXd dz = dv.cwiseProduct(act_deriv(act_, c.z[static_cast<size_t>(l)]));
        const auto& vl = c.v[static_cast<size_t>(l)];
        mm(grad, s_pw_[static_cast<size_t>(l)].off, W, W).noalias() += vl.transpose() * dz;
        mm(grad, s_pb_[static_cast<size_t>(l)].off, 1, W).row(0) += dz.colwise().sum();
        Eigen::MatrixXd dprev = dz * cm(theta, s_pw_[static_cast<size_t>(l)].off, W, W).transpose();
        spectral_conv_grad(theta, l, grid, B, dz, c.vhat[static_cast<size_t>(l)], grad, dprev);
        dv = std::move(dprev);
    }

    // lift
    mm(grad, s_lift_w2_.off, s_lift_w2_.rows, s_lift_w2_.cols).noalias() +=
        c.lift_a1.transpose() * dv;
    mm(grad, s_lift_b2_.off, 1, s_lift_b2_.cols).row(0) += dv.colwise().sum();
    Eigen::MatrixXd dla1 = dv * cm(theta, s_lift_w2_.off, s_lift_w2_.rows, s_lift_w2_.cols).transpose();
    Eigen::MatrixXd dlz1 = dla1.cwiseProduct(act_deriv(act_, c.lift_z1));
    mm(grad, s_lift_w1_.off, s_lift_w1_.rows, s_lift_w1_.cols).noalias() +=
        c.feats.transpose() * dlz1;
    mm(grad, s_lift_b1_.off, 1, s_lift_b1_.cols).row(0) += dlz1.colwise().sum();

    return loss;
}

// --- training ------------------------------------------------------------------

Eigen::VectorXd train(const FnoModel& model, const std::vector<LabeledExample>& dataset,
                      const TrainConfig& tconfig, const Eigen::VectorXd* warm_start) {
    if (dataset.empty()) throw ConfigError("train: dataset is empty");
    if (tconfig.batch_size < 1 || !(tconfig.learning_rate > 0.0))
        throw ConfigError("train: bad batch size or learning rate");

    // resolution buckets (grids of different sizes cannot be stacked)
    std::map<int, std::vector<int>> buckets;
    for (size_t i = 0; i < dataset.size(); ++i)
        buckets[dataset[i].resolution_index].push_back(static_cast<int>(i));

    const int R = model.signature().n_resolutions;
    long batches_per_epoch = 0;
    for (const auto& [r, idx] : buckets) {
        if (r < 1 || r > R) throw InvalidResolutionError("dataset resolution outside [1, R]");
        batches_per_epoch += (static_cast<long>(idx.size()) + tconfig.batch_size - 1) / tconfig.batch_size;
    }
    const long total_steps = batches_per_epoch * tconfig.epochs;

    Eigen::VectorXd theta =
        warm_start ? *warm_start : model.init_params(derive_seed(tconfig.seed, 0x696e6974ULL));
    Eigen::VectorXd grad(model.num_params());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(model.num_params());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(model.num_params());
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    long step = 0;
    for (int epoch = 0; epoch < tconfig.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(tconfig.seed, 0x7368756654ULL, static_cast<std::uint64_t>(epoch)));
        struct BatchRef {
            int r;
            std::vector<int> idx;
        };
        std::vector<BatchRef> order;
        for (auto& [r, idx] : buckets) {
            std::vector<int> shuffled = idx;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            for (size_t k = 0; k < shuffled.size(); k += static_cast<size_t>(tconfig.batch_size)) {
                BatchRef b;
                b.r = r;
                const size_t end = std::min(shuffled.size(), k + static_cast<size_t>(tconfig.batch_size));
                b.idx.assign(shuffled.begin() + static_cast<long>(k), shuffled.begin() + static_cast<long>(end));
                order.push_back(std::move(b));
            }
        }
        std::shuffle(order.begin(), order.end(), rng);

        for (const auto& batch : order) {
            const auto& first = dataset[static_cast<size_t>(batch.idx[0])];
            const GridSpec& grid = first.input.grid;
            const long n = grid.num_nodes();
            const int B = static_cast<int>(batch.idx.size());
            Eigen::MatrixXd values(n * B, first.input.channels());
            Eigen::MatrixXd targets(n * B, first.output.channels());
            for (int b = 0; b < B; ++b) {
                values.middleRows(b * n, n) = dataset[static_cast<size_t>(batch.idx[static_cast<size_t>(b)])].input.values;
                targets.middleRows(b * n, n) = dataset[static_cast<size_t>(batch.idx[static_cast<size_t>(b)])].output.values;
            }
            const Eigen::VectorXd e = one_hot_embedding(batch.r, R);

            const double loss = model.nll_and_grad(theta, grid, values, targets, e, grad);
            if (!std::isfinite(loss))
                throw TrainingError("train: non-finite loss at step " + std::to_string(step), step);
            grad /= static_cast<double>(B);

            const double lr = tconfig.lr_min +
                              0.5 * (tconfig.learning_rate - tconfig.lr_min) *
                                  (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                                  static_cast<double>(total_steps)));
            ++step;
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            theta.array() -=
                lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
            if (!theta.allFinite())
                throw TrainingError("train: parameters diverged at step " + std::to_string(step),
                                    step);
        }
    }
    return theta;
}

double gaussian_nll(const FnoModel& model, const Eigen::VectorXd& theta,
                    const std::vector<LabeledExample>& batch) {
    if (batch.empty()) throw ConfigError("gaussian_nll: empty batch");
    const int r = batch.front().resolution_index;
    for (const auto& ex : batch)
        if (ex.resolution_index != r)
            throw ConfigError("gaussian_nll: batch mixes resolutions");
    const GridSpec& grid = batch.front().input.grid;
    const long n = grid.num_nodes();
    const int B = static_cast<int>(batch.size());
    Eigen::MatrixXd values(n * B, batch.front().input.channels());
    Eigen::MatrixXd targets(n * B, batch.front().output.channels());
    for (int b = 0; b < B; ++b) {
        values.middleRows(b * n, n) = batch[static_cast<size_t>(b)].input.values;
        targets.middleRows(b * n, n) = batch[static_cast<size_t>(b)].output.values;
    }
    const Eigen::VectorXd e = one_hot_embedding(r, model.signature().n_resolutions);
    return model.nll_batch(theta, grid, values, targets, e);
}

} // namespace mrfno
