#include "mrfno/grf.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mrfno/fft.hpp"

namespace mrfno {

namespace {

DiscretizedFunction sample_rbf(const GRFConfig& cfg) {
    if (!(cfg.length_scale > 0.0)) throw ConfigError("rbf length_scale must be positive");
    const Eigen::MatrixXd xy = cfg.grid.coordinates();
    const long n = xy.rows();

    Eigen::MatrixXd K(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j <= i; ++j) {
            const double d2 = (xy.row(i) - xy.row(j)).squaredNorm();
            K(i, j) = K(j, i) = std::exp(-d2 / (2.0 * cfg.length_scale * cfg.length_scale));
        }
    K.diagonal().array() += cfg.jitter;

    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success)
        throw SamplingError("rbf covariance not positive definite even with jitter");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (long i = 0; i < n; ++i) z(i) = gauss(rng);

    Eigen::VectorXd w = llt.matrixL() * z;
    Eigen::MatrixXd values = cfg.amplitude * w;
    return DiscretizedFunction(cfg.grid, std::move(values));
}

// Signed frequency for DFT bin k of an n-point axis.
int signed_freq(int k, int n) { return k <= n / 2 ? k : k - n; }

DiscretizedFunction sample_spectral(const GRFConfig& cfg) {
    if (!(cfg.tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(cfg.alpha_smooth > 0.5 * cfg.grid.dims()))
        throw ConfigError("alpha_smooth must exceed dims/2 for sample continuity");

    const int dims = cfg.grid.dims();
    const int n0 = cfg.grid.axes[0].n;
    const int n1 = dims == 2 ? cfg.grid.axes[1].n : 0;
    const long total = cfg.grid.num_nodes();
    const double two_pi = 2.0 * std::numbers::pi;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::complex<double>> buf(static_cast<size_t>(total));
    for (long i = 0; i < total; ++i) buf[static_cast<size_t>(i)] = gauss(rng);

    fft::transform(buf.data(), buf.data(), n0, n1, -1);

    // Filter white noise with sqrt of the power spectrum; drop the DC mode.
    double var_sum = 0.0;
    auto gain = [&](double k2) {
        return std::pow(two_pi * two_pi * k2 + cfg.tau * cfg.tau, -0.5 * cfg.alpha_smooth);
    };
    if (dims == 1) {
        for (int k = 0; k < n0; ++k) {
            const double kf = signed_freq(k, n0);
            const double g = k == 0 ? 0.0 : gain(kf * kf);
            buf[static_cast<size_t>(k)] *= g;
            var_sum += g * g;
        }
    } else {
        for (int k0 = 0; k0 < n0; ++k0)
            for (int k1 = 0; k1 < n1; ++k1) {
                const double f0 = signed_freq(k0, n0);
                const double f1 = signed_freq(k1, n1);
                const double g = (k0 == 0 && k1 == 0) ? 0.0 : gain(f0 * f0 + f1 * f1);
                buf[static_cast<size_t>(k0) * n1 + k1] *= g;
                var_sum += g * g;
            }
    }
    // With E|FFT(xi)_k|^2 = N, the filtered field has pointwise variance
    // var_sum / N; rescale to unit marginal variance times amplitude.
    const double N = static_cast<double>(total);
    const double scale = cfg.amplitude * std::sqrt(N / var_sum) / N;

    fft::transform(buf.data(), buf.data(), n0, n1, +1);

    Eigen::MatrixXd values(total, 1);
    for (long i = 0; i < total; ++i)
        values(i, 0) = buf[static_cast<size_t>(i)].real() * scale;
    return DiscretizedFunction(cfg.grid, std::move(values));
}

} // namespace

DiscretizedFunction sample_grf(const GRFConfig& config) {
    if (config.grid.axes.empty()) throw ConfigError("sample_grf: grid not set");
    return config.kernel == GrfKernel::Rbf ? sample_rbf(config) : sample_spectral(config);
}

} // namespace mrfno
