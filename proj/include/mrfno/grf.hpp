#pragma once

#include <cstdint>

#include "mrfno/grid.hpp"

namespace mrfno {

enum class GrfKernel { Rbf, InverseLaplacian };

/// Gaussian-random-field sampler configuration.
///
/// Rbf: covariance exp(-|x-x'|^2 / (2 l^2)) with diagonal jitter, sampled by
/// dense Cholesky (used for 1D forcing functions).
///
/// InverseLaplacian: periodic spectral sampler with power spectrum
/// (4 pi^2 |k|^2 + tau^2)^(-alpha), DC mode removed, normalized to unit
/// pointwise variance and scaled by `amplitude`.
struct GRFConfig {
    GrfKernel kernel = GrfKernel::InverseLaplacian;
    double length_scale = 0.2;   // Rbf
    double jitter = 1e-8;        // Rbf
    double tau = 3.0;            // InverseLaplacian
    double alpha_smooth = 2.0;   // InverseLaplacian; must exceed dims/2
    double amplitude = 1.0;
    GridSpec grid;
    std::uint64_t seed = 0;
};

/// One zero-mean draw on config.grid; deterministic given config.seed.
DiscretizedFunction sample_grf(const GRFConfig& config);

} // namespace mrfno
