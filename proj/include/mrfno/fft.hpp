#pragma once

#include <complex>
#include <vector>

namespace mrfno::fft {

/// Unnormalized c2c DFT of one contiguous signal: 1D length n0, or 2D
/// shape n0 x n1 in row-major order. sign = -1 forward, +1 backward.
/// Plans are cached per shape and reused; execution is thread-safe.
void transform(const std::complex<double>* in, std::complex<double>* out,
               int n0, int n1 /* 0 for 1D */, int sign);

/// Same transform applied in place to `count` consecutive signals.
void transform_many(std::complex<double>* data, int n0, int n1, int count, int sign);

} // namespace mrfno::fft
