#pragma once

#include "mrfno/ensemble.hpp"

namespace mrfno {

/// Gaussian with covariance Lambda + B B^T: a positive diagonal plus a rank-M
/// spread term whose columns are the centered member means scaled by
/// 1/sqrt(M-1).
struct LowRankGaussian {
    Eigen::VectorXd mean;    // d
    Eigen::VectorXd diag;    // d, entries > 0 (Lambda)
    Eigen::MatrixXd factor;  // d x M (B)
};

/// Gaussian moment match of one mixture: mean = average member mean,
/// Lambda = average member noise variance on the diagonal, B from the
/// (unbiased) empirical covariance of the member means.
LowRankGaussian moment_match(const PredictiveMixture& p);

/// Member-aligned joint of two mixtures from the same ensemble: means and
/// factors stack blockwise, each block's diagonal carries its own averaged
/// noise variance, and all cross-block covariance comes from B B^T.
LowRankGaussian moment_match(const PredictiveMixture& p1, const PredictiveMixture& p2);

/// log det(Lambda + B B^T) via the matrix determinant lemma:
/// sum log Lambda_i + log det(I + B^T Lambda^-1 B), O(d M^2 + M^3).
double logdet_lowrank(const LowRankGaussian& g);

/// Gaussian differential entropy 0.5 log det(cov) + (d/2)(1 + log 2 pi).
double entropy(const LowRankGaussian& g);

/// Mutual information between two member-aligned predictions under the
/// matched Gaussians: 0.5 (log det S1 + log det S2 - log det S12).
double mutual_information(const PredictiveMixture& p1, const PredictiveMixture& p2);

} // namespace mrfno
