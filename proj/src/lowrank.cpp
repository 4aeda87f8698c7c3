#include "mrfno/lowrank.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>

namespace mrfno {

namespace {
constexpr double kJitter = 1e-10; // guards the M x M solve late in training
}

LowRankGaussian moment_match(const PredictiveMixture& p) {
    const int M = p.size();
    if (M < 2) throw InsufficientEnsembleError("moment_match needs M >= 2");
    LowRankGaussian g;
    g.mean = p.mixture_mean();
    g.diag = Eigen::VectorXd::Constant(p.dim(), p.variances.mean());
    g.factor = (p.means.colwise() - g.mean) / std::sqrt(static_cast<double>(M - 1));
    return g;
}

LowRankGaussian moment_match(const PredictiveMixture& p1, const PredictiveMixture& p2) {
    if (p1.size() != p2.size())
        throw ConfigError("moment_match: mixtures must be member-aligned (same M)");
    const LowRankGaussian g1 = moment_match(p1);
    const LowRankGaussian g2 = moment_match(p2);
    LowRankGaussian g;
    g.mean.resize(g1.mean.size() + g2.mean.size());
    g.mean << g1.mean, g2.mean;
    g.diag.resize(g1.diag.size() + g2.diag.size());
    g.diag << g1.diag, g2.diag;
    g.factor.resize(g1.factor.rows() + g2.factor.rows(), g1.factor.cols());
    g.factor << g1.factor, g2.factor;
    return g;
}

double logdet_lowrank(const LowRankGaussian& g) {
    if (!(g.diag.array() > 0.0).all())
        throw ConfigError("logdet_lowrank: diagonal must be positive");
    double ld = g.diag.array().log().sum();
    const int M = static_cast<int>(g.factor.cols());
    if (M == 0 || g.factor.isZero(0.0)) return ld;

    // I + B^T Lambda^-1 B, M x M, symmetric positive definite
    Eigen::MatrixXd small = Eigen::MatrixXd::Identity(M, M);
    small.noalias() += g.factor.transpose() * g.diag.cwiseInverse().asDiagonal() * g.factor;
    small.diagonal().array() += kJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(small);
    if (llt.info() != Eigen::Success)
        throw Error("logdet_lowrank: inner factorization failed");
    ld += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return ld;
}

double entropy(const LowRankGaussian& g) {
    const double d = static_cast<double>(g.mean.size());
    return 0.5 * logdet_lowrank(g) + 0.5 * d * (1.0 + std::log(2.0 * std::numbers::pi));
}

double mutual_information(const PredictiveMixture& p1, const PredictiveMixture& p2) {
    const double ld1 = logdet_lowrank(moment_match(p1));
    const double ld2 = logdet_lowrank(moment_match(p2));
    const double ld12 = logdet_lowrank(moment_match(p1, p2));
    return 0.5 * (ld1 + ld2 - ld12);
}

} // namespace mrfno
