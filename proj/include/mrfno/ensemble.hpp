#pragma once

#include <filesystem>

#include "mrfno/model.hpp"

namespace mrfno {

/// M independently trained point estimates; the posterior over parameters is
/// the uniform Dirac mixture over the members.
struct Ensemble {
    FnoModel model;
    std::vector<Eigen::VectorXd> members;
    std::vector<std::uint64_t> seeds;

    int size() const { return static_cast<int>(members.size()); }
};

/// Train M members on the same dataset with seeds base_seed..base_seed+M-1.
/// Member training runs on up to `workers` threads. A member's training
/// failure aborts the fit, reporting the member index.
Ensemble fit_ensemble(const FnoModel& model, const std::vector<LabeledExample>& dataset, int M,
                      const TrainConfig& tconfig, std::uint64_t base_seed, int workers = 1,
                      const std::vector<Eigen::VectorXd>* warm_start = nullptr);

/// Member means (flattened, column-major over channels) and member noise
/// variances sigma^2_m = exp(eta_m): a Gaussian mixture over outputs.
struct PredictiveMixture {
    Eigen::MatrixXd means;      // d x M
    Eigen::VectorXd variances;  // M

    PredictiveMixture() = default;
    PredictiveMixture(Eigen::MatrixXd means_, Eigen::VectorXd variances_);

    long dim() const { return means.rows(); }
    int size() const { return static_cast<int>(means.cols()); }

    /// Exact mixture moments (law of total variance, 1/M spread term);
    /// these match Monte-Carlo sampling of the mixture.
    Eigen::VectorXd mixture_mean() const;
    Eigen::VectorXd pointwise_variance() const;
};

/// Stack each member's prediction for one input at one embedding.
PredictiveMixture predictive_mixture(const Ensemble& ens, const DiscretizedFunction& f,
                                     const Eigen::VectorXd& embedding);

/// Batched form: `values` stacks B inputs on `grid`; one mixture per input.
std::vector<PredictiveMixture> predictive_mixture_batch(const Ensemble& ens, const GridSpec& grid,
                                                        const Eigen::MatrixXd& values, int B,
                                                        const Eigen::VectorXd& embedding);

/// Average negative log likelihood of labeled examples under the mixture,
/// log-sum-exp stabilized.
double mixture_nll(const Ensemble& ens, const std::vector<LabeledExample>& test_set);

/// Mean (over the test set) relative L2 error of the mixture mean.
double mixture_relative_l2(const Ensemble& ens, const std::vector<LabeledExample>& test_set);

/// Checkpoint: manifest.json + one binary parameter file per member.
/// Round-trips are bit exact.
void save_ensemble(const Ensemble& ens, const std::filesystem::path& dir);
Ensemble load_ensemble(const std::filesystem::path& dir);

} // namespace mrfno
