#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mrfno/tasks.hpp"

namespace mrfno {

enum class Activation { Gelu, Relu, Tanh };
Activation activation_from_name(const std::string& name);

/// Architecture of the probabilistic multi-resolution FNO.
struct ModelConfig {
    std::vector<int> n_modes = {16}; // retained Fourier modes per axis
    int width = 32;                  // channel count
    int n_layers = 4;
    int lift_hidden = 32;
    int proj_hidden = 32;
    std::string activation = "gelu";
};

/// Shape of the data the model is built for.
struct InputSignature {
    int dims = 1;
    int in_channels = 1;
    int out_channels = 1;
    int n_resolutions = 2; // R; length of the one-hot embedding
};

InputSignature signature_for(const TaskSpec& task);

/// Optimizer settings: Adam with cosine-annealed learning rate.
struct TrainConfig {
    int batch_size = 20;
    double learning_rate = 1e-3;
    double lr_min = 0.0;
    int epochs = 100;
    std::uint64_t seed = 0;
};

/// Flat-parameter FNO with a resolution-aware lift, spectral + pointwise
/// Fourier layers, a mean head and a log-variance head pooled to one scalar
/// per example. All evaluation paths are batched over examples that share a
/// grid and a resolution embedding.
class FnoModel {
public:
    FnoModel(ModelConfig config, InputSignature sig);

    const ModelConfig& config() const { return config_; }
    const InputSignature& signature() const { return sig_; }
    long num_params() const { return total_params_; }

    /// Seeded random initialization (spectral weights ~ U[0, 1/width^2),
    /// linear layers with fan-in scaling).
    Eigen::VectorXd init_params(std::uint64_t seed) const;

    struct Prediction {
        Eigen::MatrixXd mean;  // (n*B, out_channels)
        Eigen::VectorXd eta;   // per-example log variance, clamped below
    };

    /// Batched forward pass. `values` stacks B examples on `grid` as
    /// (n*B, in_channels); `embedding` is the shared resolution one-hot.
    Prediction predict_batch(const Eigen::VectorXd& theta, const GridSpec& grid,
                             const Eigen::MatrixXd& values,
                             const Eigen::VectorXd& embedding) const;

    /// Single-example convenience wrapper: (mu, eta).
    std::pair<DiscretizedFunction, double> predict(const Eigen::VectorXd& theta,
                                                   const DiscretizedFunction& f,
                                                   const Eigen::VectorXd& embedding) const;

    /// Negative log likelihood summed over a same-resolution batch:
    /// sum_b [ d/2 (eta_b + log 2pi) + |g_b - mu_b|^2 / (2 e^eta_b) ].
    double nll_batch(const Eigen::VectorXd& theta, const GridSpec& grid,
                     const Eigen::MatrixXd& values, const Eigen::MatrixXd& targets,
                     const Eigen::VectorXd& embedding) const;

    /// Same, also accumulating d(nll)/d(theta) into `grad` (overwritten).
    double nll_and_grad(const Eigen::VectorXd& theta, const GridSpec& grid,
                        const Eigen::MatrixXd& values, const Eigen::MatrixXd& targets,
                        const Eigen::VectorXd& embedding, Eigen::VectorXd& grad) const;

    /// Output of the resolution-aware lift FFN: (n*B, width).
    Eigen::MatrixXd lift(const Eigen::VectorXd& theta, const GridSpec& grid,
                         const Eigen::MatrixXd& values, const Eigen::VectorXd& embedding,
                         int batch = 1) const;

    /// Apply one Fourier layer to a width-channel field on `grid`.
    Eigen::MatrixXd apply_fourier_layer(const Eigen::VectorXd& theta, int layer,
                                        const GridSpec& grid, const Eigen::MatrixXd& field,
                                        int batch = 1) const;

    /// Field after the last Fourier layer (coreset representation source).
    Eigen::MatrixXd last_layer_features(const Eigen::VectorXd& theta, const GridSpec& grid,
                                        const Eigen::MatrixXd& values,
                                        const Eigen::VectorXd& embedding, int batch = 1) const;

    // --- parameter views (also used by tests to craft specific weights) ---
    Eigen::Map<Eigen::MatrixXd> lift_w1(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> lift_b1(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> lift_w2(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> lift_b2(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXcd> spectral_w(Eigen::VectorXd& t, int layer, int bin) const;
    Eigen::Map<Eigen::MatrixXd> pointwise_w(Eigen::VectorXd& t, int layer) const;
    Eigen::Map<Eigen::MatrixXd> pointwise_b(Eigen::VectorXd& t, int layer) const;
    Eigen::Map<Eigen::MatrixXd> mean_w1(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> mean_b1(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> mean_w2(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> mean_b2(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> var_conv_w(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> var_conv_b(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> var_w1(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> var_b1(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> var_w2(Eigen::VectorXd& t) const;
    Eigen::Map<Eigen::MatrixXd> var_b2(Eigen::VectorXd& t) const;

    /// Number of spectral weight matrices per layer.
    int n_weight_bins() const { return n_bins_; }

    static constexpr double kVarianceFloor = 1e-8;

private:
    struct Cache;
    Prediction forward(const Eigen::VectorXd& theta, const GridSpec& grid,
                       const Eigen::MatrixXd& values, const Eigen::VectorXd& embedding,
                       Cache* cache) const;

    void spectral_conv(const Eigen::VectorXd& theta, int layer, const GridSpec& grid, int B,
                       const Eigen::MatrixXd& field, Eigen::MatrixXd& out,
                       std::vector<Eigen::MatrixXcd>* vhat_bins) const;
    void spectral_conv_grad(const Eigen::VectorXd& theta, int layer, const GridSpec& grid,
                            int B, const Eigen::MatrixXd& upstream,
                            const std::vector<Eigen::MatrixXcd>& vhat_bins,
                            Eigen::VectorXd& grad, Eigen::MatrixXd& dfield) const;

    ModelConfig config_;
    InputSignature sig_;
    Activation act_;
    int feature_dim_ = 0;
    int n_bins_ = 0;
    long total_params_ = 0;

    struct Slot {
        long off = 0;
        long rows = 0;
        long cols = 0;
    };
    Slot s_lift_w1_, s_lift_b1_, s_lift_w2_, s_lift_b2_;
    std::vector<Slot> s_spec_;    // per layer; complex, cols = bins*width
    std::vector<Slot> s_pw_, s_pb_;
    Slot s_mean_w1_, s_mean_b1_, s_mean_w2_, s_mean_b2_;
    Slot s_var_cw_, s_var_cb_, s_var_w1_, s_var_b1_, s_var_w2_, s_var_b2_;
};

/// One maximum-likelihood point estimate from a seeded random init.
/// Mini-batches are drawn within resolution buckets.
Eigen::VectorXd train(const FnoModel& model, const std::vector<LabeledExample>& dataset,
                      const TrainConfig& tconfig,
                      const Eigen::VectorXd* warm_start = nullptr);

/// Public NLL over a same-resolution batch of labeled examples.
double gaussian_nll(const FnoModel& model, const Eigen::VectorXd& theta,
                    const std::vector<LabeledExample>& batch);

} // namespace mrfno
