#include "mrfno/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "mrfno/serialize.hpp"

namespace mrfno {

Ensemble fit_ensemble(const FnoModel& model, const std::vector<LabeledExample>& dataset, int M,
                      const TrainConfig& tconfig, std::uint64_t base_seed, int workers,
                      const std::vector<Eigen::VectorXd>* warm_start) {
    if (M < 2) throw InsufficientEnsembleError("ensemble needs at least 2 members");
    if (warm_start && static_cast<int>(warm_start->size()) != M)
        throw ConfigError("warm start must provide one parameter vector per member");

    Ensemble ens{model, std::vector<Eigen::VectorXd>(static_cast<size_t>(M)), {}};
    for (int m = 0; m < M; ++m) ens.seeds.push_back(base_seed + static_cast<std::uint64_t>(m));

    std::vector<std::exception_ptr> failures(static_cast<size_t>(M));
    auto fit_member = [&](int m) {
        try {
            TrainConfig tc = tconfig;
            tc.seed = ens.seeds[static_cast<size_t>(m)];
            const Eigen::VectorXd* init = warm_start ? &(*warm_start)[static_cast<size_t>(m)] : nullptr;
            ens.members[static_cast<size_t>(m)] = train(model, dataset, tc, init);
        } catch (...) {
            failures[static_cast<size_t>(m)] = std::current_exception();
        }
    };

    const int n_workers = std::max(1, std::min(workers, M));
    if (n_workers == 1) {
        for (int m = 0; m < M; ++m) fit_member(m);
    } else {
        std::vector<std::thread> threads;
        std::atomic<int> next{0};
        for (int w = 0; w < n_workers; ++w)
            threads.emplace_back([&] {
                for (int m = next.fetch_add(1); m < M; m = next.fetch_add(1)) fit_member(m);
            });
        for (auto& t : threads) t.join();
    }

    for (int m = 0; m < M; ++m) {
        if (failures[static_cast<size_t>(m)]) {
            try {
                std::rethrow_exception(failures[static_cast<size_t>(m)]);
            } catch (const std::exception& e) {
                throw TrainingError("ensemble member " + std::to_string(m) +
                                        " failed to train: " + e.what(),
                                    -1);
            }
        }
    }
    return ens;
}

PredictiveMixture::PredictiveMixture(Eigen::MatrixXd means_, Eigen::VectorXd variances_)
    : means(std::move(means_)), variances(std::move(variances_)) {
    if (means.cols() < 2) throw InsufficientEnsembleError("mixture needs at least 2 members");
    if (variances.size() != means.cols())
        throw ConfigError("mixture: one variance per member expected");
    if (!(variances.array() > 0.0).all()) throw ConfigError("mixture variances must be positive");
    if (!means.allFinite()) throw ConfigError("mixture means must be finite");
}

Eigen::VectorXd PredictiveMixture::mixture_mean() const { return means.rowwise().mean(); }

Eigen::VectorXd PredictiveMixture::pointwise_variance() const {
    const Eigen::VectorXd mu = mixture_mean();
    Eigen::VectorXd var = Eigen::VectorXd::Constant(dim(), variances.mean());
    const int M = size();
    for (int m = 0; m < M; ++m)
        var += (means.col(m) - mu).cwiseAbs2() / static_cast<double>(M);
    return var;
}

PredictiveMixture predictive_mixture(const Ensemble& ens, const DiscretizedFunction& f,
                                     const Eigen::VectorXd& embedding) {
    return predictive_mixture_batch(ens, f.grid, f.values, 1, embedding).front();
}

std::vector<PredictiveMixture> predictive_mixture_batch(const Ensemble& ens, const GridSpec& grid,
                                                        const Eigen::MatrixXd& values, int B,
                                                        const Eigen::VectorXd& embedding) {
    const long n = grid.num_nodes();
    const int cout = ens.model.signature().out_channels;
    const long d = n * cout;
    const int M = ens.size();

    std::vector<Eigen::MatrixXd> means(static_cast<size_t>(B), Eigen::MatrixXd(d, M));
    std::vector<Eigen::VectorXd> vars(static_cast<size_t>(B), Eigen::VectorXd(M));
    for (int m = 0; m < M; ++m) {
        auto p = ens.model.predict_batch(ens.members[static_cast<size_t>(m)], grid, values,
                                         embedding);
        for (int b = 0; b < B; ++b) {
            const Eigen::MatrixXd block = p.mean.middleRows(static_cast<long>(b) * n, n);
            means[static_cast<size_t>(b)].col(m) =
                Eigen::Map<const Eigen::VectorXd>(block.data(), d);
            vars[static_cast<size_t>(b)](m) = std::exp(p.eta(b));
        }
    }
    std::vector<PredictiveMixture> out;
    out.reserve(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b)
        out.emplace_back(std::move(means[static_cast<size_t>(b)]),
                         std::move(vars[static_cast<size_t>(b)]));
    return out;
}

namespace {

double log_mixture_density(const PredictiveMixture& p, const Eigen::VectorXd& y) {
    const int M = p.size();
    const double d = static_cast<double>(p.dim());
    Eigen::VectorXd logs(M);
    for (int m = 0; m < M; ++m) {
        const double s2 = p.variances(m);
        const double ss = (y - p.means.col(m)).squaredNorm();
        logs(m) = -0.5 * d * std::log(2.0 * std::numbers::pi * s2) - ss / (2.0 * s2);
    }
    const double mx = logs.maxCoeff();
    return mx + std::log((logs.array() - mx).exp().sum()) - std::log(static_cast<double>(M));
}

} // namespace

double mixture_nll(const Ensemble& ens, const std::vector<LabeledExample>& test_set) {
    if (test_set.empty()) throw ConfigError("mixture_nll: empty test set");
    const int R = ens.model.signature().n_resolutions;
    double total = 0.0;
    for (const auto& ex : test_set) {
        const Eigen::VectorXd e = one_hot_embedding(ex.resolution_index, R);
        const auto p = predictive_mixture(ens, ex.input, e);
        const Eigen::Map<const Eigen::VectorXd> y(ex.output.values.data(), ex.output.values.size());
        total -= log_mixture_density(p, y);
    }
    return total / static_cast<double>(test_set.size());
}

double mixture_relative_l2(const Ensemble& ens, const std::vector<LabeledExample>& test_set) {
    if (test_set.empty()) throw ConfigError("mixture_relative_l2: empty test set");
    const int R = ens.model.signature().n_resolutions;
    double total = 0.0;
    for (const auto& ex : test_set) {
        const Eigen::VectorXd e = one_hot_embedding(ex.resolution_index, R);
        const auto p = predictive_mixture(ens, ex.input, e);
        const Eigen::VectorXd mu = p.mixture_mean();
        Eigen::MatrixXd mean_field = Eigen::Map<const Eigen::MatrixXd>(
            mu.data(), ex.output.values.rows(), ex.output.values.cols());
        total += relative_l2(DiscretizedFunction(ex.output.grid, mean_field), ex.output);
    }
    return total / static_cast<double>(test_set.size());
}

void save_ensemble(const Ensemble& ens, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json man;
    man["members"] = ens.size();
    man["seeds"] = ens.seeds;
    const auto& cfg = ens.model.config();
    man["model"] = {{"n_modes", cfg.n_modes},         {"width", cfg.width},
                    {"n_layers", cfg.n_layers},       {"lift_hidden", cfg.lift_hidden},
                    {"proj_hidden", cfg.proj_hidden}, {"activation", cfg.activation}};
    const auto& sig = ens.model.signature();
    man["signature"] = {{"dims", sig.dims},
                        {"in_channels", sig.in_channels},
                        {"out_channels", sig.out_channels},
                        {"n_resolutions", sig.n_resolutions}};
    write_text_file(dir / "manifest.json", man.dump(2) + "\n");
    for (int m = 0; m < ens.size(); ++m)
        save_doubles(ens.members[static_cast<size_t>(m)],
                     dir / ("member_" + std::to_string(m) + ".bin"));
}

Ensemble load_ensemble(const std::filesystem::path& dir) {
    auto man = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    ModelConfig cfg;
    cfg.n_modes = man["model"]["n_modes"].get<std::vector<int>>();
    cfg.width = man["model"]["width"].get<int>();
    cfg.n_layers = man["model"]["n_layers"].get<int>();
    cfg.lift_hidden = man["model"]["lift_hidden"].get<int>();
    cfg.proj_hidden = man["model"]["proj_hidden"].get<int>();
    cfg.activation = man["model"]["activation"].get<std::string>();
    InputSignature sig;
    sig.dims = man["signature"]["dims"].get<int>();
    sig.in_channels = man["signature"]["in_channels"].get<int>();
    sig.out_channels = man["signature"]["out_channels"].get<int>();
    sig.n_resolutions = man["signature"]["n_resolutions"].get<int>();

    Ensemble ens{FnoModel(cfg, sig), {}, man["seeds"].get<std::vector<std::uint64_t>>()};
    const int M = man["members"].get<int>();
    for (int m = 0; m < M; ++m)
        ens.members.push_back(load_doubles(dir / ("member_" + std::to_string(m) + ".bin")));
    return ens;
}

} // namespace mrfno
