#pragma once

#include "mrfno/lowrank.hpp"
#include "mrfno/tasks.hpp"

namespace mrfno {

enum class UtilityKind { U1, U2, PredVar };

/// Information an example (h, r) carries about the model's own prediction of
/// h at the highest resolution: MI(y(h^r, e_r), y(h^R, e_R)).
double utility_u1(const Ensemble& ens, const DiscretizedFunction& h, int r, const TaskSpec& task);

/// Monte-Carlo utility: mean over probe functions h'_l of
/// MI(y(h^r, e_r), y(h'_l^R, e_R)). Probes are drawn from the task's
/// input-function generator and held fixed across a pool scan.
double utility_u2(const Ensemble& ens, const DiscretizedFunction& h, int r,
                  const std::vector<DiscretizedFunction>& probes, const TaskSpec& task);

/// Mean over output nodes of the mixture's pointwise variance (member-mean
/// noise plus the unbiased spread of the member means).
double predvar_utility(const Ensemble& ens, const DiscretizedFunction& h, int r,
                       const TaskSpec& task);

/// All (h, r) utilities for a candidate pool. scores(i, r-1) is the utility
/// of pool[i] at resolution r. Runtime is linear in |pool| and in the output
/// dimension at fixed M and R.
struct ScoreTable {
    Eigen::MatrixXd scores; // |pool| x R
};

ScoreTable score_pool(const Ensemble& ens, const std::vector<DiscretizedFunction>& pool,
                      const TaskSpec& task, UtilityKind kind,
                      const std::vector<DiscretizedFunction>& probes = {},
                      const std::vector<int>& r_set = {});

/// Tabular text export (pool id, r, utility, scheduled cost, ratio).
std::string score_table_tsv(const ScoreTable& table, const Eigen::VectorXd& scheduled_costs);

} // namespace mrfno
