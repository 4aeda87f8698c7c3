#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrfno/grf.hpp"
#include "mrfno/grid.hpp"

namespace mrfno {

enum class TaskKind { Burgers, Darcy, Darcy3, Diffusion, NS };

std::string task_name(TaskKind kind);
TaskKind task_from_name(const std::string& name);

/// Numerical controls for the PDE solvers. Defaults are production values;
/// tests tighten or refine them for convergence studies.
struct SolverControls {
    double cfl = 0.4;              // advective CFL fraction (burgers, ns)
    int time_refine = 1;           // extra time refinement factor
    int diffusion_substeps = 8;    // internal steps per output slice (diffusion)
    double ns_forcing_amplitude = 0.1;
    int ns_slices = 40;            // recorded slices over [0, ns_t_end]
    double ns_t_end = 50.0;
};

/// One benchmark operator-learning task: PDE, resolution ladder with
/// normalized costs, input-function prior and solver controls.
struct TaskSpec {
    TaskKind kind = TaskKind::Burgers;
    std::string name;
    std::vector<ResolutionSpec> resolutions; // sorted by increasing cost
    double viscosity = 0.0;
    GRFConfig input_grf;                     // template; grid/seed set per draw
    SolverControls controls;

    int R() const { return static_cast<int>(resolutions.size()); }
    const ResolutionSpec& res(int r) const;  // 1-based
    const ResolutionSpec& highest() const { return resolutions.back(); }
};

/// Task presets with the measured cost ratios
/// (burgers 1:41.2, darcy 1:38.3, darcy3 1:21.3:38.3, diffusion 1:17.6, ns 1:7).
TaskSpec make_task(TaskKind kind);

/// A labeled training triple (input, output, resolution) plus the cost paid.
struct LabeledExample {
    DiscretizedFunction input;
    DiscretizedFunction output;
    int resolution_index = 1;
    double cost_paid = 0.0;
};

// --- closed-form inputs and solvers ---------------------------------------

/// u0(x) = a exp(-a x) sin(2 pi x) cos(b pi x), a, b in [1, 6].
DiscretizedFunction burgers_initial(double a, double b, const GridSpec& grid);

/// Viscous Burgers u_t + u u_x = nu u_xx on [0,1], u(0)=u(1)=0, solved to
/// t=1 on the output grid (MUSCL/Rusanov flux, SSP-RK3, CFL time step).
DiscretizedFunction solve_burgers(const DiscretizedFunction& u0, double nu,
                                  const GridSpec& grid, const SolverControls& controls = {});

/// Nodewise threshold of a zero-mean field: hi where z >= 0, lo otherwise.
DiscretizedFunction threshold_grf_coefficient(const DiscretizedFunction& z,
                                              double lo = 4.0, double hi = 12.0);

/// -div(c grad u) = 1 on the unit square, u = 0 on the boundary.
/// 5-point finite differences with harmonic face coefficients.
DiscretizedFunction solve_darcy(const DiscretizedFunction& c, const GridSpec& grid);

/// u_t = 0.01 u_xx + 0.01 u^2 + f(x) on (0,1) x (0,1], u(0,t)=u(1,t)=0,
/// u(x,0)=0. Implicit (CN) diffusion, explicit reaction and forcing.
/// `f_spatial` lives on the grid's spatial axis; the result is the full
/// space-time field on `grid`.
DiscretizedFunction solve_diffusion(const DiscretizedFunction& f_spatial, const GridSpec& grid,
                                    const SolverControls& controls = {});

/// Replicate a 1D profile along the time axis of a space-time grid.
DiscretizedFunction replicate_along_time(const DiscretizedFunction& f_spatial,
                                         const GridSpec& grid_xt);

/// 2D periodic vorticity solve (pseudo-spectral, CN viscous term, Heun
/// advection, 2/3 dealiasing). Returns `n_slices` recorded slices stacked as
/// channels, at times (i+1) * t_end / n_slices.
DiscretizedFunction ns_solve_slices(const DiscretizedFunction& w0, double nu, int n_slices,
                                    double t_end, const SolverControls& controls = {});

/// First half of an NS example: the 20 input slices evolved from w0.
DiscretizedFunction ns_input_trajectory(const DiscretizedFunction& w0, const TaskSpec& task);

/// Second half: 20 more slices continued from the last input slice.
DiscretizedFunction ns_continue(const DiscretizedFunction& input_traj, const TaskSpec& task);

// --- pool and query --------------------------------------------------------

/// One input-function draw at the highest resolution, deterministic in seed.
DiscretizedFunction draw_input(const TaskSpec& task, std::uint64_t seed);

/// Candidate pool of n inputs at the highest resolution.
std::vector<DiscretizedFunction> make_pool(const TaskSpec& task, int n, std::uint64_t seed);

/// Downsample h to resolution r, run the task solver there, return the
/// labeled triple with cost_paid = lambda_r.
LabeledExample query_simulator(const DiscretizedFunction& h, int r, const TaskSpec& task);

/// Labeled examples at the highest resolution (test sets).
std::vector<LabeledExample> make_labeled_set(const TaskSpec& task, int n, std::uint64_t seed);

} // namespace mrfno
