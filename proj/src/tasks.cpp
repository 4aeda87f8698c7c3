#include "mrfno/tasks.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mrfno/fft.hpp"
#include "mrfno/util.hpp"

namespace mrfno {

namespace {
constexpr double kPi = std::numbers::pi;
}

std::string task_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::Burgers: return "burgers";
        case TaskKind::Darcy: return "darcy";
        case TaskKind::Darcy3: return "darcy3";
        case TaskKind::Diffusion: return "diffusion";
        case TaskKind::NS: return "ns";
    }
    return "?";
}

TaskKind task_from_name(const std::string& name) {
    if (name == "burgers") return TaskKind::Burgers;
    if (name == "darcy") return TaskKind::Darcy;
    if (name == "darcy3") return TaskKind::Darcy3;
    if (name == "diffusion") return TaskKind::Diffusion;
    if (name == "ns") return TaskKind::NS;
    throw ConfigError("unknown task: " + name);
}

const ResolutionSpec& TaskSpec::res(int r) const {
    if (r < 1 || r > R())
        throw InvalidResolutionError("resolution " + std::to_string(r) + " outside [1, " +
                                     std::to_string(R()) + "]");
    return resolutions[static_cast<size_t>(r - 1)];
}

namespace {

std::vector<ResolutionSpec> build_resolutions(const std::vector<GridSpec>& grids,
                                              const std::vector<double>& ratios) {
    const auto costs = normalize_costs(ratios);
    const int R = static_cast<int>(grids.size());
    std::vector<ResolutionSpec> out;
    for (int r = 1; r <= R; ++r) {
        ResolutionSpec spec;
        spec.index = r;
        spec.grid = grids[static_cast<size_t>(r - 1)];
        spec.cost = costs[static_cast<size_t>(r - 1)];
        spec.embedding = one_hot_embedding(r, R);
        out.push_back(std::move(spec));
    }
    for (int r = 1; r < R; ++r)
        if (!(out[r - 1].cost < out[r].cost))
            throw ConfigError("resolution costs must be strictly increasing");
    return out;
}

GridSpec diffusion_grid(int n) {
    return GridSpec({AxisSpec{n, 0.0, 1.0, Spacing::LatticeLeft},
                     AxisSpec{n, 0.0, 1.0, Spacing::LatticeRight}});
}

} // namespace

TaskSpec make_task(TaskKind kind) {
    TaskSpec t;
    t.kind = kind;
    t.name = task_name(kind);
    switch (kind) {
        case TaskKind::Burgers:
            t.resolutions = build_resolutions({GridSpec::line(33), GridSpec::line(129)},
                                              {1.0, 41.2});
            t.viscosity = 0.002;
            break;
        case TaskKind::Darcy:
            t.resolutions = build_resolutions({GridSpec::square(32), GridSpec::square(128)},
                                              {1.0, 38.3});
            t.input_grf.kernel = GrfKernel::InverseLaplacian;
            break;
        case TaskKind::Darcy3:
            t.resolutions = build_resolutions(
                {GridSpec::square(32), GridSpec::square(64), GridSpec::square(128)},
                {1.0, 21.3, 38.3});
            t.input_grf.kernel = GrfKernel::InverseLaplacian;
            break;
        case TaskKind::Diffusion:
            t.resolutions = build_resolutions({diffusion_grid(32), diffusion_grid(128)},
                                              {1.0, 17.6});
            t.input_grf.kernel = GrfKernel::Rbf;
            t.input_grf.length_scale = 0.2;
            t.input_grf.jitter = 1e-8;
            break;
        case TaskKind::NS:
            t.resolutions = build_resolutions({GridSpec::square(16), GridSpec::square(64)},
                                              {1.0, 7.0});
            t.viscosity = 1e-3;
            t.input_grf.kernel = GrfKernel::InverseLaplacian;
            break;
    }
    return t;
}

// --- Burgers ----------------------------------------------------------------

DiscretizedFunction burgers_initial(double a, double b, const GridSpec& grid) {
    if (grid.dims() != 1) throw ConfigError("burgers_initial: 1D grid expected");
    if (a < 1.0 || a > 6.0 || b < 1.0 || b > 6.0)
        throw ConfigError("burgers_initial: a, b must lie in [1, 6]");
    Eigen::MatrixXd v(grid.num_nodes(), 1);
    for (int i = 0; i < grid.axes[0].n; ++i) {
        const double x = grid.axes[0].coord(i);
        v(i, 0) = a * std::exp(-a * x) * std::sin(2.0 * kPi * x) * std::cos(b * kPi * x);
    }
    return DiscretizedFunction(grid, std::move(v));
}

namespace {

double minmod(double a, double b) {
    if (a * b <= 0.0) return 0.0;
    return std::abs(a) < std::abs(b) ? a : b;
}

// Semi-discrete RHS: MUSCL-minmod reconstruction, Rusanov flux for u^2/2,
// central second differences for the viscous term. Dirichlet 0 at both ends
// via odd ghost extension.
void burgers_rhs(const Eigen::VectorXd& u, double nu, double h, Eigen::VectorXd& rhs) {
    const long n = u.size();
    auto val = [&](long i) -> double {
        if (i < 0) return -u(-i);
        if (i >= n) return -u(2 * (n - 1) - i);
        return u(i);
    };
    auto slope = [&](long i) { return minmod(val(i) - val(i - 1), val(i + 1) - val(i)); };
    auto flux = [](double w) { return 0.5 * w * w; };

    Eigen::VectorXd fhat(n + 1); // face i+1/2 stored at index i+1
    for (long i = -1; i < n; ++i) {
        const double ul = val(i) + 0.5 * slope(i);
        const double ur = val(i + 1) - 0.5 * slope(i + 1);
        const double speed = std::max(std::abs(ul), std::abs(ur));
        fhat(i + 1) = 0.5 * (flux(ul) + flux(ur)) - 0.5 * speed * (ur - ul);
    }
    for (long i = 0; i < n; ++i) {
        const double diff = (val(i + 1) - 2.0 * u(i) + val(i - 1)) / (h * h);
        rhs(i) = -(fhat(i + 1) - fhat(i)) / h + nu * diff;
    }
    rhs(0) = 0.0;
    rhs(n - 1) = 0.0; // pinned boundary values
}

} // namespace

DiscretizedFunction solve_burgers(const DiscretizedFunction& u0, double nu,
                                  const GridSpec& grid, const SolverControls& controls) {
    if (grid.dims() != 1) throw ConfigError("solve_burgers: 1D grid expected");
    if (!(u0.grid == grid)) throw GridMismatchError("solve_burgers: u0 grid differs from output grid");
    const long n = grid.num_nodes();
    const double h = grid.axes[0].step();

    Eigen::VectorXd u = u0.values.col(0);
    u(0) = 0.0;
    u(n - 1) = 0.0;
    const double limit = 100.0 * std::max(1.0, u.cwiseAbs().maxCoeff());

    Eigen::VectorXd k1(n), k2(n), k3(n), u1(n), u2(n);
    double t = 0.0;
    const double t_end = 1.0;
    long steps = 0;
    while (t < t_end) {
        const double speed = std::max(u.cwiseAbs().maxCoeff(), 1e-6);
        double dt = controls.cfl / (speed / h + 2.0 * nu / (h * h)) / controls.time_refine;
        dt = std::min(dt, t_end - t);

        // SSP-RK3 (Shu-Osher)
        burgers_rhs(u, nu, h, k1);
        u1 = u + dt * k1;
        burgers_rhs(u1, nu, h, k2);
        u2 = 0.75 * u + 0.25 * (u1 + dt * k2);
        burgers_rhs(u2, nu, h, k3);
        u = u / 3.0 + (2.0 / 3.0) * (u2 + dt * k3);

        t += dt;
        ++steps;
        if (!u.allFinite() || u.cwiseAbs().maxCoeff() > limit)
            throw SolverError("solve_burgers: instability at t=" + std::to_string(t) +
                              "; reduce the CFL number or refine the time step");
        if (steps > 50'000'000) throw SolverError("solve_burgers: step budget exceeded");
    }
    return DiscretizedFunction(grid, u);
}

// --- Darcy ------------------------------------------------------------------

DiscretizedFunction threshold_grf_coefficient(const DiscretizedFunction& z, double lo, double hi) {
    Eigen::MatrixXd c(z.values.rows(), z.values.cols());
    for (long i = 0; i < z.values.rows(); ++i)
        for (long j = 0; j < z.values.cols(); ++j) c(i, j) = z.values(i, j) >= 0.0 ? hi : lo;
    return DiscretizedFunction(z.grid, std::move(c), z.resolution_index);
}

DiscretizedFunction solve_darcy(const DiscretizedFunction& coeff, const GridSpec& grid) {
    if (grid.dims() != 2) throw ConfigError("solve_darcy: 2D grid expected");
    if (!(coeff.grid == grid)) throw GridMismatchError("solve_darcy: coefficient grid differs");
    if ((coeff.values.array() <= 0.0).any())
        throw ConfigError("solve_darcy: coefficient must be positive everywhere");

    const int n = grid.axes[0].n;
    const double h = grid.axes[0].step();
    const auto& c = coeff.values;
    auto node = [&](int i, int j) { return static_cast<long>(i) * n + j; };
    // Unknowns: interior nodes i, j in [1, n-1]; u = 0 at i==0, j==0 and at
    // the virtual x=1 / y=1 boundary one step past the last node.
    const int m = n - 1;
    auto idx = [&](int i, int j) { return static_cast<long>(i - 1) * m + (j - 1); };
    auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };
    // Face coefficient between a node and its neighbour; the ghost layer
    // reuses the node's own value.
    auto cface = [&](int i0, int j0, int i1, int j1) {
        const double a = c(node(i0, j0), 0);
        const double b = (i1 >= n || j1 >= n) ? a : c(node(i1, j1), 0);
        return harmonic(a, b);
    };

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(5L * m * m));
    Eigen::VectorXd rhs = Eigen::VectorXd::Constant(static_cast<long>(m) * m, 1.0);
    for (int i = 1; i < n; ++i) {
        for (int j = 1; j < n; ++j) {
            const double cw = cface(i, j, i - 1, j);
            const double ce = cface(i, j, i + 1, j);
            const double cs = cface(i, j, i, j - 1);
            const double cn = cface(i, j, i, j + 1);
            const long row = idx(i, j);
            trips.emplace_back(row, row, (cw + ce + cs + cn) / (h * h));
            if (i > 1) trips.emplace_back(row, idx(i - 1, j), -cw / (h * h));
            if (i < n - 1) trips.emplace_back(row, idx(i + 1, j), -ce / (h * h));
            if (j > 1) trips.emplace_back(row, idx(i, j - 1), -cs / (h * h));
            if (j < n - 1) trips.emplace_back(row, idx(i, j + 1), -cn / (h * h));
        }
    }
    Eigen::SparseMatrix<double> A(static_cast<long>(m) * m, static_cast<long>(m) * m);
    A.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw SolverError("solve_darcy: factorization failed (singular or ill-conditioned)");
    Eigen::VectorXd sol = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !sol.allFinite())
        throw SolverError("solve_darcy: linear solve failed");

    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(grid.num_nodes(), 1);
    for (int i = 1; i < n; ++i)
        for (int j = 1; j < n; ++j) u(node(i, j), 0) = sol(idx(i, j));
    return DiscretizedFunction(grid, std::move(u));
}

// --- Diffusion ---------------------------------------------------------------

DiscretizedFunction replicate_along_time(const DiscretizedFunction& f_spatial,
                                         const GridSpec& grid_xt) {
    if (grid_xt.dims() != 2) throw ConfigError("replicate_along_time: space-time grid expected");
    if (f_spatial.grid.dims() != 1 || f_spatial.grid.axes[0].n != grid_xt.axes[0].n)
        throw GridMismatchError("replicate_along_time: spatial axis mismatch");
    const int nx = grid_xt.axes[0].n;
    const int nt = grid_xt.axes[1].n;
    Eigen::MatrixXd v(grid_xt.num_nodes(), 1);
    for (int i = 0; i < nx; ++i)
        for (int k = 0; k < nt; ++k) v(static_cast<long>(i) * nt + k, 0) = f_spatial.values(i, 0);
    return DiscretizedFunction(grid_xt, std::move(v));
}

DiscretizedFunction solve_diffusion(const DiscretizedFunction& f_spatial, const GridSpec& grid,
                                    const SolverControls& controls) {
    if (grid.dims() != 2) throw ConfigError("solve_diffusion: space-time grid expected");
    if (f_spatial.grid.dims() != 1 || f_spatial.grid.axes[0].n != grid.axes[0].n)
        throw GridMismatchError("solve_diffusion: forcing grid does not match the spatial axis");

    const int nx = grid.axes[0].n;
    const int nt = grid.axes[1].n;
    const double h = grid.axes[0].step();
    const double kappa = 0.01;
    const int sub = controls.diffusion_substeps * controls.time_refine;
    const double dt = grid.axes[1].step() / sub;

    // Crank-Nicolson diffusion on interior nodes 1..nx-1 (node 0 pinned at 0,
    // ghost at x=1 pinned at 0): tridiagonal (I - dt/2 kappa Dxx).
    const int m = nx - 1;
    const double r = 0.5 * dt * kappa / (h * h);
    Eigen::VectorXd dl = Eigen::VectorXd::Constant(m, -r);
    Eigen::VectorXd dm = Eigen::VectorXd::Constant(m, 1.0 + 2.0 * r);
    Eigen::VectorXd du = Eigen::VectorXd::Constant(m, -r);

    // Thomas factorization (constant matrix, reused every step).
    Eigen::VectorXd cp(m);
    cp(0) = du(0) / dm(0);
    for (int i = 1; i < m; ++i) cp(i) = du(i) / (dm(i) - dl(i) * cp(i - 1));
    auto tri_solve = [&](Eigen::VectorXd& d) {
        d(0) /= dm(0);
        for (int i = 1; i < m; ++i) d(i) = (d(i) - dl(i) * d(i - 1)) / (dm(i) - dl(i) * cp(i - 1));
        for (int i = m - 2; i >= 0; --i) d(i) -= cp(i) * d(i + 1);
    };

    Eigen::VectorXd u = Eigen::VectorXd::Zero(nx); // includes the pinned node 0
    Eigen::MatrixXd out(grid.num_nodes(), 1);
    auto lap = [&](const Eigen::VectorXd& w, int i) {
        const double left = w(i - 1);
        const double right = i + 1 < nx ? w(i + 1) : 0.0;
        return (left - 2.0 * w(i) + right) / (h * h);
    };

    for (int slice = 0; slice < nt; ++slice) {
        for (int s = 0; s < sub; ++s) {
            Eigen::VectorXd rhs(m);
            for (int i = 1; i < nx; ++i)
                rhs(i - 1) = u(i) + dt * (0.5 * kappa * lap(u, i) + 0.01 * u(i) * u(i) +
                                          f_spatial.values(i, 0));
            tri_solve(rhs);
            for (int i = 1; i < nx; ++i) u(i) = rhs(i - 1);
            if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e3)
                throw SolverError("solve_diffusion: time integration blow-up (u^2 term)");
        }
        for (int i = 0; i < nx; ++i) out(static_cast<long>(i) * nt + slice, 0) = u(i);
    }
    return DiscretizedFunction(grid, std::move(out));
}

// --- Navier-Stokes -----------------------------------------------------------

namespace {

struct NsWorkspace {
    int n;
    std::vector<double> kfreq;                  // signed frequencies
    Eigen::ArrayXXd lap;                        // -4 pi^2 |k|^2, n x n
    Eigen::ArrayXXd dealias;                    // 2/3-rule mask
    std::vector<std::complex<double>> what, psihat, u1, u2, wx, wy, nl, fhat;

    explicit NsWorkspace(int n_) : n(n_) {
        kfreq.resize(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) kfreq[static_cast<size_t>(k)] = k <= n / 2 ? k : k - n;
        lap.resize(n, n);
        dealias.resize(n, n);
        const int kmax = n / 3;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double ka = kfreq[static_cast<size_t>(a)];
                const double kb = kfreq[static_cast<size_t>(b)];
                lap(a, b) = -4.0 * kPi * kPi * (ka * ka + kb * kb);
                dealias(a, b) =
                    (std::abs(ka) <= kmax && std::abs(kb) <= kmax) ? 1.0 : 0.0;
            }
        const size_t total = static_cast<size_t>(n) * n;
        what.resize(total);
        psihat.resize(total);
        u1.resize(total);
        u2.resize(total);
        wx.resize(total);
        wy.resize(total);
        nl.resize(total);
        fhat.resize(total);
    }

    size_t at(int a, int b) const { return static_cast<size_t>(a) * n + b; }

    // Nonlinear term N(w) = u . grad w in spectral space, dealiased, with the
    // mean mode zeroed so the spatial mean of w is conserved exactly.
    void nonlinear(const std::vector<std::complex<double>>& wh,
                   std::vector<std::complex<double>>& out, double& max_speed) {
        const std::complex<double> I(0.0, 1.0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const size_t p = at(a, b);
                const double ka = kfreq[static_cast<size_t>(a)];
                const double kb = kfreq[static_cast<size_t>(b)];
                const double l = lap(a, b);
                const std::complex<double> psi = l == 0.0 ? 0.0 : -wh[p] / l;
                psihat[p] = psi;
                u1[p] = 2.0 * kPi * I * kb * psi;   //  d psi / dy
                u2[p] = -2.0 * kPi * I * ka * psi;  // -d psi / dx
                wx[p] = 2.0 * kPi * I * ka * wh[p];
                wy[p] = 2.0 * kPi * I * kb * wh[p];
            }
        fft::transform(u1.data(), u1.data(), n, n, +1);
        fft::transform(u2.data(), u2.data(), n, n, +1);
        fft::transform(wx.data(), wx.data(), n, n, +1);
        fft::transform(wy.data(), wy.data(), n, n, +1);
        const double inv = 1.0 / (static_cast<double>(n) * n);
        max_speed = 0.0;
        for (size_t p = 0; p < nl.size(); ++p) {
            const double v1 = u1[p].real() * inv;
            const double v2 = u2[p].real() * inv;
            max_speed = std::max(max_speed, std::max(std::abs(v1), std::abs(v2)));
            nl[p] = v1 * (wx[p].real() * inv) + v2 * (wy[p].real() * inv);
        }
        fft::transform(nl.data(), nl.data(), n, n, -1);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) out[at(a, b)] = nl[at(a, b)] * dealias(a, b);
        out[0] = 0.0;
    }
};

} // namespace

DiscretizedFunction ns_solve_slices(const DiscretizedFunction& w0, double nu, int n_slices,
                                    double t_end, const SolverControls& controls) {
    if (w0.grid.dims() != 2 || w0.channels() != 1)
        throw ConfigError("ns_solve_slices: single-channel 2D initial vorticity expected");
    const int n = w0.grid.axes[0].n;
    if (w0.grid.axes[1].n != n) throw ConfigError("ns_solve_slices: square grid expected");

    NsWorkspace ws(n);
    const long total = w0.grid.num_nodes();

    // Forcing amp * (sin(2 pi (x+y)) + cos(2 pi (x+y))), spectral, mean-free.
    {
        std::vector<std::complex<double>> f(static_cast<size_t>(total));
        const double amp = controls.ns_forcing_amplitude;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double x = w0.grid.axes[0].coord(a);
                const double y = w0.grid.axes[1].coord(b);
                f[ws.at(a, b)] = amp * (std::sin(2.0 * kPi * (x + y)) + std::cos(2.0 * kPi * (x + y)));
            }
        fft::transform(f.data(), f.data(), n, n, -1);
        f[0] = 0.0;
        ws.fhat = f;
    }

    for (long p = 0; p < total; ++p) ws.what[static_cast<size_t>(p)] = w0.values(p, 0);
    fft::transform(ws.what.data(), ws.what.data(), n, n, -1);

    const double h = w0.grid.axes[0].step();
    const double slice_dt = t_end / n_slices;
    Eigen::MatrixXd out(total, n_slices);
    std::vector<std::complex<double>> n1(ws.what.size()), n2(ws.what.size()),
        wstar(ws.what.size()), scratch(ws.what.size());

    double max_speed = 1.0;
    for (int slice = 0; slice < n_slices; ++slice) {
        double t = 0.0;
        while (slice_dt - t > 1e-12 * slice_dt) {
            ws.nonlinear(ws.what, n1, max_speed);
            double dt = controls.cfl * h / std::max(max_speed, 1e-6) / controls.time_refine;
            dt = std::min(dt, slice_dt - t);

            // Heun predictor-corrector with Crank-Nicolson viscosity.
            auto cn_step = [&](const std::vector<std::complex<double>>& nl_term,
                               std::vector<std::complex<double>>& dst) {
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) {
                        const size_t p = ws.at(a, b);
                        const double l = ws.lap(a, b);
                        const std::complex<double> rhs =
                            (1.0 + 0.5 * dt * nu * l) * ws.what[p] +
                            dt * (-nl_term[p] + ws.fhat[p]);
                        dst[p] = rhs / (1.0 - 0.5 * dt * nu * l);
                    }
            };
            cn_step(n1, wstar);
            double unused;
            ws.nonlinear(wstar, n2, unused);
            for (size_t p = 0; p < scratch.size(); ++p)
                scratch[p] = 0.5 * (n1[p] + n2[p]);
            cn_step(scratch, wstar);
            ws.what = wstar;
            t += dt;
            if (!std::isfinite(ws.what[1].real()))
                throw SolverError("ns_solve_slices: spectral blow-up");
        }
        scratch = ws.what;
        fft::transform(scratch.data(), scratch.data(), n, n, +1);
        const double inv = 1.0 / static_cast<double>(total);
        for (long p = 0; p < total; ++p)
            out(p, slice) = scratch[static_cast<size_t>(p)].real() * inv;
        if (!out.col(slice).allFinite())
            throw SolverError("ns_solve_slices: non-finite slice " + std::to_string(slice));
    }
    return DiscretizedFunction(w0.grid, std::move(out));
}

DiscretizedFunction ns_input_trajectory(const DiscretizedFunction& w0, const TaskSpec& task) {
    const int half = task.controls.ns_slices / 2;
    return ns_solve_slices(w0, task.viscosity, half, task.controls.ns_t_end / 2.0, task.controls);
}

DiscretizedFunction ns_continue(const DiscretizedFunction& input_traj, const TaskSpec& task) {
    const int half = task.controls.ns_slices / 2;
    if (input_traj.channels() != half)
        throw ConfigError("ns_continue: expected " + std::to_string(half) + " input slices");
    DiscretizedFunction w_last(input_traj.grid, input_traj.values.col(half - 1));
    return ns_solve_slices(w_last, task.viscosity, half, task.controls.ns_t_end / 2.0,
                           task.controls);
}

// --- pool and query -----------------------------------------------------------

DiscretizedFunction draw_input(const TaskSpec& task, std::uint64_t seed) {
    const GridSpec& grid = task.highest().grid;
    switch (task.kind) {
        case TaskKind::Burgers: {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> ab(1.0, 6.0);
            const double a = ab(rng);
            const double b = ab(rng);
            auto f = burgers_initial(a, b, grid);
            f.resolution_index = task.R();
            return f;
        }
        case TaskKind::Darcy:
        case TaskKind::Darcy3: {
            GRFConfig cfg = task.input_grf;
            cfg.grid = grid;
            cfg.seed = seed;
            auto c = threshold_grf_coefficient(sample_grf(cfg));
            c.resolution_index = task.R();
            return c;
        }
        case TaskKind::Diffusion: {
            GRFConfig cfg = task.input_grf;
            cfg.grid = GridSpec({grid.axes[0]});
            cfg.seed = seed;
            auto f = replicate_along_time(sample_grf(cfg), grid);
            f.resolution_index = task.R();
            return f;
        }
        case TaskKind::NS: {
            GRFConfig cfg = task.input_grf;
            cfg.grid = grid;
            cfg.seed = seed;
            auto traj = ns_input_trajectory(sample_grf(cfg), task);
            traj.resolution_index = task.R();
            return traj;
        }
    }
    throw ConfigError("draw_input: unknown task kind");
}

std::vector<DiscretizedFunction> make_pool(const TaskSpec& task, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("make_pool: need at least one candidate");
    std::vector<DiscretizedFunction> pool;
    pool.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        pool.push_back(draw_input(task, derive_seed(seed, 0x706f6f6cULL, static_cast<std::uint64_t>(i))));
    return pool;
}

LabeledExample query_simulator(const DiscretizedFunction& h, int r, const TaskSpec& task) {
    const ResolutionSpec& spec = task.res(r);
    DiscretizedFunction input = downsample(h, spec.grid);
    input.resolution_index = r;

    DiscretizedFunction output;
    switch (task.kind) {
        case TaskKind::Burgers:
            output = solve_burgers(input, task.viscosity, spec.grid, task.controls);
            break;
        case TaskKind::Darcy:
        case TaskKind::Darcy3:
            output = solve_darcy(input, spec.grid);
            break;
        case TaskKind::Diffusion: {
            // The stored input replicates f along time; recover the profile
            // from the first time slice.
            const int nt = spec.grid.axes[1].n;
            const int nx = spec.grid.axes[0].n;
            Eigen::MatrixXd prof(nx, 1);
            for (int i = 0; i < nx; ++i) prof(i, 0) = input.values(static_cast<long>(i) * nt, 0);
            DiscretizedFunction f_spatial(GridSpec({spec.grid.axes[0]}), std::move(prof));
            output = solve_diffusion(f_spatial, spec.grid, task.controls);
            break;
        }
        case TaskKind::NS:
            output = ns_continue(input, task);
            break;
    }
    output.resolution_index = r;
    return LabeledExample{std::move(input), std::move(output), r, spec.cost};
}

std::vector<LabeledExample> make_labeled_set(const TaskSpec& task, int n, std::uint64_t seed) {
    std::vector<LabeledExample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto h = draw_input(task, derive_seed(seed, 0x706f6f6cULL, static_cast<std::uint64_t>(i)));
        out.push_back(query_simulator(h, task.R(), task));
    }
    return out;
}

} // namespace mrfno
