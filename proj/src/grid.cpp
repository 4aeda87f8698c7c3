#include "mrfno/grid.hpp"

#include <cmath>
#include <cstdlib>

namespace mrfno {

GridSpec::GridSpec(std::vector<AxisSpec> ax) : axes(std::move(ax)) {
    if (axes.empty() || axes.size() > 2)
        throw ConfigError("GridSpec supports 1 or 2 axes, got " + std::to_string(axes.size()));
    for (const auto& a : axes) {
        if (a.n < 2) throw ConfigError("axis needs at least 2 nodes");
        if (!(a.lo < a.hi)) throw ConfigError("axis extent must satisfy lo < hi");
    }
}

long GridSpec::num_nodes() const {
    long n = 1;
    for (const auto& a : axes) n *= a.n;
    return n;
}

bool GridSpec::operator==(const GridSpec& other) const {
    if (axes.size() != other.axes.size()) return false;
    for (size_t i = 0; i < axes.size(); ++i) {
        const auto& a = axes[i];
        const auto& b = other.axes[i];
        if (a.n != b.n || a.spacing != b.spacing) return false;
        if (std::abs(a.lo - b.lo) > 1e-12 || std::abs(a.hi - b.hi) > 1e-12) return false;
    }
    return true;
}

Eigen::MatrixXd GridSpec::coordinates() const {
    Eigen::MatrixXd xy(num_nodes(), dims());
    if (dims() == 1) {
        for (int i = 0; i < axes[0].n; ++i) xy(i, 0) = axes[0].coord(i);
    } else {
        long row = 0;
        for (int i = 0; i < axes[0].n; ++i)
            for (int j = 0; j < axes[1].n; ++j, ++row) {
                xy(row, 0) = axes[0].coord(i);
                xy(row, 1) = axes[1].coord(j);
            }
    }
    return xy;
}

GridSpec GridSpec::line(int n, double lo, double hi, Spacing s) {
    return GridSpec({AxisSpec{n, lo, hi, s}});
}

GridSpec GridSpec::square(int n, double lo, double hi, Spacing s) {
    return GridSpec({AxisSpec{n, lo, hi, s}, AxisSpec{n, lo, hi, s}});
}

DiscretizedFunction::DiscretizedFunction(GridSpec g, Eigen::MatrixXd v, std::optional<int> r)
    : grid(std::move(g)), values(std::move(v)), resolution_index(r) {
    if (values.rows() != grid.num_nodes())
        throw ConfigError("value rows (" + std::to_string(values.rows()) +
                          ") do not match grid nodes (" + std::to_string(grid.num_nodes()) + ")");
    if (!values.allFinite()) throw ConfigError("function values must be finite");
}

Eigen::VectorXd one_hot_embedding(int r, int R) {
    if (r < 1 || r > R)
        throw InvalidResolutionError("resolution index " + std::to_string(r) +
                                     " outside [1, " + std::to_string(R) + "]");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(R);
    e(r - 1) = 1.0;
    return e;
}

std::vector<double> normalize_costs(const std::vector<double>& ratios) {
    double sum = 0.0;
    for (double v : ratios) {
        if (!(v > 0.0)) throw ConfigError("cost ratios must be positive");
        sum += v;
    }
    std::vector<double> out(ratios.size());
    for (size_t i = 0; i < ratios.size(); ++i) out[i] = ratios[i] / sum;
    return out;
}

namespace {

// Map each target node along one axis to its coincident source node.
std::vector<int> axis_node_map(const AxisSpec& src, const AxisSpec& tgt) {
    std::vector<int> map(tgt.n);
    const double h = src.step();
    const double tol = 1e-9 * std::max(1.0, std::abs(src.hi - src.lo));
    for (int i = 0; i < tgt.n; ++i) {
        const double x = tgt.coord(i);
        double j_real = (x - src.coord(0)) / h;
        int j = static_cast<int>(std::lround(j_real));
        if (j < 0 || j >= src.n || std::abs(src.coord(j) - x) > tol)
            throw GridMismatchError("target node at " + std::to_string(x) +
                                    " does not coincide with any source node");
        map[i] = j;
    }
    return map;
}

} // namespace

DiscretizedFunction downsample(const DiscretizedFunction& f, const GridSpec& target) {
    const GridSpec& src = f.grid;
    if (src.dims() != target.dims())
        throw GridMismatchError("downsample: dimensionality mismatch");
    for (int a = 0; a < src.dims(); ++a)
        if (target.axes[a].n > src.axes[a].n)
            throw GridMismatchError("downsample: target axis finer than source");

    std::vector<std::vector<int>> maps;
    for (int a = 0; a < src.dims(); ++a)
        maps.push_back(axis_node_map(src.axes[a], target.axes[a]));

    Eigen::MatrixXd out(target.num_nodes(), f.channels());
    if (src.dims() == 1) {
        for (int i = 0; i < target.axes[0].n; ++i) out.row(i) = f.values.row(maps[0][i]);
    } else {
        const long n2s = src.axes[1].n;
        long row = 0;
        for (int i = 0; i < target.axes[0].n; ++i)
            for (int j = 0; j < target.axes[1].n; ++j, ++row)
                out.row(row) = f.values.row(maps[0][i] * n2s + maps[1][j]);
    }
    return DiscretizedFunction(target, std::move(out));
}

namespace {

struct AxisInterp {
    std::vector<int> cell;      // left node of the source cell per target node
    std::vector<double> theta;  // fractional position in the cell (may exceed [0,1] at edges)
};

AxisInterp axis_interp(const AxisSpec& src, const AxisSpec& tgt) {
    if (tgt.step() > src.step() * (1.0 + 1e-12))
        throw GridMismatchError("interpolate_up: target axis coarser than source");
    AxisInterp out;
    out.cell.resize(tgt.n);
    out.theta.resize(tgt.n);
    const double h = src.step();
    for (int i = 0; i < tgt.n; ++i) {
        const double x = tgt.coord(i);
        double j_real = (x - src.coord(0)) / h;
        int j = static_cast<int>(std::floor(j_real));
        j = std::max(0, std::min(j, src.n - 2));
        out.cell[i] = j;
        out.theta[i] = j_real - j;
    }
    return out;
}

} // namespace

DiscretizedFunction interpolate_up(const DiscretizedFunction& f, const GridSpec& target) {
    const GridSpec& src = f.grid;
    if (src.dims() != target.dims())
        throw GridMismatchError("interpolate_up: dimensionality mismatch");

    std::vector<AxisInterp> in;
    for (int a = 0; a < src.dims(); ++a)
        in.push_back(axis_interp(src.axes[a], target.axes[a]));

    Eigen::MatrixXd out(target.num_nodes(), f.channels());
    if (src.dims() == 1) {
        for (int i = 0; i < target.axes[0].n; ++i) {
            const int j = in[0].cell[i];
            const double t = in[0].theta[i];
            out.row(i) = (1.0 - t) * f.values.row(j) + t * f.values.row(j + 1);
        }
    } else {
        const long n2s = src.axes[1].n;
        long row = 0;
        for (int i = 0; i < target.axes[0].n; ++i) {
            const int j0 = in[0].cell[i];
            const double t0 = in[0].theta[i];
            for (int j = 0; j < target.axes[1].n; ++j, ++row) {
                const int j1 = in[1].cell[j];
                const double t1 = in[1].theta[j];
                out.row(row) = (1.0 - t0) * (1.0 - t1) * f.values.row(j0 * n2s + j1) +
                               (1.0 - t0) * t1 * f.values.row(j0 * n2s + j1 + 1) +
                               t0 * (1.0 - t1) * f.values.row((j0 + 1) * n2s + j1) +
                               t0 * t1 * f.values.row((j0 + 1) * n2s + j1 + 1);
            }
        }
    }
    return DiscretizedFunction(target, std::move(out));
}

double relative_l2(const DiscretizedFunction& pred, const DiscretizedFunction& truth) {
    if (!(pred.grid == truth.grid) || pred.channels() != truth.channels())
        throw GridMismatchError("relative_l2: grids or channel counts differ");
    const double denom = truth.values.norm();
    if (denom == 0.0) throw UndefinedMetricError("relative_l2: zero-norm reference");
    return (pred.values - truth.values).norm() / denom;
}

} // namespace mrfno
