#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "mrfno/errors.hpp"

namespace mrfno {

/// Node placement along one axis.
///
/// Closed:        lo, lo+h, ..., hi            with h = (hi-lo)/(n-1)
/// LatticeLeft:   lo, lo+h, ..., hi-h          with h = (hi-lo)/n
/// LatticeRight:  lo+h, ..., hi                with h = (hi-lo)/n
///
/// 1D tasks use Closed (33 = 32+1 nodes on [0,1]); 2D tasks use LatticeLeft
/// so that 32/64/128-node axes nest by integer stride; time axes that start
/// just after t=0 use LatticeRight.
enum class Spacing { Closed, LatticeLeft, LatticeRight };

struct AxisSpec {
    int n = 0;
    double lo = 0.0;
    double hi = 1.0;
    Spacing spacing = Spacing::Closed;

    double step() const {
        return spacing == Spacing::Closed ? (hi - lo) / (n - 1) : (hi - lo) / n;
    }
    double coord(int i) const {
        switch (spacing) {
            case Spacing::Closed: return lo + i * step();
            case Spacing::LatticeLeft: return lo + i * step();
            case Spacing::LatticeRight: return lo + (i + 1) * step();
        }
        return lo;
    }
};

/// Evenly spaced sampling grid for 1 or 2 axes.
struct GridSpec {
    std::vector<AxisSpec> axes;

    GridSpec() = default;
    explicit GridSpec(std::vector<AxisSpec> ax);

    int dims() const { return static_cast<int>(axes.size()); }
    long num_nodes() const;
    bool operator==(const GridSpec& other) const;

    /// Node coordinates as a (num_nodes x dims) matrix, row-major node order
    /// (last axis fastest).
    Eigen::MatrixXd coordinates() const;

    static GridSpec line(int n, double lo = 0.0, double hi = 1.0,
                         Spacing s = Spacing::Closed);
    static GridSpec square(int n, double lo = 0.0, double hi = 1.0,
                           Spacing s = Spacing::LatticeLeft);
};

/// Values of a function sampled on a grid; channels-last layout.
/// values(i, c) = channel c at row-major node i.
struct DiscretizedFunction {
    GridSpec grid;
    Eigen::MatrixXd values; // num_nodes x channels
    std::optional<int> resolution_index;

    DiscretizedFunction() = default;
    DiscretizedFunction(GridSpec g, Eigen::MatrixXd v,
                        std::optional<int> r = std::nullopt);

    int channels() const { return static_cast<int>(values.cols()); }
    long num_nodes() const { return values.rows(); }
};

/// One resolution level of a task: grid, normalized cost and embedding.
struct ResolutionSpec {
    int index = 1;      // r in [1, R]
    GridSpec grid;
    double cost = 1.0;  // lambda_r in (0, 1], sums to 1 across levels
    Eigen::VectorXd embedding;
};

/// One-hot embedding of resolution r among R levels (1-based r).
Eigen::VectorXd one_hot_embedding(int r, int R);

/// Normalize positive cost ratios so they sum to 1.
std::vector<double> normalize_costs(const std::vector<double>& ratios);

/// Restrict f to a coarser nested grid by picking coincident nodes.
/// Every target node must coincide with a source node; no interpolation.
DiscretizedFunction downsample(const DiscretizedFunction& f, const GridSpec& target);

/// Multilinear interpolation of f onto a finer (or equal) grid. Exact on
/// multilinear functions; boundary cells extend linearly where the target
/// reaches past the last source node.
DiscretizedFunction interpolate_up(const DiscretizedFunction& f, const GridSpec& target);

/// ||pred - truth||_2 / ||truth||_2 over all nodes and channels.
double relative_l2(const DiscretizedFunction& pred, const DiscretizedFunction& truth);

} // namespace mrfno
