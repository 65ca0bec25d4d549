#pragma once

#include <Eigen/Core>
#include <vector>

namespace recimaging {

/// Uniform 1-D spatial grid with trapezoid quadrature weights.
/// Positions are in PSF-width units.
struct Grid {
    double lo = 0.0;
    double hi = 0.0;
    int n_points = 0;
    Eigen::VectorXd points;
    Eigen::VectorXd weights;

    double step() const { return (hi - lo) / (n_points - 1); }
    bool same_as(const Grid& other) const {
        return lo == other.lo && hi == other.hi && n_points == other.n_points;
    }
};

/// Trapezoid weights: h at interior nodes, h/2 at the ends; they sum to hi-lo.
Grid make_grid(double lo, double hi, int n_points);

/// Default detection grid: 10 PSF widths beyond the outermost centroids.
Grid default_grid(const std::vector<double>& centroids, double sigma, int n_points = 4001);

} // namespace recimaging
