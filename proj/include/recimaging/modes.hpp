#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "recimaging/grid.hpp"

namespace recimaging {

enum class PsfKind { Gaussian };

/// Amplitude response of the imaging system; sigma sets the resolution scale.
struct PsfModel {
    PsfKind kind = PsfKind::Gaussian;
    double sigma = 1.0;
};

/// psi(u); Gaussian: exp(-u^2/4 sigma^2) / (2 pi sigma^2)^(1/4), unit L2 norm.
double eval_psf(const PsfModel& psf, double u);

/// d^n/du^n of the Gaussian amplitude at offset u (Hermite recurrence).
double eval_psf_derivative(const PsfModel& psf, int order, double u);

/// A real amplitude profile sampled on a grid.
struct ModeFunction {
    Grid grid;
    Eigen::VectorXd values;

    double norm() const;
};

inline constexpr int kMaxDerivativeOrder = 8;

/// [d^n psi(v-u)/du^n at u=u_q] * L_q^n / n!, evaluated at a single point v.
double derivative_mode_value(const PsfModel& psf, int order, double centroid, double size,
                             double v);

/// v -> [d^n psi(v-u)/du^n at u=u_q] * L_q^n / n!. Unnormalized: the norm of
/// the order-n mode carries the (L/sigma)^n scaling of the moment expansion.
ModeFunction derivative_mode(const PsfModel& psf, int order, double centroid, double size,
                             const Grid& grid);

/// Quadrature inner product; both modes must live on the same grid.
double inner_product(const ModeFunction& f, const ModeFunction& g);

/// Result of ordered Gram-Schmidt over raw derivative modes.
/// overlap_table(m, l) = <raw_m | b_l>; zero above the diagonal by construction.
/// For the joint (multi-source) variant, raw index m and basis index l both run
/// over (derivative order, source) pairs in order-major layout: index = order*Q + source.
struct OrthoBasis {
    std::vector<ModeFunction> modes;
    Eigen::MatrixXd overlap_table;
    int n_sources = 1;
    int n_requested = 0; ///< raw modes supplied; modes.size() < n_requested means truncation

    int levels() const { return static_cast<int>(modes.size()) / n_sources; }
    /// Column of b_j^(l); j is 1-based to match outcome labels.
    int index_of(int level, int source_j = 1) const { return level * n_sources + (source_j - 1); }
};

/// Orthonormalize modes ordered by derivative order. Modified Gram-Schmidt with
/// one reorthogonalization pass on pre-normalized inputs; raw norms are
/// reattached to the overlap table afterwards. Near-degenerate pivots truncate
/// the basis (achieved order = modes.size() - 1).
OrthoBasis gram_schmidt_single(const std::vector<ModeFunction>& raw);

/// Joint orthonormalization across sources; raw modes ordered by
/// (derivative order ascending, then source ascending) and list size must be a
/// multiple of n_sources. Truncation before completing all sources of a level
/// is reported as an error (coincident centroids make the Gram matrix singular).
OrthoBasis gram_schmidt_joint(const std::vector<ModeFunction>& raw, int n_sources);

} // namespace recimaging
