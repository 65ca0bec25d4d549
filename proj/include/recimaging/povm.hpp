#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "recimaging/modes.hpp"
#include "recimaging/scene.hpp"

namespace recimaging {

enum class PovmKind { DirectImaging, BinarySpade, SpadeSingle, SeparateSpade, OrthogonalizedSpade };

std::string povm_kind_name(PovmKind kind);

/// One measurement outcome: a pixel interval (direct imaging) or a projector
/// mode with a family weight (mode-sorting measurements).
struct OutcomeSpec {
    enum class Kind { Pixel, Projector };
    Kind kind = Kind::Projector;
    double pixel_lo = 0.0, pixel_hi = 0.0;
    ModeFunction mode; ///< empty for pixel outcomes
    double weight = 1.0;
    std::string label;
};

/// Ordered outcome list plus an explicit completeness sink. The sink makes the
/// truncated outcome family a valid sampling distribution; it is always the
/// last probability entry and is not stored in `outcomes`.
struct Povm {
    PovmKind kind = PovmKind::DirectImaging;
    std::vector<OutcomeSpec> outcomes;
    bool has_sink = true;
    PsfModel psf;
    double xi = 0.0; ///< mode width of the binary measurement
    std::vector<double> centroids;
    double source_size = 0.0; ///< L used when building derivative modes
    int l_max = 0;
    std::vector<double> pixel_edges;
    Grid grid; ///< quadrature grid shared by projector modes
    std::optional<OrthoBasis> basis;

    int n_sources() const { return static_cast<int>(centroids.size()); }
    /// number of probability entries including the sink
    int n_probs() const { return static_cast<int>(outcomes.size()) + (has_sink ? 1 : 0); }
    std::vector<std::string> labels() const;
};

/// Moment-expansion coefficients: P_j = sum_{q,n} c[j](q, n) x_{n,q} alpha^n.
/// Entries are alpha-free (the alpha^n factor is reapplied at evaluation);
/// alpha_ref records the L/sigma at which the source geometry was taken.
struct CoeffTensor {
    std::vector<Eigen::MatrixXd> c; ///< per probability entry (sink last): rows q, cols n
    double alpha_ref = 0.0;
    int max_order = 0;

    int n_probs() const { return static_cast<int>(c.size()); }
    int n_sources() const { return c.empty() ? 0 : static_cast<int>(c.front().rows()); }
};

Povm build_direct_imaging(const PsfModel& psf, double region_lo, double region_hi, int t_max);

/// Projection onto a width-xi Gaussian mode at `center`; the complement is the sink.
Povm build_binary_spade(double sigma, double xi, double center, const Grid& grid);

/// Outcomes [b_0; (b_l +/- b_{l+1})/sqrt(2) for l = 0..l_max-1], each weighted 1/2.
Povm build_spade_single(const PsfModel& psf, double centroid, double size, int l_max,
                        const Grid& grid);

/// Per-source single-source families, every projector weighted 1/(2Q), grouped
/// level-major: all order-0 modes, then all level-0 pairs, then level-1 pairs, ...
Povm build_separate_spade(const PsfModel& psf, const std::vector<double>& centroids, double size,
                          int l_max, const Grid& grid);

/// Jointly orthogonalized family: cross-source low-order moment terms cancel in
/// the higher outcomes. Same level-major outcome order as the separate family,
/// weights 1/2.
Povm build_orthogonalized_spade(const PsfModel& psf, const std::vector<double>& centroids,
                                double size, int l_max, const Grid& grid);

/// Probability per unit intensity of a point emitter at each position:
/// kernel(j, s) for probability entry j (sink row last). Exact overlaps; this
/// is the path used for photon sampling.
Eigen::MatrixXd exact_probability_kernel(const Povm& povm, const std::vector<double>& positions);

Eigen::VectorXd exact_probabilities(const Povm& povm, const Scene& scene);

/// Series evaluation at truncation max_order; may go slightly negative and is
/// never used for sampling.
Eigen::VectorXd moment_probabilities(const CoeffTensor& tensor, const MomentVector& x,
                                     double alpha);

struct SourceGeometry {
    double centroid = 0.0;
    double size = 0.0;
};

/// Assemble the coefficient tensor for the given source geometry. Mode-sorting
/// families require geometry matching the build inputs; direct imaging accepts
/// any geometry (pixel integrals of derivative-mode products).
CoeffTensor coefficient_tensor(const Povm& povm, const std::vector<SourceGeometry>& sources,
                               int max_order);

/// JSON descriptor (kind, metadata, pixel edges or basis overlap table) for
/// reproducibility manifests.
std::string povm_to_json(const Povm& povm);

} // namespace recimaging
