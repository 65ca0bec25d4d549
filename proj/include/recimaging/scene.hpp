#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace recimaging {

/// A source confined to [centroid - size/2, centroid + size/2], discretized as
/// point emitters at the centers of equal segments.
struct CompactSource {
    double centroid = 0.0;
    double size = 0.0;
    std::vector<double> pixels; ///< nonnegative intensity per segment center

    int n_pixels() const { return static_cast<int>(pixels.size()); }
    /// position of the s-th segment center
    double position(int s) const {
        const int n = n_pixels();
        return centroid - size / 2.0 + size * (s + 0.5) / n;
    }
};

/// A normalized set of sources: total intensity sums to 1.
struct Scene {
    std::vector<CompactSource> sources;

    double total_intensity() const;
    /// flattened emitter positions, source-major
    std::vector<double> positions() const;
    Eigen::VectorXd intensities() const;
    void normalize();
};

/// Convenience: delta emitters at explicit positions (sizes are nominal).
Scene make_point_scene(const std::vector<double>& positions,
                       const std::vector<double>& intensities);

/// x(q, n) = sum_s I_s ((u_s - u_q)/L_q)^n; the normalized coordinate must lie
/// in [-1/2, 1/2].
struct MomentVector {
    Eigen::MatrixXd x; ///< rows: sources, cols: order 0..max_order

    int n_sources() const { return static_cast<int>(x.rows()); }
    int max_order() const { return static_cast<int>(x.cols()) - 1; }
};

MomentVector moments(const Scene& scene, int max_order);

/// Ensemble generator settings following the two-case protocol: binary draws
/// with activation probability p0 on the admissible segments.
struct SceneGeneratorConfig {
    std::vector<double> centroids;
    std::vector<double> sizes; ///< one per source
    int n_max = 20;            ///< segments per source
    double p0 = 0.5;
    enum class Case { Active, Inactive, Unrestricted };
    Case draw_case = Case::Unrestricted;
    std::function<bool(double)> eta;  ///< active-region indicator (null: all active)
    std::function<bool(double)> zeta; ///< admissible-position indicator (null: everywhere)
    std::uint64_t seed = 0;
};

/// Bernoulli(p0) pixel draws on admissible segments, renormalized to unit total.
/// All-zero draws are redrawn (bounded retries).
Scene generate_scene(const SceneGeneratorConfig& cfg, std::mt19937_64& rng);

/// Continuous U[0,1] intensities on admissible segments, then normalization;
/// the prior ensemble used by the scaling experiments.
Scene generate_uniform_random_scene(const SceneGeneratorConfig& cfg, std::mt19937_64& rng);

/// Rasterize a grayscale image (PGM P2/P5 with maxval <= 65535, or CSV matrix)
/// row-major, split into `segments` equal consecutive runs, and place run m as
/// the pixel vector of the m-th source. The whole scene is normalized jointly.
Scene ingest_raster_image(const std::string& path, int segments,
                          const std::vector<std::pair<double, double>>& placement);

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);

} // namespace recimaging
