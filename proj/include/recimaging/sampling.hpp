#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

namespace recimaging {

/// Outcome counts of a fixed-size detection run; the sum is exactly `total`.
struct CountVector {
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;

    int n_outcomes() const { return static_cast<int>(counts.size()); }
};

/// Clamp tiny negative entries (quadrature noise) to zero and renormalize.
/// Entries below -tol are genuine errors and throw.
Eigen::VectorXd sanitize_probabilities(const Eigen::VectorXd& p, double tol = 1e-9);

/// Multinomial draw by sequential conditional binomials: O(#outcomes) work
/// regardless of S. Probabilities are renormalized by their float sum first;
/// any residual mass ends up in the final outcome.
CountVector sample_counts(const Eigen::VectorXd& p, std::int64_t S, std::mt19937_64& rng);

Eigen::VectorXd empirical_probs(const CountVector& counts);

} // namespace recimaging
