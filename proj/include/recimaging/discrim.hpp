#pragma once

#include <Eigen/Core>
#include <string>

#include "recimaging/sampling.hpp"

namespace recimaging {

struct Hypothesis {
    std::string label;
    Eigen::VectorXd p;
    double prior = 0.5;
};

enum class Decision { H0, H1 };

/// Log-likelihood-ratio test with prior weights. Counts on outcomes impossible
/// under exactly one hypothesis decide for the other; impossible under both
/// contribute nothing. Ties go to H0.
Decision likelihood_ratio_decide(const CountVector& counts, const Hypothesis& h0,
                                 const Hypothesis& h1);

/// Classical Chernoff exponent -log min_t sum_j p0_j^t p1_j^(1-t), t in [0,1],
/// by golden-section search (the objective is log-convex). Disjoint supports
/// give +infinity.
double chernoff_exponent(const Eigen::VectorXd& p0, const Eigen::VectorXd& p1);

} // namespace recimaging
