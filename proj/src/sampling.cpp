#include "recimaging/sampling.hpp"

#include <algorithm>
#include <stdexcept>

#include "recimaging/util.hpp"

namespace recimaging {

Eigen::VectorXd sanitize_probabilities(const Eigen::VectorXd& p, double tol) {
    Eigen::VectorXd out = p;
    for (Eigen::Index j = 0; j < out.size(); ++j) {
        if (out[j] < -tol)
            throw std::invalid_argument("probabilities: entry below the negativity tolerance");
        if (out[j] < 0) out[j] = 0.0;
    }
    const double total = out.sum();
    if (!(total > 0)) throw std::invalid_argument("probabilities: zero total mass");
    return out / total;
}

CountVector sample_counts(const Eigen::VectorXd& p, std::int64_t S, std::mt19937_64& rng) {
    if (S < 0) throw std::invalid_argument("sample: negative photon number");
    if (p.size() == 0) throw std::invalid_argument("sample: empty probability vector");
    KahanSum sum_acc;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        if (p[j] < 0) throw std::invalid_argument("sample: negative probability");
        sum_acc.add(p[j]);
    }
    const double total = sum_acc.value();
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("sample: probabilities do not sum to 1");

    CountVector out;
    out.total = S;
    out.counts.assign(static_cast<std::size_t>(p.size()), 0);
    std::int64_t remaining = S;
    double mass_left = total; // renormalization by the exact float sum
    for (Eigen::Index j = 0; j + 1 < p.size(); ++j) {
        if (remaining == 0) break;
        if (!(mass_left > 0)) break; // residual mass exhausted; rest goes to the last outcome
        const double cond = std::clamp(p[j] / mass_left, 0.0, 1.0);
        std::binomial_distribution<std::int64_t> binom(remaining, cond);
        const std::int64_t draw = binom(rng);
        out.counts[static_cast<std::size_t>(j)] = draw;
        remaining -= draw;
        mass_left -= p[j];
    }
    out.counts.back() += remaining;
    return out;
}

Eigen::VectorXd empirical_probs(const CountVector& counts) {
    if (counts.total < 1) throw std::invalid_argument("empirical probabilities: need S >= 1");
    Eigen::VectorXd p(counts.n_outcomes());
    for (int j = 0; j < counts.n_outcomes(); ++j)
        p[j] = static_cast<double>(counts.counts[static_cast<std::size_t>(j)]) /
               static_cast<double>(counts.total);
    return p;
}

} // namespace recimaging
