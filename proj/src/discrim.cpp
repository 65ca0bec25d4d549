#include "recimaging/discrim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "recimaging/util.hpp"

namespace recimaging {

Decision likelihood_ratio_decide(const CountVector& counts, const Hypothesis& h0,
                                 const Hypothesis& h1) {
    if (counts.n_outcomes() != h0.p.size() || counts.n_outcomes() != h1.p.size())
        throw std::invalid_argument("lrt: counts/hypothesis outcome mismatch");
    if (!(h0.prior > 0) || !(h1.prior > 0) || std::abs(h0.prior + h1.prior - 1.0) > 1e-9)
        throw std::invalid_argument("lrt: priors must be positive and sum to 1");
    bool impossible0 = false, impossible1 = false;
    KahanSum ll0, ll1;
    for (int j = 0; j < counts.n_outcomes(); ++j) {
        const std::int64_t n = counts.counts[static_cast<std::size_t>(j)];
        if (n == 0) continue;
        const double p0 = h0.p[j], p1 = h1.p[j];
        if (p0 <= 0 && p1 <= 0) continue; // unmodeled outcome: no evidence either way
        if (p0 <= 0) {
            impossible0 = true;
            continue;
        }
        if (p1 <= 0) {
            impossible1 = true;
            continue;
        }
        ll0.add(static_cast<double>(n) * std::log(p0));
        ll1.add(static_cast<double>(n) * std::log(p1));
    }
    if (impossible0 && !impossible1) return Decision::H1;
    if (impossible1) return Decision::H0; // covers "impossible under both" by the H0 tie-break
    const double score0 = ll0.value() + std::log(h0.prior);
    const double score1 = ll1.value() + std::log(h1.prior);
    return score1 > score0 ? Decision::H1 : Decision::H0;
}

double chernoff_exponent(const Eigen::VectorXd& p0, const Eigen::VectorXd& p1) {
    if (p0.size() != p1.size()) throw std::invalid_argument("chernoff: length mismatch");
    // restrict to the common support; the objective is continuous on [0,1] there
    std::vector<std::pair<double, double>> support;
    for (Eigen::Index j = 0; j < p0.size(); ++j) {
        if (p0[j] < 0 || p1[j] < 0) throw std::invalid_argument("chernoff: negative probability");
        if (p0[j] > 0 && p1[j] > 0) support.emplace_back(p0[j], p1[j]);
    }
    if (support.empty()) return std::numeric_limits<double>::infinity();

    auto objective = [&](double t) {
        KahanSum acc;
        for (const auto& [a, b] : support)
            acc.add(std::exp(t * std::log(a) + (1.0 - t) * std::log(b)));
        return acc.value();
    };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = 1.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    const double best =
        std::min({objective(0.0), objective(1.0), objective((lo + hi) / 2.0)});
    if (!(best > 0)) return std::numeric_limits<double>::infinity();
    return -std::log(best);
}

} // namespace recimaging
