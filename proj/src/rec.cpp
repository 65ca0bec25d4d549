#include "recimaging/rec.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "recimaging/util.hpp"

namespace recimaging {

double PriorEnsemble::weight(int w) const {
    if (weights.empty()) return 1.0 / n_scenes();
    return weights[static_cast<std::size_t>(w)];
}

namespace {

void validate_ensemble(const PriorEnsemble& ensemble) {
    if (ensemble.n_scenes() < 2) throw std::invalid_argument("ensemble: need at least 2 scenes");
    if (!ensemble.weights.empty() &&
        ensemble.weights.size() != ensemble.prob_vectors.size())
        throw std::invalid_argument("ensemble: weights/scenes length mismatch");
    const int n = ensemble.n_probs();
    for (const auto& p : ensemble.prob_vectors)
        if (static_cast<int>(p.size()) != n)
            throw std::invalid_argument("ensemble: probability vectors of unequal length");
    if (!ensemble.weights.empty()) {
        KahanSum total;
        for (double w : ensemble.weights) {
            if (w < 0) throw std::invalid_argument("ensemble: negative weight");
            total.add(w);
        }
        if (std::abs(total.value() - 1.0) > 1e-9)
            throw std::invalid_argument("ensemble: weights must sum to 1");
    }
}

} // namespace

void build_dg(const PriorEnsemble& ensemble, Eigen::VectorXd& D, Eigen::MatrixXd& G) {
    validate_ensemble(ensemble);
    const int n = ensemble.n_probs();
    const int w_count = ensemble.n_scenes();
    std::vector<KahanSum> d_acc(n);
    std::vector<KahanSum> g_acc(static_cast<std::size_t>(n) * n);
    for (int w = 0; w < w_count; ++w) {
        const Eigen::VectorXd& p = ensemble.prob_vectors[w];
        const double wt = ensemble.weight(w);
        for (int j = 0; j < n; ++j) {
            d_acc[j].add(wt * p[j]);
            const double wp = wt * p[j];
            for (int k = j; k < n; ++k) g_acc[static_cast<std::size_t>(j) * n + k].add(wp * p[k]);
        }
    }
    D.resize(n);
    G.resize(n, n);
    for (int j = 0; j < n; ++j) {
        D[j] = d_acc[j].value();
        for (int k = j; k < n; ++k) {
            G(j, k) = g_acc[static_cast<std::size_t>(j) * n + k].value();
            G(k, j) = G(j, k);
        }
    }
}

MomentStats moment_statistics(const std::vector<MomentVector>& moments,
                              const std::vector<double>& weights) {
    if (moments.size() < 1) throw std::invalid_argument("moment statistics: empty list");
    if (!weights.empty() && weights.size() != moments.size())
        throw std::invalid_argument("moment statistics: weights length mismatch");
    const int q_count = moments.front().n_sources();
    const int max_order = moments.front().max_order();
    const int dim = q_count * (max_order + 1);
    MomentStats stats;
    stats.max_order = max_order;
    std::vector<KahanSum> d_acc(static_cast<std::size_t>(dim));
    std::vector<KahanSum> g_acc(static_cast<std::size_t>(dim) * dim);
    for (std::size_t w = 0; w < moments.size(); ++w) {
        const auto& m = moments[w];
        if (m.n_sources() != q_count || m.max_order() != max_order)
            throw std::invalid_argument("moment statistics: inhomogeneous moment vectors");
        const double wt = weights.empty() ? 1.0 / static_cast<double>(moments.size()) : weights[w];
        for (int a = 0; a < dim; ++a) {
            const double xa = m.x(a / (max_order + 1), a % (max_order + 1));
            d_acc[static_cast<std::size_t>(a)].add(wt * xa);
            for (int b = a; b < dim; ++b) {
                const double xb = m.x(b / (max_order + 1), b % (max_order + 1));
                g_acc[static_cast<std::size_t>(a) * dim + b].add(wt * xa * xb);
            }
        }
    }
    stats.d.resize(q_count, max_order + 1);
    stats.g.resize(dim, dim);
    for (int a = 0; a < dim; ++a) {
        stats.d(a / (max_order + 1), a % (max_order + 1)) = d_acc[static_cast<std::size_t>(a)].value();
        for (int b = a; b < dim; ++b) {
            stats.g(a, b) = g_acc[static_cast<std::size_t>(a) * dim + b].value();
            stats.g(b, a) = stats.g(a, b);
        }
    }
    return stats;
}

void build_dg_series(const CoeffTensor& tensor, const MomentStats& stats, double alpha,
                     int truncation, Eigen::VectorXd& D, Eigen::MatrixXd& G) {
    if (truncation < 0 || truncation > tensor.max_order)
        throw std::invalid_argument("dg series: truncation beyond tensor order");
    if (stats.max_order < truncation)
        throw std::invalid_argument("dg series: moment statistics shorter than truncation");
    if (stats.n_sources() != tensor.n_sources())
        throw std::invalid_argument("dg series: source count mismatch");
    const int n_probs = tensor.n_probs();
    const int q_count = tensor.n_sources();

    std::vector<Eigen::MatrixXd> c_n(static_cast<std::size_t>(truncation) + 1,
                                     Eigen::MatrixXd(n_probs, q_count));
    for (int n = 0; n <= truncation; ++n)
        for (int j = 0; j < n_probs; ++j)
            for (int q = 0; q < q_count; ++q) c_n[n](j, q) = tensor.c[j](q, n);

    Eigen::VectorXd alpha_pow(truncation + 1);
    alpha_pow[0] = 1.0;
    for (int n = 1; n <= truncation; ++n) alpha_pow[n] = alpha_pow[n - 1] * alpha;

    D = Eigen::VectorXd::Zero(n_probs);
    for (int n = 0; n <= truncation; ++n) {
        Eigen::VectorXd d_n(q_count);
        for (int q = 0; q < q_count; ++q) d_n[q] = stats.d(q, n);
        D += alpha_pow[n] * (c_n[n] * d_n);
    }

    G = Eigen::MatrixXd::Zero(n_probs, n_probs);
    Eigen::MatrixXd g_block(q_count, q_count);
    for (int n1 = 0; n1 <= truncation; ++n1)
        for (int n2 = 0; n2 + n1 <= truncation; ++n2) {
            for (int q1 = 0; q1 < q_count; ++q1)
                for (int q2 = 0; q2 < q_count; ++q2)
                    g_block(q1, q2) = stats.g(stats.flat(q1, n1), stats.flat(q2, n2));
            G += alpha_pow[n1] * alpha_pow[n2] * (c_n[n1] * g_block * c_n[n2].transpose());
        }
    G = ((G + G.transpose()) / 2.0).eval();
}

namespace {

/// Sign convention: first component of magnitude above a relative floor is positive.
void fix_sign(Eigen::VectorXd& v) {
    const double scale = v.cwiseAbs().maxCoeff();
    if (scale <= 0) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-12 * scale) {
            if (v[i] < 0) v = -v;
            return;
        }
    }
}

} // namespace

RecSpectrum solve_spectrum(const Eigen::VectorXd& D, const Eigen::MatrixXd& G, double d_floor) {
    if (D.size() != G.rows() || G.rows() != G.cols())
        throw std::invalid_argument("spectrum: dimension mismatch between D and G");
    RecSpectrum spec;
    for (int j = 0; j < D.size(); ++j)
        if (D[j] >= d_floor) spec.kept_outcomes.push_back(j);
    const int n = static_cast<int>(spec.kept_outcomes.size());
    if (n == 0) throw std::runtime_error("spectrum: every outcome has negligible mean probability");

    spec.d.resize(n);
    spec.g.resize(n, n);
    for (int a = 0; a < n; ++a) {
        spec.d[a] = D[spec.kept_outcomes[a]];
        for (int b = 0; b < n; ++b) spec.g(a, b) = G(spec.kept_outcomes[a], spec.kept_outcomes[b]);
    }

    const Eigen::VectorXd inv_sqrt_d = spec.d.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd w_tilde =
        inv_sqrt_d.asDiagonal() * spec.g * inv_sqrt_d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        ((w_tilde + w_tilde.transpose()) / 2.0).eval());
    if (eig.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver failed");

    // Eigen returns ascending eigenvalues; tasks are ordered by descending lambda.
    spec.beta_sq.resize(n);
    spec.lambda.resize(n);
    spec.R.resize(n, n);
    for (int k = 0; k < n; ++k) {
        double lam = eig.eigenvalues()[n - 1 - k];
        if (lam < 0.0 || lam > 1.0) {
            ++spec.n_clamped;
            lam = std::clamp(lam, 0.0, 1.0);
        }
        spec.lambda[k] = lam;
        spec.beta_sq[k] = lam < kLambdaFloor ? kBetaCutoff : (1.0 - lam) / lam;
        Eigen::VectorXd y = eig.eigenvectors().col(n - 1 - k);
        fix_sign(y);
        spec.R.col(k) = inv_sqrt_d.asDiagonal() * y;
    }
    return spec;
}

double total_rec(const RecSpectrum& spectrum, double S) {
    if (!(S > 0)) throw std::invalid_argument("total rec: S must be positive");
    KahanSum acc;
    for (int k = 0; k < spectrum.n_tasks(); ++k) {
        if (spectrum.beta_sq[k] >= kBetaCutoff) continue;
        acc.add(1.0 / (1.0 + spectrum.beta_sq[k] / S));
    }
    return acc.value();
}

double total_rec_trace_form(const Eigen::VectorXd& D, const Eigen::MatrixXd& G, double S) {
    if (!(S > 0)) throw std::invalid_argument("total rec: S must be positive");
    if (D.size() != G.rows() || G.rows() != G.cols())
        throw std::invalid_argument("total rec: dimension mismatch between D and G");
    // Tr((G+V/S)^{-1}G) is invariant under the same D^{-1/2} congruence used for
    // the spectrum, where each eigen-direction contributes lambda*S/(lambda*S+1-lambda).
    // Evaluating it there stays accurate at large S, where a direct dense solve
    // is limited by the conditioning of G + V/S. Directions below the lambda
    // floor are excluded, matching the retention convention of the sum form:
    // past S ~ 1/floor the two otherwise diverge by whatever sub-floor noise
    // the eigensolver leaves behind.
    std::vector<int> kept;
    for (int j = 0; j < D.size(); ++j)
        if (D[j] >= kDFloor) kept.push_back(j);
    const int n = static_cast<int>(kept.size());
    if (n == 0) throw std::runtime_error("total rec: every outcome has negligible mean probability");
    Eigen::VectorXd d(n);
    Eigen::MatrixXd g(n, n);
    for (int a = 0; a < n; ++a) {
        d[a] = D[kept[static_cast<std::size_t>(a)]];
        for (int b = 0; b < n; ++b)
            g(a, b) = G(kept[static_cast<std::size_t>(a)], kept[static_cast<std::size_t>(b)]);
    }
    const Eigen::VectorXd inv_sqrt_d = d.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd w_tilde = inv_sqrt_d.asDiagonal() * g * inv_sqrt_d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        ((w_tilde + w_tilde.transpose()) / 2.0).eval());
    if (eig.info() != Eigen::Success) throw std::runtime_error("total rec: eigensolver failed");
    KahanSum acc;
    for (int k = 0; k < n; ++k) {
        const double lam = std::clamp(eig.eigenvalues()[k], 0.0, 1.0);
        if (lam < kLambdaFloor) continue;
        acc.add(lam * S / (lam * S + 1.0 - lam));
    }
    return acc.value();
}

Eigen::VectorXd eigentask_values(const RecSpectrum& spectrum, const Eigen::VectorXd& P) {
    const int needed = spectrum.kept_outcomes.empty()
                           ? 0
                           : *std::max_element(spectrum.kept_outcomes.begin(),
                                               spectrum.kept_outcomes.end()) + 1;
    if (P.size() < needed)
        throw std::invalid_argument("eigentasks: probability vector shorter than outcome set");
    Eigen::VectorXd kept(spectrum.kept_outcomes.size());
    for (std::size_t a = 0; a < spectrum.kept_outcomes.size(); ++a)
        kept[static_cast<Eigen::Index>(a)] = P[spectrum.kept_outcomes[a]];
    return spectrum.R.transpose() * kept;
}

double capacity_of(const RecSpectrum& spectrum, const std::vector<double>& f_values,
                   const PriorEnsemble& ensemble, double S) {
    if (!(S > 0)) throw std::invalid_argument("capacity: S must be positive");
    if (static_cast<int>(f_values.size()) != ensemble.n_scenes())
        throw std::invalid_argument("capacity: f values / ensemble length mismatch");
    const int n = static_cast<int>(spectrum.kept_outcomes.size());
    std::vector<KahanSum> v_acc(static_cast<std::size_t>(n));
    KahanSum f2_acc;
    for (int w = 0; w < ensemble.n_scenes(); ++w) {
        const double wt = ensemble.weight(w);
        const double f = f_values[static_cast<std::size_t>(w)];
        f2_acc.add(wt * f * f);
        const Eigen::VectorXd& p = ensemble.prob_vectors[w];
        for (int a = 0; a < n; ++a)
            v_acc[static_cast<std::size_t>(a)].add(wt * f * p[spectrum.kept_outcomes[a]]);
    }
    const double f2 = f2_acc.value();
    if (!(f2 > 0)) throw std::invalid_argument("capacity: target function is identically zero");
    Eigen::VectorXd v(n);
    for (int a = 0; a < n; ++a) v[a] = v_acc[static_cast<std::size_t>(a)].value();
    const Eigen::MatrixXd V = Eigen::MatrixXd(spectrum.d.asDiagonal()) - spectrum.g;
    const Eigen::MatrixXd A = spectrum.g + V / S;
    return v.dot(A.ldlt().solve(v)) / f2;
}

Eigen::VectorXd scaling_fit(const std::vector<double>& alphas,
                            const Eigen::MatrixXd& beta_sq_per_alpha, double cutoff) {
    if (static_cast<Eigen::Index>(alphas.size()) != beta_sq_per_alpha.rows())
        throw std::invalid_argument("scaling fit: alpha count / row count mismatch");
    const int n_tasks = static_cast<int>(beta_sq_per_alpha.cols());
    Eigen::VectorXd slopes(n_tasks);
    for (int k = 0; k < n_tasks; ++k) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            const double b = beta_sq_per_alpha(static_cast<Eigen::Index>(i), k);
            if (!(b > 0) || b >= cutoff) continue;
            xs.push_back(std::log(alphas[i]));
            ys.push_back(std::log(b));
        }
        if (xs.size() < 2)
            throw std::runtime_error("scaling fit: fewer than 2 usable points for a task");
        const double n = static_cast<double>(xs.size());
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        slopes[k] = sxy / sxx;
    }
    return slopes;
}

PrefactorDecomposition prefactor_decomposition(const CoeffTensor& tensor,
                                               const MomentStats& stats,
                                               const Eigen::VectorXd& D, double alpha) {
    if (stats.max_order < tensor.max_order)
        throw std::invalid_argument("prefactor: moment statistics shorter than tensor order");
    if (stats.n_sources() != tensor.n_sources())
        throw std::invalid_argument("prefactor: source count mismatch");
    const int n_probs = tensor.n_probs();
    if (D.size() != n_probs) throw std::invalid_argument("prefactor: D length mismatch");
    for (int j = 0; j < n_probs; ++j)
        if (!(D[j] > 0)) throw std::invalid_argument("prefactor: singular D");
    const int q_count = tensor.n_sources();
    const int order = tensor.max_order;
    const int dim = q_count * (order + 1);

    // block columns alpha^n D^{-1/2} C_n, flattened like the g statistics
    Eigen::MatrixXd cols(n_probs, dim);
    double a_pow = 1.0;
    for (int n = 0; n <= order; ++n) {
        for (int q = 0; q < q_count; ++q)
            for (int j = 0; j < n_probs; ++j)
                cols(j, q * (order + 1) + n) = a_pow * tensor.c[j](q, n) / std::sqrt(D[j]);
        a_pow *= alpha;
    }
    const Eigen::MatrixXd gram = cols.transpose() * cols;

    Eigen::MatrixXd g_small(dim, dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) g_small(a, b) = stats.g(a, b);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(g_small), ec(gram);
    if (eg.info() != Eigen::Success || ec.info() != Eigen::Success)
        throw std::runtime_error("prefactor: eigensolver failed");
    PrefactorDecomposition out;
    out.eig_g = eg.eigenvalues().reverse();
    out.eig_c = ec.eigenvalues().reverse();
    out.lambda_hat = out.eig_g.cwiseProduct(out.eig_c);
    return out;
}

namespace {

Eigen::VectorXd deviation_for(const RecSpectrum& spectrum,
                              const std::vector<Eigen::MatrixXd>& predicted) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(predicted.size()));
    const Eigen::VectorXd sqrt_d = spectrum.d.cwiseSqrt();
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const Eigen::MatrixXd& Z = predicted[k];
        if (Z.rows() != spectrum.R.rows())
            throw std::invalid_argument("basis deviation: subspace dimension mismatch");
        if (static_cast<int>(k) >= spectrum.n_tasks())
            throw std::invalid_argument("basis deviation: more predictions than tasks");
        const Eigen::VectorXd y = sqrt_d.asDiagonal() * spectrum.R.col(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd proj = Z * (Z.transpose() * y);
        const double norm = proj.norm();
        // ||yhat - y||^2 = 2 - 2 <yhat, y> = 2 - 2||Z^T y|| for normalized yhat
        out[static_cast<Eigen::Index>(k)] = norm < 1e-300 ? 2.0 : 2.0 - 2.0 * norm;
    }
    return out;
}

} // namespace

Eigen::VectorXd basis_deviation(const RecSpectrum& spectrum,
                                const std::vector<Eigen::MatrixXd>& predicted_subspaces) {
    return deviation_for(spectrum, predicted_subspaces);
}

Eigen::VectorXd basis_deviation(const RecSpectrum& spectrum, const Eigen::MatrixXd& Z) {
    std::vector<Eigen::MatrixXd> predicted;
    predicted.reserve(static_cast<std::size_t>(Z.cols()));
    for (Eigen::Index k = 0; k < Z.cols(); ++k) predicted.push_back(Z.col(k));
    return deviation_for(spectrum, predicted);
}

bool reparameterization_check(const PriorEnsemble& ensemble) {
    Eigen::VectorXd d_ref;
    Eigen::MatrixXd g_ref;
    build_dg(ensemble, d_ref, g_ref);

    PriorEnsemble reversed = ensemble;
    std::reverse(reversed.prob_vectors.begin(), reversed.prob_vectors.end());
    if (!reversed.weights.empty()) std::reverse(reversed.weights.begin(), reversed.weights.end());
    if (!reversed.moments.empty()) std::reverse(reversed.moments.begin(), reversed.moments.end());

    PriorEnsemble doubled = ensemble;
    doubled.prob_vectors.insert(doubled.prob_vectors.end(), ensemble.prob_vectors.begin(),
                                ensemble.prob_vectors.end());
    if (!doubled.weights.empty()) {
        doubled.weights.insert(doubled.weights.end(), ensemble.weights.begin(),
                               ensemble.weights.end());
        for (double& w : doubled.weights) w /= 2.0;
    }
    doubled.moments.clear();

    for (const PriorEnsemble* variant : {&reversed, &doubled}) {
        Eigen::VectorXd d_var;
        Eigen::MatrixXd g_var;
        build_dg(*variant, d_var, g_var);
        if ((d_var - d_ref).cwiseAbs().maxCoeff() > 1e-12) return false;
        if ((g_var - g_ref).cwiseAbs().maxCoeff() > 1e-12) return false;
    }
    return true;
}

} // namespace recimaging
