#pragma once

#include <Eigen/Core>
#include <vector>

#include "recimaging/povm.hpp"
#include "recimaging/scene.hpp"

namespace recimaging {

inline constexpr double kBetaCutoff = 1e15;  ///< beta^2 stand-in for rank-deficient directions
inline constexpr double kLambdaFloor = 1e-14; ///< below this, lambda is treated as exactly rank-lost
inline constexpr double kDFloor = 1e-20;      ///< outcomes with mean probability below are dropped

/// Empirical prior: one probability vector per scene, optionally weighted
/// (quadrature priors) and carrying the scene moment vectors for the series
/// diagnostics. Empty weights mean uniform.
struct PriorEnsemble {
    std::vector<Eigen::VectorXd> prob_vectors;
    std::vector<double> weights;
    std::vector<MomentVector> moments;

    int n_scenes() const { return static_cast<int>(prob_vectors.size()); }
    int n_probs() const { return prob_vectors.empty() ? 0 : static_cast<int>(prob_vectors.front().size()); }
    double weight(int w) const;
};

/// Result of the eigenproblem (D - G) r = beta^2 G r, solved on the kept
/// outcomes. Entries are ordered by ascending beta^2 (descending lambda), with
/// rank-lost directions coded as beta^2 = kBetaCutoff.
struct RecSpectrum {
    Eigen::VectorXd beta_sq;
    Eigen::VectorXd lambda;
    Eigen::MatrixXd R; ///< columns r_k on kept outcomes, R^T D R = I
    std::vector<int> kept_outcomes;
    Eigen::VectorXd d; ///< kept diagonal of D
    Eigen::MatrixXd g; ///< kept block of G
    int n_clamped = 0; ///< eigenvalues clamped into [0,1]

    int n_tasks() const { return static_cast<int>(beta_sq.size()); }
};

/// D_jj = E_w[P_j], G_jk = E_w[P_j P_k]; compensated, weighted means.
void build_dg(const PriorEnsemble& ensemble, Eigen::VectorXd& D, Eigen::MatrixXd& G);

/// Prior moment statistics entering the alpha-series assembly of D and G:
/// d(q, n) = E[x_{n,q}], g(flat(q1,n1), flat(q2,n2)) = E[x_{n1,q1} x_{n2,q2}]
/// with flat(q, n) = q*(max_order+1) + n.
struct MomentStats {
    Eigen::MatrixXd d;
    Eigen::MatrixXd g;
    int max_order = 0;

    int n_sources() const { return static_cast<int>(d.rows()); }
    int flat(int q, int n) const { return q * (max_order + 1) + n; }
};

MomentStats moment_statistics(const std::vector<MomentVector>& moments,
                              const std::vector<double>& weights = {});

/// Series assembly truncated at total alpha-order `truncation`:
/// D = sum_n alpha^n C_n d_n, G = sum_{n1+n2<=N} alpha^{n1+n2} C_{n1} g C_{n2}^T.
void build_dg_series(const CoeffTensor& tensor, const MomentStats& stats, double alpha,
                     int truncation, Eigen::VectorXd& D, Eigen::MatrixXd& G);

RecSpectrum solve_spectrum(const Eigen::VectorXd& D, const Eigen::MatrixXd& G,
                           double d_floor = kDFloor);

/// C_T(S) = sum_k 1/(1 + beta_k^2/S); rank-lost entries contribute zero.
double total_rec(const RecSpectrum& spectrum, double S);

/// Evaluation of C_T(S) as Tr((G + V/S)^{-1} G), V = D - G, from D and G
/// directly, under the same rank-retention convention as the sum form.
double total_rec_trace_form(const Eigen::VectorXd& D, const Eigen::MatrixXd& G, double S);

/// xi_k = sum_j R(j,k) P_j over kept outcomes; P spans the full outcome list.
Eigen::VectorXd eigentask_values(const RecSpectrum& spectrum, const Eigen::VectorXd& P);

/// Normalized mean-squared expressivity of a target function over the prior:
/// C[f] = v^T (G + V/S)^{-1} v / E[f^2] with v_j = E[f P_j].
double capacity_of(const RecSpectrum& spectrum, const std::vector<double>& f_values,
                   const PriorEnsemble& ensemble, double S);

/// Least-squares slope of log beta^2 vs log alpha per task, skipping entries at
/// or above the cutoff. beta_sq_per_alpha is n_alphas x n_tasks.
Eigen::VectorXd scaling_fit(const std::vector<double>& alphas,
                            const Eigen::MatrixXd& beta_sq_per_alpha,
                            double cutoff = kBetaCutoff);

/// Spectra of the moment-statistics factor g and the measurement Gram factor
/// CC = (alpha^n D^{-1/2} C_n block columns) Gram matrix, plus their eigenvalue
/// products lambda_hat (all descending).
struct PrefactorDecomposition {
    Eigen::VectorXd eig_g;
    Eigen::VectorXd eig_c;
    Eigen::VectorXd lambda_hat;
};

PrefactorDecomposition prefactor_decomposition(const CoeffTensor& tensor,
                                               const MomentStats& stats,
                                               const Eigen::VectorXd& D, double alpha);

/// Delta y_k^2 = ||yhat_k - y_k||^2 where y_k = D^(1/2) r_k and yhat_k is the
/// normalized projection of y_k onto the predicted subspace for task k.
/// An orthogonal prediction gives 2; an exact one gives 0.
Eigen::VectorXd basis_deviation(const RecSpectrum& spectrum,
                                const std::vector<Eigen::MatrixXd>& predicted_subspaces);

/// Column k of Z is the predicted direction for task k.
Eigen::VectorXd basis_deviation(const RecSpectrum& spectrum, const Eigen::MatrixXd& Z);

/// The prior ensemble alone determines D, G: permutation and duplication of the
/// scene list must leave them unchanged (compensated means, 1e-12).
bool reparameterization_check(const PriorEnsemble& ensemble);

} // namespace recimaging
