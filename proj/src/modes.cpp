#include "recimaging/modes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "recimaging/util.hpp"

namespace recimaging {

Grid make_grid(double lo, double hi, int n_points) {
    if (!(hi > lo)) throw std::invalid_argument("grid: hi must exceed lo");
    if (n_points < 2) throw std::invalid_argument("grid: need at least 2 points");
    Grid g;
    g.lo = lo;
    g.hi = hi;
    g.n_points = n_points;
    g.points.resize(n_points);
    g.weights.resize(n_points);
    const double h = (hi - lo) / (n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        g.points[i] = lo + h * i;
        g.weights[i] = (i == 0 || i == n_points - 1) ? 0.5 * h : h;
    }
    return g;
}

Grid default_grid(const std::vector<double>& centroids, double sigma, int n_points) {
    if (centroids.empty()) throw std::invalid_argument("grid: no centroids");
    auto [lo, hi] = std::minmax_element(centroids.begin(), centroids.end());
    return make_grid(*lo - 10.0 * sigma, *hi + 10.0 * sigma, n_points);
}

double eval_psf(const PsfModel& psf, double u) {
    if (psf.sigma <= 0) throw std::invalid_argument("psf: sigma must be positive");
    const double s2 = psf.sigma * psf.sigma;
    return std::exp(-u * u / (4.0 * s2)) / std::pow(2.0 * std::numbers::pi * s2, 0.25);
}

double eval_psf_derivative(const PsfModel& psf, int order, double u) {
    if (order < 0 || order > kMaxDerivativeOrder)
        throw std::invalid_argument("psf derivative: order beyond double-precision stability limit");
    if (order == 0) return eval_psf(psf, u);
    // d^n/dt^n exp(-t^2/4s^2) = (-1/2s)^n H_n(t/2s) exp(-t^2/4s^2)
    const double x = u / (2.0 * psf.sigma);
    double hm1 = 0.0, h = 1.0; // physicists' Hermite recurrence
    for (int k = 0; k < order; ++k) {
        double hp = 2.0 * x * h - 2.0 * k * hm1;
        hm1 = h;
        h = hp;
    }
    const double scale = std::pow(-1.0 / (2.0 * psf.sigma), order);
    return scale * h * eval_psf(psf, u);
}

double ModeFunction::norm() const { return std::sqrt(inner_product(*this, *this)); }

namespace {

double mode_prefactor(int order, double size) {
    if (size <= 0) throw std::invalid_argument("derivative_mode: size must be positive");
    if (order < 0 || order > kMaxDerivativeOrder)
        throw std::invalid_argument("derivative_mode: order beyond stability limit");
    double prefactor = 1.0;
    for (int k = 1; k <= order; ++k) prefactor *= size / k;
    // sign: d/du psi(v-u) = -psi'(v-u), so order n picks up (-1)^n
    return order % 2 == 1 ? -prefactor : prefactor;
}

} // namespace

double derivative_mode_value(const PsfModel& psf, int order, double centroid, double size,
                             double v) {
    return mode_prefactor(order, size) * eval_psf_derivative(psf, order, v - centroid);
}

ModeFunction derivative_mode(const PsfModel& psf, int order, double centroid, double size,
                             const Grid& grid) {
    const double prefactor = mode_prefactor(order, size);
    ModeFunction m;
    m.grid = grid;
    m.values.resize(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i)
        m.values[i] = prefactor * eval_psf_derivative(psf, order, grid.points[i] - centroid);
    return m;
}

double inner_product(const ModeFunction& f, const ModeFunction& g) {
    if (!f.grid.same_as(g.grid)) throw std::invalid_argument("inner_product: grid mismatch");
    KahanSum acc;
    const int n = f.grid.n_points;
    for (int i = 0; i < n; ++i) acc.add(f.grid.weights[i] * f.values[i] * g.values[i]);
    return acc.value();
}

namespace {

constexpr double kPivotTol = 1e-10; ///< declared-zero threshold after pre-normalization

OrthoBasis ordered_gram_schmidt(const std::vector<ModeFunction>& raw, int n_sources) {
    if (raw.empty()) throw std::invalid_argument("gram_schmidt: empty mode list");
    for (const auto& m : raw)
        if (!m.grid.same_as(raw.front().grid))
            throw std::invalid_argument("gram_schmidt: modes on different grids");

    const int n = static_cast<int>(raw.size());
    std::vector<Eigen::VectorXd> unit(n);
    std::vector<double> raw_norm(n);
    for (int i = 0; i < n; ++i) {
        raw_norm[i] = raw[i].norm();
        if (!(raw_norm[i] > 0) || !std::isfinite(raw_norm[i]))
            throw std::invalid_argument("gram_schmidt: raw mode with non-finite or zero norm");
        unit[i] = raw[i].values / raw_norm[i];
    }

    const Grid& grid = raw.front().grid;
    auto dot = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        KahanSum acc;
        for (int i = 0; i < grid.n_points; ++i) acc.add(grid.weights[i] * a[i] * b[i]);
        return acc.value();
    };

    OrthoBasis basis;
    basis.n_sources = n_sources;
    basis.n_requested = n;
    std::vector<Eigen::VectorXd> b;
    for (int m = 0; m < n; ++m) {
        Eigen::VectorXd v = unit[m];
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& bj : b) v -= dot(bj, v) * bj;
        double pivot = std::sqrt(dot(v, v));
        if (pivot < kPivotTol) break; // remaining modes are dependent on the span so far
        v /= pivot;
        // sign convention: positive projection of the raw mode that introduced it
        if (dot(unit[m], v) < 0) v = -v;
        b.push_back(std::move(v));
    }

    const int k = static_cast<int>(b.size());
    basis.modes.reserve(k);
    for (int l = 0; l < k; ++l) basis.modes.push_back(ModeFunction{grid, b[l]});
    basis.overlap_table = Eigen::MatrixXd::Zero(n, k);
    for (int m = 0; m < n; ++m)
        for (int l = 0; l <= std::min(m, k - 1); ++l)
            basis.overlap_table(m, l) = raw_norm[m] * dot(unit[m], b[l]);
    return basis;
}

} // namespace

OrthoBasis gram_schmidt_single(const std::vector<ModeFunction>& raw) {
    return ordered_gram_schmidt(raw, 1);
}

OrthoBasis gram_schmidt_joint(const std::vector<ModeFunction>& raw, int n_sources) {
    if (n_sources < 1) throw std::invalid_argument("gram_schmidt_joint: need n_sources >= 1");
    if (raw.size() % n_sources != 0)
        throw std::invalid_argument("gram_schmidt_joint: mode count not a multiple of source count");
    OrthoBasis basis = ordered_gram_schmidt(raw, n_sources);
    if (basis.modes.size() % n_sources != 0)
        throw std::runtime_error(
            "gram_schmidt_joint: dependent modes inside a derivative level; "
            "centroids too close to orthogonalize at the working precision");
    return basis;
}

} // namespace recimaging
