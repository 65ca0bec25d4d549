#include "recimaging/povm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "recimaging/util.hpp"

namespace recimaging {

std::string povm_kind_name(PovmKind kind) {
    switch (kind) {
        case PovmKind::DirectImaging: return "direct_imaging";
        case PovmKind::BinarySpade: return "binary_spade";
        case PovmKind::SpadeSingle: return "spade_single";
        case PovmKind::SeparateSpade: return "separate_spade";
        case PovmKind::OrthogonalizedSpade: return "orthogonalized_spade";
    }
    return "unknown";
}

std::vector<std::string> Povm::labels() const {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n_probs()));
    for (const auto& o : outcomes) out.push_back(o.label);
    if (has_sink) out.push_back("sink");
    return out;
}

namespace {

const QuadRule& pixel_rule() {
    static const QuadRule rule = gauss_legendre(64);
    return rule;
}

/// 64-point panels no wider than sigma/2; one panel for the standard 0.4-sigma pixel.
template <typename Fn>
double pixel_integral(double lo, double hi, double sigma, Fn&& f) {
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / (0.5 * sigma))));
    const QuadRule& rule = pixel_rule();
    const double h = (hi - lo) / panels;
    KahanSum acc;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + h * (p + 0.5), half = 0.5 * h;
        for (int g = 0; g < rule.nodes.size(); ++g)
            acc.add(half * rule.weights[g] * f(mid + half * rule.nodes[g]));
    }
    return acc.value();
}

ModeFunction pair_mode(const ModeFunction& a, const ModeFunction& b, double sign) {
    ModeFunction m;
    m.grid = a.grid;
    m.values = (a.values + sign * b.values) / std::numbers::sqrt2;
    return m;
}

OutcomeSpec projector(ModeFunction mode, double weight, std::string label) {
    OutcomeSpec o;
    o.kind = OutcomeSpec::Kind::Projector;
    o.mode = std::move(mode);
    o.weight = weight;
    o.label = std::move(label);
    return o;
}

std::vector<OrthoBasis> per_source_bases(const PsfModel& psf, const std::vector<double>& centroids,
                                         double size, int l_max, const Grid& grid) {
    std::vector<OrthoBasis> bases;
    for (double u : centroids) {
        std::vector<ModeFunction> raw;
        raw.reserve(static_cast<std::size_t>(l_max) + 1);
        for (int n = 0; n <= l_max; ++n) raw.push_back(derivative_mode(psf, n, u, size, grid));
        OrthoBasis basis = gram_schmidt_single(raw);
        if (static_cast<int>(basis.modes.size()) != l_max + 1)
            throw std::runtime_error("spade: derivative modes dependent before reaching l_max");
        bases.push_back(std::move(basis));
    }
    return bases;
}

} // namespace

Povm build_direct_imaging(const PsfModel& psf, double region_lo, double region_hi, int t_max) {
    if (!(region_hi > region_lo)) throw std::invalid_argument("direct imaging: empty region");
    if (t_max < 1) throw std::invalid_argument("direct imaging: need at least one pixel");
    Povm p;
    p.kind = PovmKind::DirectImaging;
    p.psf = psf;
    p.pixel_edges.resize(static_cast<std::size_t>(t_max) + 1);
    const double width = (region_hi - region_lo) / t_max;
    for (int t = 0; t <= t_max; ++t) p.pixel_edges[t] = region_lo + width * t;
    p.pixel_edges.back() = region_hi;
    for (int t = 0; t < t_max; ++t) {
        OutcomeSpec o;
        o.kind = OutcomeSpec::Kind::Pixel;
        o.pixel_lo = p.pixel_edges[t];
        o.pixel_hi = p.pixel_edges[t + 1];
        o.weight = 1.0;
        o.label = "pixel_" + std::to_string(t);
        p.outcomes.push_back(std::move(o));
    }
    return p;
}

Povm build_binary_spade(double sigma, double xi, double center, const Grid& grid) {
    if (sigma <= 0 || xi <= 0) throw std::invalid_argument("binary spade: widths must be positive");
    Povm p;
    p.kind = PovmKind::BinarySpade;
    p.psf = PsfModel{PsfKind::Gaussian, sigma};
    p.xi = xi;
    p.centroids = {center};
    p.grid = grid;
    const PsfModel mode_shape{PsfKind::Gaussian, xi};
    ModeFunction m;
    m.grid = grid;
    m.values.resize(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i)
        m.values[i] = eval_psf(mode_shape, grid.points[i] - center);
    p.outcomes.push_back(projector(std::move(m), 1.0, "P_0"));
    return p; // sink realizes the complement projector P_1
}

Povm build_spade_single(const PsfModel& psf, double centroid, double size, int l_max,
                        const Grid& grid) {
    if (l_max < 0) throw std::invalid_argument("spade: l_max must be nonnegative");
    std::vector<OrthoBasis> bases = per_source_bases(psf, {centroid}, size, l_max, grid);
    OrthoBasis& basis = bases.front();
    Povm p;
    p.kind = PovmKind::SpadeSingle;
    p.psf = psf;
    p.centroids = {centroid};
    p.source_size = size;
    p.l_max = l_max;
    p.grid = grid;
    p.outcomes.push_back(projector(basis.modes[0], 0.5, "P_0"));
    for (int l = 0; l < l_max; ++l)
        for (double sgn : {1.0, -1.0})
            p.outcomes.push_back(projector(pair_mode(basis.modes[l], basis.modes[l + 1], sgn), 0.5,
                                           "P_{" + std::to_string(l) + (sgn > 0 ? ",+}" : ",-}")));
    p.basis = std::move(basis);
    return p;
}

Povm build_separate_spade(const PsfModel& psf, const std::vector<double>& centroids, double size,
                          int l_max, const Grid& grid) {
    if (centroids.empty()) throw std::invalid_argument("spade: need at least one source");
    if (l_max < 0) throw std::invalid_argument("spade: l_max must be nonnegative");
    const int q_count = static_cast<int>(centroids.size());
    std::vector<OrthoBasis> bases = per_source_bases(psf, centroids, size, l_max, grid);
    Povm p;
    p.kind = PovmKind::SeparateSpade;
    p.psf = psf;
    p.centroids = centroids;
    p.source_size = size;
    p.l_max = l_max;
    p.grid = grid;
    const double w = 1.0 / (2.0 * q_count);
    for (int q = 0; q < q_count; ++q)
        p.outcomes.push_back(
            projector(bases[q].modes[0], w, "b_{" + std::to_string(q + 1) + ",0}"));
    for (int l = 0; l < l_max; ++l)
        for (int q = 0; q < q_count; ++q)
            for (double sgn : {1.0, -1.0})
                p.outcomes.push_back(
                    projector(pair_mode(bases[q].modes[l], bases[q].modes[l + 1], sgn), w,
                              "phi_{" + std::to_string(q + 1) + "," + std::to_string(l) +
                                  (sgn > 0 ? ",+}" : ",-}")));
    return p;
}

Povm build_orthogonalized_spade(const PsfModel& psf, const std::vector<double>& centroids,
                                double size, int l_max, const Grid& grid) {
    if (centroids.empty()) throw std::invalid_argument("spade: need at least one source");
    if (l_max < 0) throw std::invalid_argument("spade: l_max must be nonnegative");
    const int q_count = static_cast<int>(centroids.size());
    std::vector<ModeFunction> raw;
    raw.reserve(static_cast<std::size_t>(l_max + 1) * q_count);
    for (int n = 0; n <= l_max; ++n)
        for (double u : centroids) raw.push_back(derivative_mode(psf, n, u, size, grid));
    OrthoBasis basis = gram_schmidt_joint(raw, q_count);
    if (basis.levels() != l_max + 1)
        throw std::runtime_error("spade: joint basis truncated before reaching l_max");
    Povm p;
    p.kind = PovmKind::OrthogonalizedSpade;
    p.psf = psf;
    p.centroids = centroids;
    p.source_size = size;
    p.l_max = l_max;
    p.grid = grid;
    for (int j = 1; j <= q_count; ++j)
        p.outcomes.push_back(
            projector(basis.modes[basis.index_of(0, j)], 0.5, "b_" + std::to_string(j) + "^(0)"));
    for (int l = 0; l < l_max; ++l)
        for (int j = 1; j <= q_count; ++j)
            for (double sgn : {1.0, -1.0})
                p.outcomes.push_back(projector(
                    pair_mode(basis.modes[basis.index_of(l, j)],
                              basis.modes[basis.index_of(l + 1, j)], sgn),
                    0.5,
                    "phi_{" + std::to_string(j) + (sgn > 0 ? ",+}^(" : ",-}^(") +
                        std::to_string(l) + ")"));
    p.basis = std::move(basis);
    return p;
}

Eigen::MatrixXd exact_probability_kernel(const Povm& povm, const std::vector<double>& positions) {
    const int n_pos = static_cast<int>(positions.size());
    const int n_out = static_cast<int>(povm.outcomes.size());
    Eigen::MatrixXd kernel(povm.n_probs(), n_pos);

    // weighted projector-mode matrix: one dot product with the psi profile per position
    std::vector<int> proj_rows;
    for (int j = 0; j < n_out; ++j)
        if (povm.outcomes[j].kind == OutcomeSpec::Kind::Projector) proj_rows.push_back(j);
    Eigen::MatrixXd wmodes;
    if (!proj_rows.empty()) {
        const Grid& g = povm.grid;
        if (g.n_points == 0) throw std::runtime_error("povm: projector outcomes without a grid");
        wmodes.resize(static_cast<int>(proj_rows.size()), g.n_points);
        for (std::size_t r = 0; r < proj_rows.size(); ++r)
            wmodes.row(static_cast<int>(r)) =
                (povm.outcomes[proj_rows[r]].mode.values.array() * g.weights.array()).matrix();
    }

    Eigen::VectorXd psi;
    for (int s = 0; s < n_pos; ++s) {
        const double u = positions[s];
        if (!proj_rows.empty()) {
            const Grid& g = povm.grid;
            psi.resize(g.n_points);
            for (int i = 0; i < g.n_points; ++i) psi[i] = eval_psf(povm.psf, g.points[i] - u);
            const Eigen::VectorXd amps = wmodes * psi;
            for (std::size_t r = 0; r < proj_rows.size(); ++r) {
                const int j = proj_rows[r];
                kernel(j, s) = povm.outcomes[j].weight * amps[static_cast<int>(r)] *
                               amps[static_cast<int>(r)];
            }
        }
        for (int j = 0; j < n_out; ++j) {
            const auto& o = povm.outcomes[j];
            if (o.kind != OutcomeSpec::Kind::Pixel) continue;
            kernel(j, s) = o.weight * pixel_integral(o.pixel_lo, o.pixel_hi, povm.psf.sigma,
                                                     [&](double v) {
                                                         const double a = eval_psf(povm.psf, v - u);
                                                         return a * a;
                                                     });
        }
        if (povm.has_sink) {
            KahanSum acc;
            for (int j = 0; j < n_out; ++j) acc.add(kernel(j, s));
            // the true residual is nonnegative; strip quadrature noise
            kernel(n_out, s) = std::max(0.0, 1.0 - acc.value());
        }
    }
    return kernel;
}

Eigen::VectorXd exact_probabilities(const Povm& povm, const Scene& scene) {
    return exact_probability_kernel(povm, scene.positions()) * scene.intensities();
}

Eigen::VectorXd moment_probabilities(const CoeffTensor& tensor, const MomentVector& x,
                                     double alpha) {
    if (!(alpha > 0)) throw std::invalid_argument("moment probabilities: alpha must be positive");
    if (x.n_sources() != tensor.n_sources())
        throw std::invalid_argument("moment probabilities: source count mismatch");
    if (x.max_order() < tensor.max_order)
        throw std::invalid_argument("moment probabilities: moment vector shorter than tensor order");
    Eigen::VectorXd p(tensor.n_probs());
    Eigen::VectorXd alpha_pow(tensor.max_order + 1);
    alpha_pow[0] = 1.0;
    for (int n = 1; n <= tensor.max_order; ++n) alpha_pow[n] = alpha_pow[n - 1] * alpha;
    for (int j = 0; j < tensor.n_probs(); ++j) {
        KahanSum acc;
        for (int q = 0; q < tensor.n_sources(); ++q)
            for (int n = 0; n <= tensor.max_order; ++n)
                acc.add(tensor.c[j](q, n) * x.x(q, n) * alpha_pow[n]);
        p[j] = acc.value();
    }
    return p;
}

namespace {

void check_geometry_match(const Povm& povm, const std::vector<SourceGeometry>& sources) {
    if (static_cast<int>(sources.size()) != povm.n_sources())
        throw std::invalid_argument("coefficient tensor: source count differs from the build");
    for (std::size_t q = 0; q < sources.size(); ++q) {
        if (std::abs(sources[q].centroid - povm.centroids[q]) > 1e-9)
            throw std::invalid_argument("coefficient tensor: centroid differs from the build");
        if (std::abs(sources[q].size - povm.source_size) > 1e-9)
            throw std::invalid_argument("coefficient tensor: source size differs from the build");
    }
}

} // namespace

CoeffTensor coefficient_tensor(const Povm& povm, const std::vector<SourceGeometry>& sources,
                               int max_order) {
    if (sources.empty()) throw std::invalid_argument("coefficient tensor: no sources");
    if (max_order < 0 || max_order > kMaxDerivativeOrder)
        throw std::invalid_argument("coefficient tensor: order beyond stability limit");
    const double size = sources.front().size;
    if (size <= 0) throw std::invalid_argument("coefficient tensor: size must be positive");
    for (const auto& s : sources)
        if (std::abs(s.size - size) > 1e-12)
            throw std::invalid_argument("coefficient tensor: per-source sizes must match");
    if (povm.kind == PovmKind::SpadeSingle || povm.kind == PovmKind::SeparateSpade ||
        povm.kind == PovmKind::OrthogonalizedSpade)
        check_geometry_match(povm, sources);

    const int q_count = static_cast<int>(sources.size());
    const int n_out = static_cast<int>(povm.outcomes.size());
    CoeffTensor tensor;
    tensor.alpha_ref = size / povm.psf.sigma;
    tensor.max_order = max_order;
    tensor.c.assign(static_cast<std::size_t>(povm.n_probs()),
                    Eigen::MatrixXd::Zero(q_count, max_order + 1));

    Eigen::VectorXd inv_alpha_pow(max_order + 1);
    inv_alpha_pow[0] = 1.0;
    for (int n = 1; n <= max_order; ++n) inv_alpha_pow[n] = inv_alpha_pow[n - 1] / tensor.alpha_ref;

    // per-source expansion coefficients t_m; P_j contributions are products t_m t_{N-m}
    for (int q = 0; q < q_count; ++q) {
        const SourceGeometry& src = sources[q];
        std::vector<ModeFunction> dmodes;
        if (povm.grid.n_points > 0) {
            dmodes.reserve(static_cast<std::size_t>(max_order) + 1);
            for (int m = 0; m <= max_order; ++m)
                dmodes.push_back(derivative_mode(povm.psf, m, src.centroid, src.size, povm.grid));
        }
        for (int j = 0; j < n_out; ++j) {
            const auto& o = povm.outcomes[j];
            if (o.kind == OutcomeSpec::Kind::Projector) {
                Eigen::VectorXd t(max_order + 1);
                for (int m = 0; m <= max_order; ++m) t[m] = inner_product(o.mode, dmodes[m]);
                for (int n = 0; n <= max_order; ++n) {
                    KahanSum acc;
                    for (int m = 0; m <= n; ++m) acc.add(t[m] * t[n - m]);
                    tensor.c[j](q, n) = o.weight * acc.value() * inv_alpha_pow[n];
                }
            } else {
                // pixel integrals of products of derivative modes
                Eigen::MatrixXd prod = Eigen::MatrixXd::Zero(max_order + 1, max_order + 1);
                for (int m = 0; m <= max_order; ++m)
                    for (int n = m; n <= max_order; ++n) {
                        prod(m, n) = pixel_integral(
                            o.pixel_lo, o.pixel_hi, povm.psf.sigma, [&](double v) {
                                return derivative_mode_value(povm.psf, m, src.centroid, src.size,
                                                             v) *
                                       derivative_mode_value(povm.psf, n, src.centroid, src.size,
                                                             v);
                            });
                        prod(n, m) = prod(m, n);
                    }
                for (int n = 0; n <= max_order; ++n) {
                    KahanSum acc;
                    for (int m = 0; m <= n; ++m) acc.add(prod(m, n - m));
                    tensor.c[j](q, n) = o.weight * acc.value() * inv_alpha_pow[n];
                }
            }
        }
    }
    if (povm.has_sink) {
        const std::size_t sink = static_cast<std::size_t>(povm.n_probs()) - 1;
        for (int q = 0; q < q_count; ++q)
            for (int n = 0; n <= max_order; ++n) {
                KahanSum acc;
                for (int j = 0; j < n_out; ++j) acc.add(tensor.c[j](q, n));
                tensor.c[sink](q, n) = (n == 0 ? 1.0 : 0.0) - acc.value();
            }
    }
    return tensor;
}

std::string povm_to_json(const Povm& povm) {
    nlohmann::json j;
    j["kind"] = povm_kind_name(povm.kind);
    j["sigma"] = povm.psf.sigma;
    j["has_sink"] = povm.has_sink;
    j["labels"] = povm.labels();
    std::vector<double> weights;
    for (const auto& o : povm.outcomes) weights.push_back(o.weight);
    j["weights"] = weights;
    if (povm.kind == PovmKind::DirectImaging) {
        j["pixel_edges"] = povm.pixel_edges;
    } else {
        j["centroids"] = povm.centroids;
        j["grid"] = {{"lo", povm.grid.lo}, {"hi", povm.grid.hi}, {"n_points", povm.grid.n_points}};
    }
    if (povm.kind == PovmKind::BinarySpade) j["xi"] = povm.xi;
    if (povm.kind == PovmKind::SpadeSingle || povm.kind == PovmKind::SeparateSpade ||
        povm.kind == PovmKind::OrthogonalizedSpade) {
        j["source_size"] = povm.source_size;
        j["l_max"] = povm.l_max;
    }
    if (povm.basis) {
        const auto& table = povm.basis->overlap_table;
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < table.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(table.cols()));
            for (Eigen::Index c = 0; c < table.cols(); ++c) row[static_cast<std::size_t>(c)] = table(r, c);
            rows.push_back(row);
        }
        j["basis_overlap_table"] = rows;
    }
    return j.dump(2);
}

} // namespace recimaging
