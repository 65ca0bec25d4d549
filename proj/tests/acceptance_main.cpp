// Acceptance gate: runs the shipped experiment configurations end to end and
// checks the quantitative claims the library is built around. One line per
// criterion; exits nonzero if any fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "recimaging/discrim.hpp"
#include "recimaging/experiment.hpp"
#include "recimaging/learn.hpp"
#include "recimaging/modes.hpp"
#include "recimaging/povm.hpp"
#include "recimaging/rec.hpp"
#include "recimaging/sampling.hpp"
#include "recimaging/scene.hpp"
#include "recimaging/util.hpp"

using namespace recimaging;
namespace fs = std::filesystem;

namespace {

// --- tiny csv reader (files produced by CsvFile) ---------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::runtime_error("csv: no column named " + name);
    }
    double num(std::size_t row, int column) const {
        return std::stod(rows[row][static_cast<std::size_t>(column)]);
    }
    const std::string& text(std::size_t row, int column) const {
        return rows[row][static_cast<std::size_t>(column)];
    }
};

Table read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    std::string line;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header_done) {
            t.header = cells;
            header_done = true;
        } else {
            t.rows.push_back(cells);
        }
    }
    if (!header_done) throw std::runtime_error("empty csv: " + path.string());
    return t;
}

// --- checking scaffold ------------------------------------------------------

struct Check {
    std::vector<std::string> errors;

    void require(bool ok, const std::string& what) {
        if (!ok) errors.push_back(what);
    }
    void close_rel(double got, double want, double tol, const std::string& what) {
        const double rel = std::abs(got - want) / std::abs(want);
        if (!(rel <= tol)) {
            std::ostringstream os;
            os << what << ": got " << got << ", want " << want << " (rel err " << rel << " > "
               << tol << ")";
            errors.push_back(os.str());
        }
    }
    void close_abs(double got, double want, double tol, const std::string& what) {
        const double diff = std::abs(got - want);
        if (!(diff <= tol)) {
            std::ostringstream os;
            os << what << ": got " << got << ", want " << want << " (abs err " << diff << " > "
               << tol << ")";
            errors.push_back(os.str());
        }
    }
    void in_band(double got, double center, double half, const std::string& what) {
        close_abs(got, center, half, what);
    }
};

struct Criterion {
    int id;
    std::string name;
    double time_limit;
    std::function<void(Check&)> body;
};

fs::path out_root;

// Merge, validate, run, and return (merged config, output dir).
std::pair<Json, fs::path> run_scenario(Json user, const std::string& tag) {
    const fs::path dir = out_root / tag;
    user["output_dir"] = dir.string();
    const Json merged = merged_with_defaults(user);
    const auto problems = validate_config(merged);
    if (!problems.empty()) {
        std::string msg = "configuration rejected:";
        for (const auto& p : problems) msg += " [" + p + "]";
        throw std::runtime_error(msg);
    }
    run_experiment(merged);
    return {merged, dir};
}

// The uniform-prior pipeline the scaling scenarios use, rebuilt from public
// pieces with the same stage seed, so spectra can be inspected directly.
struct BuiltSpectrum {
    std::string label;
    Eigen::VectorXd D;
    Eigen::MatrixXd G;
    RecSpectrum spectrum;
    PriorEnsemble ensemble;
};

std::vector<double> spread_centroids(double interval, int q) {
    std::vector<double> c(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) c[static_cast<std::size_t>(i)] = -interval / 2.0 + interval * (i + 0.5) / q;
    return c;
}

BuiltSpectrum build_uniform_prior_spectrum(const std::string& method, double sigma,
                                           const std::vector<double>& centroids, double size,
                                           int n_max, int w_scenes, int l_max, int t_max,
                                           std::uint64_t seed, const std::string& label) {
    MeasurementGeometry geom;
    geom.method = method_from_name(method);
    geom.psf = PsfModel{.sigma = sigma};
    geom.centroids = centroids;
    geom.source_size = size;
    geom.l_max = l_max;
    geom.t_max = t_max;
    const Povm povm = make_povm(geom);

    SceneGeneratorConfig gen;
    gen.centroids = centroids;
    gen.sizes.assign(centroids.size(), size);
    gen.n_max = n_max;
    std::mt19937_64 rng(derive_seed(seed, 0));
    std::vector<Scene> scenes;
    for (int w = 0; w < w_scenes; ++w) scenes.push_back(generate_uniform_random_scene(gen, rng));

    const std::vector<double> positions = scenes.front().positions();
    const Eigen::MatrixXd kernel = exact_probability_kernel(povm, positions);
    BuiltSpectrum out;
    out.label = label;
    for (const Scene& s : scenes) out.ensemble.prob_vectors.push_back(kernel * s.intensities());
    build_dg(out.ensemble, out.D, out.G);
    out.spectrum = solve_spectrum(out.D, out.G);
    return out;
}

// Every (method, alpha, geometry) combination the scaling criteria execute.
std::vector<BuiltSpectrum> scaling_run_spectra() {
    std::vector<BuiltSpectrum> out;
    const Json c4 = merged_with_defaults(Json{{"scenario", "single-source"}});
    for (const auto& method : c4.at("methods"))
        for (const auto& alpha : c4.at("alpha_list")) {
            const double a = alpha.get<double>();
            out.push_back(build_uniform_prior_spectrum(
                method.get<std::string>(), 1.0, {0.0}, a, c4.at("n_max").get<int>(),
                c4.at("w_scenes").get<int>(), c4.at("l_max").get<int>(), c4.at("t_max").get<int>(),
                c4.at("seed").get<std::uint64_t>(),
                "single-source " + method.get<std::string>() + " alpha=" + CsvFile::num(a)));
        }

    Json c5user = Json{{"scenario", "multi-source"}};
    c5user["alpha_list"] = {0.0631, 0.0741, 0.0851, 0.1};
    const Json c5 = merged_with_defaults(c5user);
    for (const auto& method : c5.at("methods"))
        for (const auto& interval : c5.at("interval_list"))
            for (const auto& alpha : c5.at("alpha_list")) {
                const double L = interval.get<double>();
                const double a = alpha.get<double>();
                const int q = c5.at("q").get<int>();
                out.push_back(build_uniform_prior_spectrum(
                    method.get<std::string>(), 1.0, spread_centroids(L, q), a,
                    c5.at("n_max").get<int>(), c5.at("w_scenes").get<int>(),
                    c5.at("l_max").get<int>(), c5.at("t_max").get<int>(),
                    c5.at("seed").get<std::uint64_t>(),
                    "multi-source " + method.get<std::string>() + " L=" + CsvFile::num(L) +
                        " alpha=" + CsvFile::num(a)));
            }

    out.push_back(build_uniform_prior_spectrum("spade", 1.0, {0.0}, 0.01, 20, 50, 2, 50, 1,
                                               "capacity-curve spade alpha=0.01"));
    return out;
}

// --- criteria ---------------------------------------------------------------

void criterion_two_point(Check& c) {
    const auto [cfg, dir] = run_scenario(Json{{"scenario", "two-point"}}, "two-point");
    const Table beta = read_csv(dir / "beta.csv");
    const int gamma_col = beta.col("gamma");
    const int beta_col = beta.col("beta1_sq");
    const int series_col = beta.col("series");
    const int d00_col = beta.col("d00");
    const int censored_col = beta.col("censored");

    const std::map<double, double> oracle = {{0.05, 3200.7499609481771},
                                             {0.1, 800.7498439206395},
                                             {0.2, 200.74937771789093}};
    std::size_t matched = 0;
    for (std::size_t r = 0; r < beta.rows.size(); ++r) {
        const double gamma = beta.num(r, gamma_col);
        const auto it = oracle.find(gamma);
        if (it == oracle.end()) continue;
        ++matched;
        c.require(beta.text(r, censored_col) == "0",
                  "gamma=" + beta.text(r, gamma_col) + ": first task unexpectedly censored");
        c.close_rel(beta.num(r, beta_col), it->second, 1e-4,
                    "beta1^2 at gamma=" + beta.text(r, gamma_col));
        if (gamma == 0.05)
            c.close_rel(beta.num(r, series_col), it->second, 1e-2, "series estimate at gamma=0.05");
        if (gamma == 0.1)
            c.close_rel(beta.num(r, d00_col), 0.99937558532781526, 1e-8, "D00 at gamma=0.1");
    }
    c.require(matched == 3, "expected rows for gamma in {0.05, 0.1, 0.2}");
}

void criterion_overlap_table(Check& c) {
    const double alpha = 0.1;
    const PsfModel psf{.sigma = 1.0};
    const Grid grid = default_grid({0.0}, 1.0);
    std::vector<ModeFunction> raw;
    for (int n = 0; n <= 4; ++n) raw.push_back(derivative_mode(psf, n, 0.0, alpha, grid));
    const OrthoBasis basis = gram_schmidt_single(raw);
    const Eigen::MatrixXd& a = basis.overlap_table;

    const double a2 = alpha * alpha, a3 = a2 * alpha, a4 = a3 * alpha;
    const std::vector<std::tuple<int, int, double>> expected = {
        {0, 0, 1.0},
        {1, 1, alpha / 2.0},
        {2, 0, -a2 / 8.0},
        {2, 2, a2 / (4.0 * std::sqrt(2.0))},
        {3, 1, -a3 / 16.0},
        {3, 3, a3 / (8.0 * std::sqrt(6.0))},
        {4, 0, a4 / 128.0},
        {4, 2, -a4 / (32.0 * std::sqrt(2.0))},
        {4, 4, a4 / (32.0 * std::sqrt(6.0))}};
    for (const auto& [m, l, want] : expected)
        c.close_rel(a(m, l), want, 1e-8,
                    "a(" + std::to_string(m) + "," + std::to_string(l) + ")");
}

void criterion_joint_modes(Check& c) {
    const PsfModel psf{.sigma = 1.0};
    const Grid grid = default_grid({-0.5, 0.5}, 1.0);
    std::vector<ModeFunction> raw = {derivative_mode(psf, 0, -0.5, 0.1, grid),
                                     derivative_mode(psf, 0, 0.5, 0.1, grid)};
    const OrthoBasis basis = gram_schmidt_joint(raw, 2);
    Eigen::Matrix2d gram;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) gram(i, j) = inner_product(raw[i], raw[j]);
    const Eigen::Vector2d overlaps(basis.overlap_table(0, 1), basis.overlap_table(1, 1));
    const Eigen::Vector2d p = gram.inverse() * overlaps;

    const double p2 = 1.0 / std::sqrt(1.0 - std::exp(-0.25));
    const double p1 = -std::exp(-0.125) * p2;
    c.close_abs(p[0], p1, 1e-6, "first superposition coefficient");
    c.close_abs(p[1], p2, 1e-6, "second superposition coefficient");
}

std::map<std::pair<std::string, int>, double> slope_map(const Table& slopes) {
    std::map<std::pair<std::string, int>, double> m;
    const int method_col = slopes.col("method");
    const int k_col = slopes.col("k");
    const int slope_col = slopes.col("slope");
    for (std::size_t r = 0; r < slopes.rows.size(); ++r)
        m[{slopes.text(r, method_col), static_cast<int>(slopes.num(r, k_col))}] =
            slopes.num(r, slope_col);
    return m;
}

void criterion_single_source_scaling(Check& c) {
    const auto [cfg, dir] = run_scenario(Json{{"scenario", "single-source"}}, "single-source");
    const auto slopes = slope_map(read_csv(dir / "slopes.csv"));
    const auto expect = [&](const std::string& method, int k, double want) {
        const auto it = slopes.find({method, k});
        if (it == slopes.end()) {
            c.errors.push_back(method + " task " + std::to_string(k) + ": no fitted slope");
            return;
        }
        c.in_band(it->second, want, 0.3, method + " task " + std::to_string(k) + " slope");
    };
    expect("direct", 1, -2.0);
    expect("direct", 2, -4.0);
    expect("spade", 1, -2.0);
    expect("spade", 2, -2.0);
    expect("spade", 3, -4.0);
    expect("spade", 4, -4.0);
}

void criterion_multi_source_scaling(Check& c) {
    Json user = Json{{"scenario", "multi-source"}};
    // the resolvable window: lambda's floor censors the steep tasks below
    // alpha ~ 0.06, so the fit grid sits in the upper decade
    user["alpha_list"] = {0.0631, 0.0741, 0.0851, 0.1};
    const auto [cfg, dir] = run_scenario(user, "multi-source");
    const Table table = read_csv(dir / "slopes.csv");
    const int method_col = table.col("method");
    const int interval_col = table.col("interval");
    const int k_col = table.col("k");
    const int slope_col = table.col("slope");

    std::map<std::tuple<std::string, double, int>, double> slopes;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        slopes[{table.text(r, method_col), table.num(r, interval_col),
                static_cast<int>(table.num(r, k_col))}] = table.num(r, slope_col);

    const auto fetch = [&](const std::string& method, double L, int k, bool* ok) -> double {
        const auto it = slopes.find({method, L, k});
        if (it == slopes.end()) {
            c.errors.push_back(method + " L=" + CsvFile::num(L) + " task " + std::to_string(k) +
                               ": no fitted slope");
            *ok = false;
            return 0.0;
        }
        *ok = true;
        return it->second;
    };

    // tight geometry: tasks 2..5 (the first four beyond the constant-plus-tilt
    // pair) all scale as alpha^-2 when the pair basis is orthogonalized
    for (int k = 2; k <= 5; ++k) {
        bool ok = false;
        const double s = fetch("orthogonalized-spade", 2.0, k, &ok);
        if (ok) c.in_band(s, -2.0, 0.3, "orthogonalized L=2 task " + std::to_string(k) + " slope");
    }
    // per-source modes leave only two quadratic tasks; the next two are steeper
    for (int k = 2; k <= 3; ++k) {
        bool ok = false;
        const double s = fetch("separate-spade", 2.0, k, &ok);
        if (ok) c.in_band(s, -2.0, 0.3, "separate L=2 task " + std::to_string(k) + " slope");
    }
    for (int k = 4; k <= 5; ++k) {
        bool ok = false;
        const double s = fetch("separate-spade", 2.0, k, &ok);
        if (ok)
            c.require(s < -3.0, "separate L=2 task " + std::to_string(k) +
                                    " slope should fall below -3, got " + CsvFile::num(s));
    }
    // wide geometry: the two constructions coincide
    for (int k = 2; k <= 5; ++k) {
        bool ok1 = false, ok2 = false;
        const double sep = fetch("separate-spade", 20.0, k, &ok1);
        const double orth = fetch("orthogonalized-spade", 20.0, k, &ok2);
        if (ok1 && ok2)
            c.close_abs(sep, orth, 0.2, "L=20 task " + std::to_string(k) + " separate vs orth");
    }
}

void criterion_capacity_curve(Check& c) {
    Json user = Json{{"scenario", "single-source"}};
    user["methods"] = {"spade"};
    user["alpha_list"] = {0.01};
    const auto [cfg, dir] = run_scenario(user, "capacity-curve");
    const Table ct = read_csv(dir / "ct.csv");
    const int s_col = ct.col("S");
    const int ct_col = ct.col("C_T");

    std::vector<std::pair<double, double>> curve;
    for (std::size_t r = 0; r < ct.rows.size(); ++r)
        curve.emplace_back(ct.num(r, s_col), ct.num(r, ct_col));
    std::sort(curve.begin(), curve.end());
    c.require(!curve.empty(), "no capacity rows produced");
    if (curve.empty()) return;

    for (std::size_t i = 1; i < curve.size(); ++i)
        c.require(curve[i].second >= curve[i - 1].second - 1e-12,
                  "C_T not monotone at S=" + CsvFile::num(curve[i].first));

    bool have_s1 = false;
    for (const auto& [s, v] : curve)
        if (std::abs(s - 1.0) < 1e-12) {
            have_s1 = true;
            c.require(v >= 1.0 - 1e-6, "C_T(1) = " + CsvFile::num(v) + " below 1 - 1e-6");
        }
    c.require(have_s1, "no S=1 row");

    // longest consecutive run of grid points with |C_T - 3| <= 0.15 must span
    // at least one decade of S
    double best_span = 0.0;
    std::size_t i = 0;
    while (i < curve.size()) {
        if (std::abs(curve[i].second - 3.0) > 0.15) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < curve.size() && std::abs(curve[j + 1].second - 3.0) <= 0.15) ++j;
        best_span = std::max(best_span, curve[j].first / curve[i].first);
        i = j + 1;
    }
    c.require(best_span >= 10.0, "plateau near 3 spans only a factor " + CsvFile::num(best_span));

    const Table check = read_csv(dir / "ct_check.csv");
    const int cs = check.col("C_T");
    const int tr = check.col("C_T_trace");
    for (std::size_t r = 0; r < check.rows.size(); ++r)
        c.close_abs(check.num(r, cs), check.num(r, tr), 1e-8,
                    "trace form at S=" + check.text(r, check.col("S")));
}

void criterion_spectrum_properties(Check& c) {
    for (const BuiltSpectrum& b : scaling_run_spectra()) {
        const RecSpectrum& s = b.spectrum;
        c.require(s.beta_sq[0] < 1e-8,
                  b.label + ": beta0^2 = " + CsvFile::num(s.beta_sq[0]) + " not < 1e-8");

        const Eigen::VectorXd r0 = s.R.col(0);
        const double mean = r0.mean();
        const double dev = (r0.array() - mean).abs().maxCoeff() / std::abs(mean);
        c.require(dev < 1e-6, b.label + ": constant task deviates by " + CsvFile::num(dev));

        const Eigen::MatrixXd gram = s.R.transpose() * s.d.asDiagonal() * s.R;
        const double err =
            (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
        c.require(err < 1e-8, b.label + ": task normalization off by " + CsvFile::num(err));
    }
}

void criterion_prior_invariance(Check& c) {
    const BuiltSpectrum base = build_uniform_prior_spectrum("spade", 1.0, {0.0}, 0.01, 20, 50, 2,
                                                            50, 1, "reference");
    const auto compare_spectra = [&](const RecSpectrum& got, const std::string& tag) {
        if (got.n_tasks() != base.spectrum.n_tasks()) {
            c.errors.push_back(tag + ": task count changed");
            return;
        }
        for (int k = 0; k < got.n_tasks(); ++k) {
            const double a = base.spectrum.beta_sq[k], b = got.beta_sq[k];
            if (a >= kBetaCutoff || b >= kBetaCutoff) {
                c.require(a == b, tag + ": censoring pattern changed at task " + std::to_string(k));
            } else {
                // compare retention eigenvalues: beta^2 = (1-lambda)/lambda amplifies
                // solver noise without bound as lambda approaches the floor
                const double la = 1.0 / (1.0 + a), lb = 1.0 / (1.0 + b);
                c.close_abs(lb, la, 1e-12, tag + ": eigenvalue of task " + std::to_string(k));
            }
        }
    };

    // scene order
    PriorEnsemble shuffled = base.ensemble;
    std::mt19937_64 rng(99);
    std::shuffle(shuffled.prob_vectors.begin(), shuffled.prob_vectors.end(), rng);
    Eigen::VectorXd D2;
    Eigen::MatrixXd G2;
    build_dg(shuffled, D2, G2);
    c.require((base.D - D2).cwiseAbs().maxCoeff() <= 1e-12, "shuffled: D moved");
    c.require((base.G - G2).cwiseAbs().maxCoeff() <= 1e-12, "shuffled: G moved");
    compare_spectra(solve_spectrum(D2, G2), "shuffled");

    // duplication
    PriorEnsemble doubled = base.ensemble;
    for (const auto& p : base.ensemble.prob_vectors) doubled.prob_vectors.push_back(p);
    build_dg(doubled, D2, G2);
    c.require((base.D - D2).cwiseAbs().maxCoeff() <= 1e-12, "duplicated: D moved");
    c.require((base.G - G2).cwiseAbs().maxCoeff() <= 1e-12, "duplicated: G moved");
    compare_spectra(solve_spectrum(D2, G2), "duplicated");

    // outcome relabeling
    const int n = base.ensemble.n_probs();
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) perm[static_cast<std::size_t>(j)] = j;
    std::shuffle(perm.begin(), perm.end(), rng);
    PriorEnsemble relabeled;
    for (const auto& p : base.ensemble.prob_vectors) {
        Eigen::VectorXd q(n);
        for (int j = 0; j < n; ++j) q[j] = p[perm[static_cast<std::size_t>(j)]];
        relabeled.prob_vectors.push_back(q);
    }
    build_dg(relabeled, D2, G2);
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(D2[j] - base.D[perm[static_cast<std::size_t>(j)]]));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            worst = std::max(worst, std::abs(G2(i, j) - base.G(perm[static_cast<std::size_t>(i)],
                                                               perm[static_cast<std::size_t>(j)])));
    c.require(worst <= 1e-12, "relabeled: permuted statistics moved by " + CsvFile::num(worst));
    compare_spectra(solve_spectrum(D2, G2), "relabeled");

    c.require(reparameterization_check(base.ensemble), "built-in reparameterization check");
}

void criterion_sampler(Check& c) {
    // exact totals over a spread of sizes
    std::mt19937_64 rng(2026);
    for (std::int64_t S : {std::int64_t(1), std::int64_t(1000), std::int64_t(12345678),
                           std::int64_t(10000000000)}) {
        Eigen::VectorXd p(17);
        for (int j = 0; j < p.size(); ++j) p[j] = 0.01 + u01(rng);
        p /= p.sum();
        const CountVector cv = sample_counts(p, S, rng);
        std::int64_t sum = 0;
        for (std::int64_t v : cv.counts) sum += v;
        c.require(sum == S, "counts for S=" + std::to_string(S) + " sum to " + std::to_string(sum));
    }

    // a detector with 100 outcomes at S = 1e10, in under a second
    Eigen::VectorXd p100(100);
    for (int j = 0; j < 100; ++j) p100[j] = 0.2 + u01(rng);
    p100 /= p100.sum();
    const auto t0 = std::chrono::steady_clock::now();
    const CountVector big = sample_counts(p100, 10000000000LL, rng);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::int64_t sum = 0;
    for (std::int64_t v : big.counts) sum += v;
    c.require(sum == 10000000000LL, "1e10-photon draw lost photons");
    c.require(secs < 1.0, "1e10-photon draw took " + CsvFile::num(secs) + "s");

    // multinomial calibration: per-seed Pearson statistic, 10 cells, S = 1e3;
    // the 0.001 critical value of chi-square with df 9 is 27.877164871257
    Eigen::VectorXd p10(10);
    for (int j = 0; j < 10; ++j) p10[j] = 1.0 + u01(rng);
    p10 /= p10.sum();
    int exceedances = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 draw_rng(derive_seed(505, seed));
        const CountVector cv = sample_counts(p10, 1000, draw_rng);
        double x2 = 0.0;
        for (int j = 0; j < 10; ++j) {
            const double expected = 1000.0 * p10[j];
            const double diff = static_cast<double>(cv.counts[static_cast<std::size_t>(j)]) - expected;
            x2 += diff * diff / expected;
        }
        if (x2 > 27.877164871257) ++exceedances;
    }
    c.require(exceedances <= 2, "goodness-of-fit exceeded the 0.001 critical value " +
                                    std::to_string(exceedances) + " times in 100 seeds");
}

void criterion_discrimination(Check& c) {
    const auto [cfg, dir] = run_scenario(Json{{"scenario", "discriminate"}}, "discriminate");
    const Table slopes = read_csv(dir / "slopes.csv");
    const int method_col = slopes.col("method");
    const int slope_col = slopes.col("slope");
    bool saw_direct = false, saw_spade = false;
    for (std::size_t r = 0; r < slopes.rows.size(); ++r) {
        const std::string& method = slopes.text(r, method_col);
        const double s = slopes.num(r, slope_col);
        if (method == "direct") {
            saw_direct = true;
            c.in_band(s, 4.0, 0.4, "direct exponent-vs-separation slope");
        } else if (method == "binary-spade") {
            saw_spade = true;
            c.in_band(s, 2.0, 0.4, "binary-spade exponent-vs-separation slope");
        }
    }
    c.require(saw_direct, "no fitted slope for direct");
    c.require(saw_spade, "no fitted slope for binary-spade");

    // identical hypotheses carry no information
    MeasurementGeometry geom;
    geom.psf = PsfModel{.sigma = 1.0};
    geom.centroids = {0.0};
    geom.t_max = 50;
    const Povm povm = make_povm(geom);
    const Eigen::VectorXd p =
        sanitize_probabilities(exact_probability_kernel(povm, {0.0}).col(0));
    c.require(std::abs(chernoff_exponent(p, p)) <= 1e-12, "C(p, p) is not zero");

    // deterministic vs fair coin: C = log 2 exactly
    Eigen::VectorXd p0(2), p1(2);
    p0 << 1.0, 0.0;
    p1 << 0.5, 0.5;
    c.close_abs(chernoff_exponent(p0, p1), std::log(2.0), 1e-8, "deterministic-vs-coin exponent");
}

void criterion_classification(Check& c) {
    // truncation sweep on the block-pattern task
    {
        const auto [cfg, dir] = run_scenario(Json{{"scenario", "classify-qr"}}, "classify-qr");
        const Table acc = read_csv(dir / "accuracy.csv");
        const int k_col = acc.col("K");
        const int s_col = acc.col("S");
        const int mean_col = acc.col("mean");
        std::map<double, std::vector<std::pair<int, double>>> by_s;
        for (std::size_t r = 0; r < acc.rows.size(); ++r)
            by_s[acc.num(r, s_col)].push_back(
                {static_cast<int>(acc.num(r, k_col)), acc.num(r, mean_col)});

        int last_peak = -1;
        double last_s = 0.0;
        for (auto& [s, rows] : by_s) {
            std::sort(rows.begin(), rows.end());
            std::size_t arg = 0;
            for (std::size_t i = 1; i < rows.size(); ++i)
                if (rows[i].second > rows[arg].second) arg = i;
            const double peak = rows[arg].second;
            c.require(peak > rows.front().second,
                      "S=" + CsvFile::num(s) + ": accuracy does not rise before the peak");
            c.require(peak > rows.back().second,
                      "S=" + CsvFile::num(s) + ": accuracy does not fall after the peak");
            const int peak_k = rows[arg].first;
            c.require(peak_k >= last_peak, "optimal truncation dropped from " +
                                               std::to_string(last_peak) + " (S=" +
                                               CsvFile::num(last_s) + ") to " +
                                               std::to_string(peak_k) + " (S=" + CsvFile::num(s) +
                                               ")");
            last_peak = peak_k;
            last_s = s;
        }
        c.require(by_s.size() == 3, "expected three photon budgets");
    }

    // paired-batch comparison on the multi-source task
    {
        const auto [cfg, dir] =
            run_scenario(Json{{"scenario", "classify-multisource"}}, "classify-multisource");
        const Table peaks = read_csv(dir / "peaks.csv");
        const int method_col = peaks.col("method");
        const int batch_col = peaks.col("batch");
        const int peak_k_col = peaks.col("peak_k");
        const int peak_mean_col = peaks.col("peak_mean");
        const int ct_col = peaks.col("c_t");

        std::map<int, std::map<std::string, std::pair<int, double>>> by_batch;
        for (std::size_t r = 0; r < peaks.rows.size(); ++r) {
            by_batch[static_cast<int>(peaks.num(r, batch_col))][peaks.text(r, method_col)] = {
                static_cast<int>(peaks.num(r, peak_k_col)), peaks.num(r, peak_mean_col)};
            const double ct = peaks.num(r, ct_col);
            const double k = peaks.num(r, peak_k_col);
            c.require(std::abs(k - std::floor(ct)) <= 2.0,
                      peaks.text(r, method_col) + " batch " + peaks.text(r, batch_col) +
                          ": peak K " + peaks.text(r, peak_k_col) +
                          " strays from floor(C_T) = " + CsvFile::num(std::floor(ct)));
        }
        int orth_wins = 0, batches = 0;
        for (const auto& [batch, methods] : by_batch) {
            const auto d = methods.find("direct");
            const auto o = methods.find("orthogonalized-spade");
            if (d == methods.end() || o == methods.end()) {
                c.errors.push_back("batch " + std::to_string(batch) + ": missing a method");
                continue;
            }
            ++batches;
            if (o->second.second >= d->second.second) ++orth_wins;
        }
        c.require(batches == 10, "expected 10 batches, saw " + std::to_string(batches));
        c.require(orth_wins * 10 >= batches * 8,
                  "orthogonalized beat direct in only " + std::to_string(orth_wins) + "/" +
                      std::to_string(batches) + " batches");
    }
}

void criterion_gradients(Check& c) {
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TaskDataset data;
    data.n_classes = 3;
    data.features.resize(24, 4);
    for (int i = 0; i < 24; ++i) {
        for (int f = 0; f < 4; ++f) data.features(i, f) = gauss(rng);
        data.labels.push_back(i % 3);
    }
    SoftmaxHyper hyper;
    hyper.l2 = 2e-3;

    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
        Eigen::MatrixXd W(3, 4);
        Eigen::VectorXd b(3);
        for (int cls = 0; cls < 3; ++cls) {
            for (int f = 0; f < 4; ++f) W(cls, f) = gauss(rng);
            b[cls] = gauss(rng);
        }
        const Eigen::VectorXd grad = softmax_objective_gradient(data, hyper, W, b);
        const double h = 1e-6;
        for (int i = 0; i < grad.size(); ++i) {
            auto value = [&](double delta) {
                Eigen::MatrixXd Ws = W;
                Eigen::VectorXd bs = b;
                if (i < 12)
                    Ws(i / 4, i % 4) += delta;
                else
                    bs[i - 12] += delta;
                return softmax_objective(data, hyper, Ws, bs);
            };
            const double fd = (value(h) - value(-h)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-8, std::abs(grad[i])));
        }
    }
    c.require(worst < 1e-5,
              "max relative gradient error " + CsvFile::num(worst) + " not below 1e-5");
}

} // namespace

int main() {
    out_root = fs::temp_directory_path() / "recimaging-acceptance";
    std::error_code ec;
    fs::remove_all(out_root, ec);
    fs::create_directories(out_root);

    const std::vector<Criterion> criteria = {
        {1, "two-point prior reproduces the exact leading task", 5.0, criterion_two_point},
        {2, "single-source overlap table matches the closed forms", 1.0, criterion_overlap_table},
        {3, "joint two-source mode recovers the exact coefficients", 1.0, criterion_joint_modes},
        {4, "single-source task scaling follows the moment hierarchy", 120.0,
         criterion_single_source_scaling},
        {5, "two-source scaling separates the pair-basis constructions", 300.0,
         criterion_multi_source_scaling},
        {6, "capacity curve is monotone, starts at 1, plateaus near 3", 60.0,
         criterion_capacity_curve},
        {7, "every scaling spectrum keeps the trivial task exact", 300.0,
         criterion_spectrum_properties},
        {8, "prior reparameterizations leave statistics and spectra fixed", 60.0,
         criterion_prior_invariance},
        {9, "photon sampler is exact, fast, and calibrated", 60.0, criterion_sampler},
        {10, "discrimination exponents scale with the measurement basis", 300.0,
         criterion_discrimination},
        {11, "optimal truncation tracks the photon budget and capacity", 900.0,
         criterion_classification},
        {12, "softmax gradients match finite differences", 30.0, criterion_gradients},
    };

    int failures = 0;
    for (const Criterion& crit : criteria) {
        Check check;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            crit.body(check);
        } catch (const std::exception& e) {
            check.errors.push_back(std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > crit.time_limit)
            check.errors.push_back("took " + CsvFile::num(secs) + "s, limit " +
                                   CsvFile::num(crit.time_limit) + "s");

        const bool pass = check.errors.empty();
        failures += pass ? 0 : 1;
        std::printf("[%2d] %s (%.2fs)  %s\n", crit.id, pass ? "PASS" : "FAIL", secs,
                    crit.name.c_str());
        for (const auto& e : check.errors) std::printf("       - %s\n", e.c_str());
        std::fflush(stdout);
    }

    std::printf("acceptance: %d/%zu criteria passed\n",
                static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
