#include "recimaging/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>

#include "recimaging/discrim.hpp"
#include "recimaging/sampling.hpp"
#include "recimaging/util.hpp"

namespace recimaging {

namespace {

std::vector<double> as_doubles(const Json& arr) {
    std::vector<double> out;
    for (const auto& e : arr) out.push_back(e.get<double>());
    return out;
}

std::vector<int> as_ints(const Json& arr) {
    std::vector<int> out;
    for (const auto& e : arr) out.push_back(e.get<int>());
    return out;
}

std::vector<std::string> as_strings(const Json& arr) {
    std::vector<std::string> out;
    for (const auto& e : arr) out.push_back(e.get<std::string>());
    return out;
}

SoftmaxHyper hyper_from(const Json& learning) {
    SoftmaxHyper h;
    h.learning_rate = learning.at("learning_rate").get<double>();
    h.l2 = learning.at("l2").get<double>();
    h.max_epochs = learning.at("max_epochs").get<int>();
    h.grad_tol = learning.at("grad_tol").get<double>();
    return h;
}

std::vector<double> equally_spaced_centroids(double interval, int q) {
    std::vector<double> c(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i)
        c[static_cast<std::size_t>(i)] = -interval / 2.0 + interval * (i + 0.5) / q;
    return c;
}

std::vector<double> s_grid_values(const Json& grid) {
    const double lo = grid.at("min_exp").get<double>();
    const double hi = grid.at("max_exp").get<double>();
    const int per_decade = grid.at("per_decade").get<int>();
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double e = lo + static_cast<double>(i) / per_decade;
        if (e > hi + 1e-12) break;
        out.push_back(std::pow(10.0, e));
    }
    return out;
}

/// Exact probability vectors for scenes sharing one emitter layout.
PriorEnsemble ensemble_from_scenes(const Povm& povm, const std::vector<Scene>& scenes) {
    if (scenes.empty()) throw std::invalid_argument("ensemble: no scenes");
    const std::vector<double> positions = scenes.front().positions();
    const Eigen::MatrixXd kernel = exact_probability_kernel(povm, positions);
    PriorEnsemble ens;
    ens.prob_vectors.reserve(scenes.size());
    for (const Scene& scene : scenes) {
        if (scene.positions() != positions)
            throw std::invalid_argument("ensemble: scenes use different emitter layouts");
        ens.prob_vectors.push_back(kernel * scene.intensities());
    }
    return ens;
}

MeasurementGeometry geometry_for(Method method, double sigma,
                                 const std::vector<double>& centroids, double size, int l_max,
                                 int t_max, double xi = 0.0) {
    MeasurementGeometry g;
    g.method = method;
    g.psf = PsfModel{.sigma = sigma};
    g.centroids = centroids;
    g.source_size = size;
    g.l_max = l_max;
    g.t_max = t_max;
    g.xi = xi;
    return g;
}

/// Least-squares slope of log beta_k^2 against log alpha per task. Censored
/// entries are excluded; a column needs two usable points for a fit (tasks with
/// steep scaling leave the resolvable window quickly).
std::vector<SlopeRow> fit_slopes(const std::string& method, double interval,
                                 const std::vector<double>& alphas,
                                 const std::vector<const RecSpectrum*>& spectra, int max_k) {
    int n_tasks = spectra.front()->n_tasks();
    for (const RecSpectrum* s : spectra) n_tasks = std::min(n_tasks, s->n_tasks());
    std::vector<SlopeRow> rows;
    for (int k = 1; k <= std::min(max_k, n_tasks - 1); ++k) {
        Eigen::MatrixXd column(static_cast<Eigen::Index>(alphas.size()), 1);
        int usable = 0;
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            const double b = spectra[a]->beta_sq[k];
            column(static_cast<Eigen::Index>(a), 0) = b;
            if (b > 0 && b < kBetaCutoff) ++usable;
        }
        if (usable < 2) continue;
        const Eigen::VectorXd slope = scaling_fit(alphas, column);
        rows.push_back({method, interval, k, slope[0], usable});
    }
    return rows;
}

SceneGeneratorConfig uniform_prior_config(const std::vector<double>& centroids, double size,
                                          int n_max) {
    SceneGeneratorConfig cfg;
    cfg.centroids = centroids;
    cfg.sizes.assign(centroids.size(), size);
    cfg.n_max = n_max;
    return cfg;
}

std::vector<Scene> draw_prior_scenes(const SceneGeneratorConfig& cfg, int w_scenes,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Scene> scenes;
    scenes.reserve(static_cast<std::size_t>(w_scenes));
    for (int w = 0; w < w_scenes; ++w) scenes.push_back(generate_uniform_random_scene(cfg, rng));
    return scenes;
}

} // namespace

// --- two-point -----------------------------------------------------------

TwoPointResult run_two_point(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const double xi = cfg.at("xi").get<double>();
    const double halfwidth = cfg.at("prior_halfwidth").get<double>();
    const int n_quad = cfg.at("n_quad").get<int>();
    const std::vector<double> gammas = as_doubles(cfg.at("gamma_list"));

    TwoPointResult result;
    result.sigma = sigma;
    result.xi = xi;
    const Povm povm = build_binary_spade(sigma, xi, 0.0, default_grid({0.0}, sigma));
    const QuadRule rule = gauss_legendre(n_quad);

    for (const double gamma : gammas) {
        PriorEnsemble ens;
        KahanSum total;
        std::vector<double> raw_weights;
        for (int i = 0; i < n_quad; ++i) {
            const double L = halfwidth * gamma * rule.nodes[i];
            const double weight =
                rule.weights[i] * std::exp(-L * L / (2.0 * gamma * gamma));
            const Eigen::MatrixXd kernel =
                exact_probability_kernel(povm, {-L / 2.0, L / 2.0});
            ens.prob_vectors.push_back(kernel * Eigen::Vector2d(0.5, 0.5));
            raw_weights.push_back(weight);
            total.add(weight);
        }
        for (double& w : raw_weights) w /= total.value();
        ens.weights = raw_weights;

        Eigen::VectorXd D;
        Eigen::MatrixXd G;
        build_dg(ens, D, G);
        const RecSpectrum spectrum = solve_spectrum(D, G);

        TwoPointRow row;
        row.gamma = gamma;
        row.d00 = D[0];
        row.beta1_sq = spectrum.n_tasks() > 1 ? spectrum.beta_sq[1] : kBetaCutoff;
        row.lambda1 = spectrum.n_tasks() > 1 ? spectrum.lambda[1] : 0.0;
        row.censored = row.beta1_sq >= kBetaCutoff;
        const double a = gamma / sigma;
        row.series = 8.0 / (a * a) + 0.75 - a * a / 64.0;
        result.rows.push_back(row);
    }
    return result;
}

// --- single-source --------------------------------------------------------

SingleSourceResult run_single_source(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const std::vector<double> alphas = as_doubles(cfg.at("alpha_list"));
    const std::vector<std::string> methods = as_strings(cfg.at("methods"));
    const int n_max = cfg.at("n_max").get<int>();
    const int w_scenes = cfg.at("w_scenes").get<int>();
    const int l_max = cfg.at("l_max").get<int>();
    const int t_max = cfg.at("t_max").get<int>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const std::vector<double> s_values = s_grid_values(cfg.at("s_grid"));

    SingleSourceResult result;
    for (const std::string& method : methods) {
        std::vector<const RecSpectrum*> spectra;
        const std::size_t first_record = result.records.size();
        for (const double alpha : alphas) {
            const double size = alpha * sigma;
            const Povm povm = make_povm(
                geometry_for(method_from_name(method), sigma, {0.0}, size, l_max, t_max));
            const std::vector<Scene> scenes = draw_prior_scenes(
                uniform_prior_config({0.0}, size, n_max), w_scenes, derive_seed(seed, 0));
            const PriorEnsemble ens = ensemble_from_scenes(povm, scenes);
            Eigen::VectorXd D;
            Eigen::MatrixXd G;
            build_dg(ens, D, G);
            result.records.push_back({method, alpha, 0.0, solve_spectrum(D, G)});
            for (const double s : s_values)
                result.ct_rows.push_back({method, alpha, s,
                                          total_rec(result.records.back().spectrum, s),
                                          total_rec_trace_form(D, G, s)});
        }
        for (std::size_t i = first_record; i < result.records.size(); ++i)
            spectra.push_back(&result.records[i].spectrum);
        const auto rows = fit_slopes(method, 0.0, alphas, spectra, 8);
        result.slopes.insert(result.slopes.end(), rows.begin(), rows.end());
    }
    return result;
}

// --- multi-source ---------------------------------------------------------

MultiSourceResult run_multi_source(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const std::vector<double> alphas = as_doubles(cfg.at("alpha_list"));
    const std::vector<double> intervals = as_doubles(cfg.at("interval_list"));
    const std::vector<std::string> methods = as_strings(cfg.at("methods"));
    const int q = cfg.at("q").get<int>();
    const int n_max = cfg.at("n_max").get<int>();
    const int w_scenes = cfg.at("w_scenes").get<int>();
    const int l_max = cfg.at("l_max").get<int>();
    const int t_max = cfg.at("t_max").get<int>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    MultiSourceResult result;
    for (const double interval : intervals) {
        const std::vector<double> centroids = equally_spaced_centroids(interval, q);
        for (const std::string& method : methods) {
            std::vector<const RecSpectrum*> spectra;
            const std::size_t first_record = result.records.size();
            for (const double alpha : alphas) {
                const double size = alpha * sigma;
                const Povm povm = make_povm(geometry_for(method_from_name(method), sigma,
                                                         centroids, size, l_max, t_max));
                const std::vector<Scene> scenes =
                    draw_prior_scenes(uniform_prior_config(centroids, size, n_max), w_scenes,
                                      derive_seed(seed, 0));
                const PriorEnsemble ens = ensemble_from_scenes(povm, scenes);
                Eigen::VectorXd D;
                Eigen::MatrixXd G;
                build_dg(ens, D, G);
                result.records.push_back({method, alpha, interval, solve_spectrum(D, G)});
            }
            for (std::size_t i = first_record; i < result.records.size(); ++i)
                spectra.push_back(&result.records[i].spectrum);
            const auto rows = fit_slopes(method, interval, alphas, spectra, 8);
            result.slopes.insert(result.slopes.end(), rows.begin(), rows.end());
        }
    }
    return result;
}

// --- general-source -------------------------------------------------------

GeneralSourceResult run_general_source(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const std::vector<std::string> methods = as_strings(cfg.at("methods"));
    const double source_size = cfg.at("source_size").get<double>();
    const int n_pixels = cfg.at("n_pixels").get<int>();
    const int w_scenes = cfg.at("w_scenes").get<int>();
    const int l_max = cfg.at("l_max").get<int>();
    const int t_max = cfg.at("t_max").get<int>();
    const int n_dump = cfg.at("n_task_dump").get<int>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const std::vector<double> s_values = s_grid_values(cfg.at("s_grid"));

    const std::vector<Scene> scenes = draw_prior_scenes(
        uniform_prior_config({0.0}, source_size, n_pixels), w_scenes, derive_seed(seed, 0));

    GeneralSourceResult result;
    for (const std::string& method : methods) {
        const Povm povm = make_povm(
            geometry_for(method_from_name(method), sigma, {0.0}, source_size, l_max, t_max));
        const PriorEnsemble ens = ensemble_from_scenes(povm, scenes);
        Eigen::VectorXd D;
        Eigen::MatrixXd G;
        build_dg(ens, D, G);
        RecSpectrum spectrum = solve_spectrum(D, G);
        const double alpha = source_size / sigma;

        for (const double s : s_values)
            result.ct_rows.push_back(
                {method, alpha, s, total_rec(spectrum, s), total_rec_trace_form(D, G, s)});

        const int kept = static_cast<int>(spectrum.kept_outcomes.size());
        const int dump = std::min(n_dump, spectrum.n_tasks());
        result.task_profiles.push_back(spectrum.R.leftCols(dump));
        Eigen::MatrixXd values(w_scenes, dump);
        for (int w = 0; w < w_scenes; ++w)
            values.row(w) =
                eigentask_values(spectrum, ens.prob_vectors[static_cast<std::size_t>(w)])
                    .head(dump)
                    .transpose();
        result.task_values.push_back(values);

        const auto labels = povm.labels();
        std::vector<std::string> kept_labels;
        kept_labels.reserve(static_cast<std::size_t>(kept));
        for (int j : spectrum.kept_outcomes)
            kept_labels.push_back(labels[static_cast<std::size_t>(j)]);
        result.outcome_labels.push_back(std::move(kept_labels));

        result.records.push_back({method, alpha, 0.0, std::move(spectrum)});
    }
    return result;
}

// --- classify-qr -----------------------------------------------------------

ClassifyQrResult run_classify_qr(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const double source_size = cfg.at("source_size").get<double>();
    const int n_pixels = cfg.at("n_pixels").get<int>();
    const double p0 = cfg.at("p0").get<double>();
    const int t_max = cfg.at("t_max").get<int>();
    const int w_train = cfg.at("w_train").get<int>();
    const int w_test = cfg.at("w_test").get<int>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    std::vector<std::pair<double, double>> blocks;
    for (const auto& b : cfg.at("eta_blocks"))
        blocks.emplace_back(b[0].get<double>(), b[1].get<double>());
    const auto eta = [blocks](double u) {
        for (const auto& [lo, hi] : blocks)
            if (u >= lo && u <= hi) return true;
        return false;
    };

    SceneGeneratorConfig gen;
    gen.centroids = {0.0};
    gen.sizes = {source_size};
    gen.n_max = n_pixels;
    gen.p0 = p0;
    gen.eta = eta;

    const Povm povm = make_povm(
        geometry_for(Method::Direct, sigma, {0.0}, source_size, 2, t_max));
    CompactSource layout{0.0, source_size, std::vector<double>(static_cast<std::size_t>(n_pixels), 0.0)};
    std::vector<double> positions(static_cast<std::size_t>(n_pixels));
    for (int s = 0; s < n_pixels; ++s) positions[static_cast<std::size_t>(s)] = layout.position(s);
    const Eigen::MatrixXd kernel = exact_probability_kernel(povm, positions);

    const auto draw_class = [&](int label, std::mt19937_64& rng) {
        SceneGeneratorConfig c = gen;
        c.draw_case = label == 1 ? SceneGeneratorConfig::Case::Active
                                 : SceneGeneratorConfig::Case::Inactive;
        return generate_scene(c, rng);
    };

    std::vector<Eigen::VectorXd> train_probs;
    std::vector<int> train_labels;
    std::mt19937_64 train_rng(derive_seed(seed, 0));
    for (int label = 0; label < 2; ++label)
        for (int w = 0; w < w_train; ++w) {
            train_probs.push_back(kernel * draw_class(label, train_rng).intensities());
            train_labels.push_back(label);
        }

    const SplitProvider provider = [&](int /*rep*/, std::mt19937_64& rng) {
        SplitData split;
        split.train_probs = train_probs;
        split.train_labels = train_labels;
        split.n_classes = 2;
        for (int label = 0; label < 2; ++label)
            for (int w = 0; w < w_test; ++w) {
                split.test_probs.push_back(kernel * draw_class(label, rng).intensities());
                split.test_labels.push_back(label);
            }
        return split;
    };

    ClassificationSettings settings;
    settings.k_list = as_ints(cfg.at("k_list"));
    settings.s_list = as_doubles(cfg.at("s_list"));
    settings.repetitions = cfg.at("repetitions").get<int>();
    settings.resplit = false;
    settings.hyper = hyper_from(cfg.at("learning"));
    settings.seed = seed;

    const ClassificationRun run = run_classification(provider, settings);
    ClassifyQrResult result;
    result.cells = run.cells;
    result.summaries = summarize_accuracy(run.cells);
    result.beta_sq = run.beta_sq;
    result.s_list = settings.s_list;
    result.c_t = run.c_t;
    result.n_tasks = run.n_tasks;
    return result;
}

// --- classify-multisource ---------------------------------------------------

ClassifyMultiResult run_classify_multisource(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const int q = cfg.at("q").get<int>();
    const double interval = cfg.at("interval").get<double>();
    const double alpha = cfg.at("alpha").get<double>();
    const int n_max = cfg.at("n_max").get<int>();
    const double p0 = cfg.at("p0").get<double>();
    const int n_classes = cfg.at("n_classes").get<int>();
    const int l_max = cfg.at("l_max").get<int>();
    const int t_max = cfg.at("t_max").get<int>();
    const int train_per_class = cfg.at("train_per_class").get<int>();
    const int test_per_class = cfg.at("test_per_class").get<int>();
    const int repetitions = cfg.at("repetitions").get<int>();
    const int batches = cfg.at("batches").get<int>();
    const std::vector<std::string> methods = as_strings(cfg.at("methods"));
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    const std::vector<double> centroids = equally_spaced_centroids(interval, q);
    const double size = alpha * sigma;

    std::vector<double> positions;
    for (const double c : centroids) {
        CompactSource src{c, size, std::vector<double>(static_cast<std::size_t>(n_max), 0.0)};
        for (int s = 0; s < n_max; ++s) positions.push_back(src.position(s));
    }
    const int n_emitters = static_cast<int>(positions.size());

    std::vector<Povm> povms;
    std::vector<Eigen::MatrixXd> kernels;
    for (const std::string& method : methods) {
        povms.push_back(make_povm(
            geometry_for(method_from_name(method), sigma, centroids, size, l_max, t_max)));
        kernels.push_back(exact_probability_kernel(povms.back(), positions));
    }

    ClassificationSettings base_settings;
    base_settings.k_list = as_ints(cfg.at("k_list"));
    base_settings.s_list = as_doubles(cfg.at("s_list"));
    base_settings.repetitions = repetitions;
    base_settings.resplit = false;
    base_settings.hyper = hyper_from(cfg.at("learning"));

    ClassifyMultiResult result;
    for (int batch = 0; batch < batches; ++batch) {
        const std::uint64_t batch_seed = derive_seed(seed, 100 + batch);

        // class masks: admissible emitter subsets, redrawn if empty
        std::mt19937_64 mask_rng(derive_seed(batch_seed, 0));
        std::vector<std::vector<char>> masks(static_cast<std::size_t>(n_classes));
        for (auto& mask : masks) {
            mask.resize(static_cast<std::size_t>(n_emitters));
            bool any = false;
            while (!any)
                for (auto& bit : mask) {
                    bit = bernoulli(mask_rng, 0.5) ? 1 : 0;
                    any = any || bit;
                }
        }

        const auto class_eta = [&positions, &masks](int label) {
            const std::vector<char>& mask = masks[static_cast<std::size_t>(label)];
            return [&positions, &mask](double u) {
                for (std::size_t i = 0; i < positions.size(); ++i)
                    if (std::abs(u - positions[i]) < 1e-9) return mask[i] != 0;
                throw std::logic_error("class mask: position not on the emitter layout");
            };
        };

        SceneGeneratorConfig gen;
        gen.centroids = centroids;
        gen.sizes.assign(centroids.size(), size);
        gen.n_max = n_max;
        gen.p0 = p0;
        gen.draw_case = SceneGeneratorConfig::Case::Active;

        const auto draw_class_scene = [&](int label, std::mt19937_64& rng) {
            SceneGeneratorConfig c = gen;
            c.eta = class_eta(label);
            return generate_scene(c, rng);
        };

        std::mt19937_64 train_rng(derive_seed(batch_seed, 1));
        std::vector<Eigen::VectorXd> train_intensities;
        std::vector<int> train_labels;
        for (int label = 0; label < n_classes; ++label)
            for (int w = 0; w < train_per_class; ++w) {
                train_intensities.push_back(draw_class_scene(label, train_rng).intensities());
                train_labels.push_back(label);
            }

        // shared test draws per repetition keep the method comparison paired
        std::mt19937_64 test_rng(derive_seed(batch_seed, 2));
        std::vector<std::vector<Eigen::VectorXd>> test_intensities(
            static_cast<std::size_t>(repetitions));
        std::vector<int> test_labels;
        for (int rep = 0; rep < repetitions; ++rep)
            for (int label = 0; label < n_classes; ++label)
                for (int w = 0; w < test_per_class; ++w)
                    test_intensities[static_cast<std::size_t>(rep)].push_back(
                        draw_class_scene(label, test_rng).intensities());
        for (int label = 0; label < n_classes; ++label)
            for (int w = 0; w < test_per_class; ++w) test_labels.push_back(label);

        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Eigen::MatrixXd& kernel = kernels[mi];
            std::vector<Eigen::VectorXd> train_probs;
            train_probs.reserve(train_intensities.size());
            for (const auto& intens : train_intensities) train_probs.push_back(kernel * intens);

            const SplitProvider provider = [&](int rep, std::mt19937_64& /*rng*/) {
                SplitData split;
                split.train_probs = train_probs;
                split.train_labels = train_labels;
                split.n_classes = n_classes;
                for (const auto& intens : test_intensities[static_cast<std::size_t>(rep)])
                    split.test_probs.push_back(kernel * intens);
                split.test_labels = test_labels;
                return split;
            };

            ClassificationSettings settings = base_settings;
            settings.seed = derive_seed(batch_seed, 10 + static_cast<int>(mi));
            const ClassificationRun run = run_classification(provider, settings);

            for (const AccuracyCell& cell : run.cells)
                result.cells.push_back({methods[mi], batch, cell});
            const auto summaries = summarize_accuracy(run.cells);
            for (std::size_t si = 0; si < settings.s_list.size(); ++si) {
                const AccuracySummary peak = peak_accuracy(summaries, settings.s_list[si]);
                result.peaks.push_back({methods[mi], batch, settings.s_list[si], peak.k,
                                        peak.mean, run.c_t[si]});
            }
        }
    }
    return result;
}

// --- face -------------------------------------------------------------------

FaceResult run_face(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const std::string data_dir = cfg.at("data_dir").get<std::string>();
    const int segments = cfg.at("segments").get<int>();
    const double interval = cfg.at("interval").get<double>();
    const double source_size = cfg.at("source_size").get<double>();
    const int l_max = cfg.at("l_max").get<int>();
    const int t_max = cfg.at("t_max").get<int>();
    const int train_per_class = cfg.at("train_per_class").get<int>();
    const std::vector<std::string> methods = as_strings(cfg.at("methods"));
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    if (!std::filesystem::is_directory(data_dir))
        throw std::runtime_error("face: data_dir is not a directory: " + data_dir);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("face: no .pgm or .csv images in " + data_dir);

    const std::vector<double> centres = equally_spaced_centroids(interval, segments);
    std::vector<std::pair<double, double>> placement;
    for (const double c : centres) placement.emplace_back(c, source_size * sigma);

    std::vector<Scene> scenes;
    std::vector<int> labels;
    std::map<std::string, int> class_ids;
    for (const auto& path : files) {
        const std::string stem = path.stem().string();
        const auto underscore = stem.rfind('_');
        if (underscore == std::string::npos || underscore == 0)
            throw std::runtime_error("face: image name must look like <class>_<index>: " +
                                     path.filename().string());
        const std::string cls = stem.substr(0, underscore);
        const auto [it, inserted] = class_ids.emplace(cls, static_cast<int>(class_ids.size()));
        labels.push_back(it->second);
        scenes.push_back(ingest_raster_image(path.string(), segments, placement));
    }
    const int n_classes = static_cast<int>(class_ids.size());
    if (n_classes < 2) throw std::runtime_error("face: need at least two classes");

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    for (int c = 0; c < n_classes; ++c)
        if (static_cast<int>(by_class[static_cast<std::size_t>(c)].size()) < train_per_class + 1)
            throw std::runtime_error("face: every class needs train_per_class + 1 images");

    const std::vector<double> positions = scenes.front().positions();
    for (const Scene& s : scenes)
        if (s.positions() != positions)
            throw std::runtime_error("face: images disagree on size; emitter layouts differ");

    FaceResult result;
    result.methods = methods;
    result.n_classes = n_classes;
    result.n_images = static_cast<int>(scenes.size());

    ClassificationSettings base_settings;
    base_settings.k_list = as_ints(cfg.at("k_list"));
    base_settings.s_list = as_doubles(cfg.at("s_list"));
    base_settings.repetitions = cfg.at("repetitions").get<int>();
    base_settings.resplit = true;
    base_settings.hyper = hyper_from(cfg.at("learning"));

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const Povm povm = make_povm(geometry_for(method_from_name(methods[mi]), sigma, centres,
                                                 source_size * sigma, l_max, t_max));
        const Eigen::MatrixXd kernel = exact_probability_kernel(povm, positions);
        std::vector<Eigen::VectorXd> probs;
        probs.reserve(scenes.size());
        for (const Scene& s : scenes) probs.push_back(kernel * s.intensities());

        const SplitProvider provider = [&](int /*rep*/, std::mt19937_64& rng) {
            SplitData split;
            split.n_classes = n_classes;
            for (int c = 0; c < n_classes; ++c) {
                std::vector<int> idx = by_class[static_cast<std::size_t>(c)];
                std::shuffle(idx.begin(), idx.end(), rng);
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    const int image = idx[i];
                    if (static_cast<int>(i) < train_per_class) {
                        split.train_probs.push_back(probs[static_cast<std::size_t>(image)]);
                        split.train_labels.push_back(c);
                    } else {
                        split.test_probs.push_back(probs[static_cast<std::size_t>(image)]);
                        split.test_labels.push_back(c);
                    }
                }
            }
            return split;
        };

        ClassificationSettings settings = base_settings;
        settings.seed = derive_seed(seed, 500 + static_cast<int>(mi));
        const ClassificationRun run = run_classification(provider, settings);
        for (const AccuracyCell& cell : run.cells) result.cells.push_back({methods[mi], cell});
        result.summaries_by_method.push_back(summarize_accuracy(run.cells));
    }
    return result;
}

// --- discriminate -----------------------------------------------------------

DiscrimResult run_discriminate(const Json& cfg) {
    const double sigma = cfg.at("sigma").get<double>();
    const std::vector<std::string> methods = as_strings(cfg.at("methods"));
    const double d_sep = cfg.at("d_sep").get<double>();
    const std::vector<double> alphas = as_doubles(cfg.at("alpha_list"));
    const double xi = cfg.at("xi").get<double>();
    const int t_max = cfg.at("t_max").get<int>();
    const int trials = cfg.at("trials").get<int>();
    const double s_auto = cfg.at("s_auto_scale").get<double>();
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();

    DiscrimResult result;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        const Method method = method_from_name(methods[mi]);
        std::vector<double> fit_alpha, fit_c;
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
            const double alpha = alphas[ai];
            const double sep = alpha * d_sep * sigma;
            const std::vector<double> centroids =
                method == Method::Spade ? std::vector<double>{0.0}
                                        : std::vector<double>{-sep / 2.0, sep / 2.0};
            const Povm povm = make_povm(
                geometry_for(method, sigma, centroids, std::max(sep, 1e-6 * sigma), 2, t_max, xi));

            const Eigen::VectorXd p0 =
                exact_probability_kernel(povm, {0.0}) * Eigen::VectorXd::Ones(1);
            const Eigen::VectorXd p1 = exact_probability_kernel(povm, {-sep / 2.0, sep / 2.0}) *
                                       Eigen::Vector2d(0.5, 0.5);
            const double c = chernoff_exponent(p0, p1);
            if (std::isfinite(c) && c > 0) {
                fit_alpha.push_back(alpha);
                fit_c.push_back(c);
            }

            const std::int64_t s_used = std::clamp<std::int64_t>(
                std::isfinite(c) && c > 0 ? static_cast<std::int64_t>(std::llround(s_auto / c))
                                          : 1,
                1, static_cast<std::int64_t>(1e15));

            const Hypothesis h0{"one-point", sanitize_probabilities(p0), 0.5};
            const Hypothesis h1{"two-point", sanitize_probabilities(p1), 0.5};
            std::mt19937_64 rng(derive_seed(seed, 300 + static_cast<int>(mi) * 100 +
                                                       static_cast<int>(ai)));
            int successes = 0;
            for (int t = 0; t < trials; ++t) {
                const bool truth_h1 = (t % 2) == 1;
                const CountVector counts =
                    sample_counts(truth_h1 ? h1.p : h0.p, s_used, rng);
                const Decision dec = likelihood_ratio_decide(counts, h0, h1);
                if ((dec == Decision::H1) == truth_h1) ++successes;
            }
            const double p_succ = static_cast<double>(successes) / trials;
            const double varsigma =
                p_succ < 1.0 ? -std::log1p(-p_succ) / static_cast<double>(s_used)
                             : std::numeric_limits<double>::infinity();
            result.rows.push_back({methods[mi], alpha, sep, s_used, c, p_succ, varsigma});
        }

        if (fit_c.size() >= 3) {
            KahanSum sx, sy, sxx, sxy;
            for (std::size_t i = 0; i < fit_c.size(); ++i) {
                const double x = std::log(fit_alpha[i]), y = std::log(fit_c[i]);
                sx.add(x);
                sy.add(y);
                sxx.add(x * x);
                sxy.add(x * y);
            }
            const double n = static_cast<double>(fit_c.size());
            const double slope = (n * sxy.value() - sx.value() * sy.value()) /
                                 (n * sxx.value() - sx.value() * sx.value());
            result.slopes.push_back({methods[mi], 0.0, 0, slope, static_cast<int>(fit_c.size())});
        }
    }
    return result;
}

// --- emission + dispatch ------------------------------------------------------

namespace {

std::string flat_num(double v) {
    std::string s = CsvFile::num(v);
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

void emit_two_point(const TwoPointResult& r, const std::string& dir, const RunManifest& m) {
    CsvFile csv(dir + "/beta.csv", m.hash,
                {"gamma", "d00", "beta1_sq", "lambda1", "series", "censored"});
    for (const auto& row : r.rows)
        csv.row({CsvFile::num(row.gamma), CsvFile::num(row.d00), CsvFile::num(row.beta1_sq),
                 CsvFile::num(row.lambda1), CsvFile::num(row.series),
                 row.censored ? "1" : "0"});
}

void emit_beta_tables(const std::vector<SpectrumRecord>& records, const std::string& dir,
                      const RunManifest& m, bool with_interval) {
    std::map<std::string, std::unique_ptr<CsvFile>> files;
    for (const auto& rec : records) {
        std::string name = dir + "/beta_" + rec.method;
        if (with_interval) name += "_L" + flat_num(rec.interval);
        name += ".csv";
        auto it = files.find(name);
        if (it == files.end())
            it = files
                     .emplace(name, std::make_unique<CsvFile>(
                                        name, m.hash,
                                        std::vector<std::string>{"alpha", "k", "beta_sq",
                                                                 "censored"}))
                     .first;
        for (int k = 0; k < rec.spectrum.n_tasks(); ++k)
            it->second->row({CsvFile::num(rec.alpha), CsvFile::num(k),
                             CsvFile::num(rec.spectrum.beta_sq[k]),
                             rec.spectrum.beta_sq[k] >= kBetaCutoff ? "1" : "0"});
    }
}

void emit_slope_table(const std::vector<SlopeRow>& slopes, const std::string& path,
                      const RunManifest& m, bool with_interval) {
    std::vector<std::string> header = {"method", "k", "slope", "n_points"};
    if (with_interval) header.insert(header.begin() + 1, "interval");
    CsvFile csv(path, m.hash, header);
    for (const auto& s : slopes) {
        std::vector<std::string> row = {s.method, CsvFile::num(s.k), CsvFile::num(s.slope),
                                        CsvFile::num(s.n_points)};
        if (with_interval) row.insert(row.begin() + 1, CsvFile::num(s.interval));
        csv.row(row);
    }
}

void emit_ct_tables(const std::vector<CtRow>& rows, const std::string& dir, const RunManifest& m,
                    bool with_alpha) {
    std::vector<std::string> header = {"S", "method", "C_T"};
    if (with_alpha) header.push_back("alpha");
    CsvFile csv(dir + "/ct.csv", m.hash, header);
    std::vector<std::string> check_header = {"S", "method", "C_T", "C_T_trace"};
    if (with_alpha) check_header.push_back("alpha");
    CsvFile check(dir + "/ct_check.csv", m.hash, check_header);
    for (const auto& r : rows) {
        std::vector<std::string> row = {CsvFile::num(r.s), r.method, CsvFile::num(r.c_t)};
        if (with_alpha) row.push_back(CsvFile::num(r.alpha));
        csv.row(row);
        std::vector<std::string> crow = {CsvFile::num(r.s), r.method, CsvFile::num(r.c_t),
                                         CsvFile::num(r.c_t_trace)};
        if (with_alpha) crow.push_back(CsvFile::num(r.alpha));
        check.row(crow);
    }
}

void emit_accuracy_table(const std::vector<AccuracySummary>& summaries, const std::string& path,
                         const RunManifest& m) {
    CsvFile csv(path, m.hash, {"K", "S", "mean", "min", "max"});
    for (const auto& s : summaries)
        csv.row({CsvFile::num(s.k), CsvFile::num(s.s), CsvFile::num(s.mean), CsvFile::num(s.min),
                 CsvFile::num(s.max)});
}

void emit_single_source(const SingleSourceResult& r, const std::string& dir,
                        const RunManifest& m) {
    emit_beta_tables(r.records, dir, m, false);
    emit_slope_table(r.slopes, dir + "/slopes.csv", m, false);
    emit_ct_tables(r.ct_rows, dir, m, true);
}

void emit_multi_source(const MultiSourceResult& r, const std::string& dir, const RunManifest& m) {
    emit_beta_tables(r.records, dir, m, true);
    emit_slope_table(r.slopes, dir + "/slopes.csv", m, true);
}

void emit_general_source(const GeneralSourceResult& r, const std::string& dir,
                         const RunManifest& m) {
    emit_beta_tables(r.records, dir, m, false);
    emit_ct_tables(r.ct_rows, dir, m, false);
    CsvFile tasks(dir + "/eigentasks.csv", m.hash, {"method", "k", "outcome", "label", "r"});
    CsvFile values(dir + "/task_values.csv", m.hash, {"method", "k", "scene", "f"});
    for (std::size_t mi = 0; mi < r.records.size(); ++mi) {
        const std::string& method = r.records[mi].method;
        const Eigen::MatrixXd& profile = r.task_profiles[mi];
        for (int k = 0; k < profile.cols(); ++k)
            for (int j = 0; j < profile.rows(); ++j)
                tasks.row({method, CsvFile::num(k), CsvFile::num(j),
                           r.outcome_labels[mi][static_cast<std::size_t>(j)],
                           CsvFile::num(profile(j, k))});
        const Eigen::MatrixXd& vals = r.task_values[mi];
        for (int k = 0; k < vals.cols(); ++k)
            for (int w = 0; w < vals.rows(); ++w)
                values.row({method, CsvFile::num(k), CsvFile::num(w), CsvFile::num(vals(w, k))});
    }
}

void emit_classify_qr(const ClassifyQrResult& r, const std::string& dir, const RunManifest& m) {
    emit_accuracy_table(r.summaries, dir + "/accuracy.csv", m);
    CsvFile cells(dir + "/cells.csv", m.hash, {"S", "K", "repetition", "accuracy"});
    for (const auto& c : r.cells)
        cells.row({CsvFile::num(c.s), CsvFile::num(c.k), CsvFile::num(c.repetition),
                   CsvFile::num(c.accuracy)});
    CsvFile spectrum(dir + "/spectrum.csv", m.hash, {"k", "beta_sq", "censored"});
    for (int k = 0; k < r.beta_sq.size(); ++k)
        spectrum.row({CsvFile::num(k), CsvFile::num(r.beta_sq[k]),
                      r.beta_sq[k] >= kBetaCutoff ? "1" : "0"});
    CsvFile ct(dir + "/ct.csv", m.hash, {"S", "C_T"});
    for (std::size_t i = 0; i < r.s_list.size(); ++i)
        ct.row({CsvFile::num(r.s_list[i]), CsvFile::num(r.c_t[i])});
}

void emit_classify_multisource(const ClassifyMultiResult& r, const std::string& dir,
                               const RunManifest& m) {
    CsvFile cells(dir + "/cells.csv", m.hash,
                  {"method", "batch", "S", "K", "repetition", "accuracy"});
    for (const auto& c : r.cells)
        cells.row({c.method, CsvFile::num(c.batch), CsvFile::num(c.cell.s),
                   CsvFile::num(c.cell.k), CsvFile::num(c.cell.repetition),
                   CsvFile::num(c.cell.accuracy)});
    CsvFile peaks(dir + "/peaks.csv", m.hash,
                  {"method", "batch", "S", "peak_k", "peak_mean", "c_t"});
    for (const auto& p : r.peaks)
        peaks.row({p.method, CsvFile::num(p.batch), CsvFile::num(p.s), CsvFile::num(p.peak_k),
                   CsvFile::num(p.peak_mean), CsvFile::num(p.c_t)});
}

void emit_face(const FaceResult& r, const std::string& dir, const RunManifest& m) {
    CsvFile cells(dir + "/cells.csv", m.hash, {"method", "S", "K", "repetition", "accuracy"});
    for (const auto& c : r.cells)
        cells.row({c.method, CsvFile::num(c.cell.s), CsvFile::num(c.cell.k),
                   CsvFile::num(c.cell.repetition), CsvFile::num(c.cell.accuracy)});
    for (std::size_t mi = 0; mi < r.methods.size(); ++mi)
        emit_accuracy_table(r.summaries_by_method[mi], dir + "/accuracy_" + r.methods[mi] + ".csv",
                            m);
}

void emit_discriminate(const DiscrimResult& r, const std::string& dir, const RunManifest& m) {
    CsvFile csv(dir + "/discrimination.csv", m.hash,
                {"method", "alpha", "S", "P_succ_mean", "varsigma", "chernoff_C"});
    for (const auto& row : r.rows)
        csv.row({row.method, CsvFile::num(row.alpha), CsvFile::num(row.s_used),
                 CsvFile::num(row.p_succ), CsvFile::num(row.varsigma),
                 CsvFile::num(row.chernoff)});
    CsvFile slopes(dir + "/slopes.csv", m.hash, {"method", "slope", "n_points"});
    for (const auto& s : r.slopes)
        slopes.row({s.method, CsvFile::num(s.slope), CsvFile::num(s.n_points)});
}

} // namespace

void run_experiment(const Json& merged_config) {
    const auto problems = validate_config(merged_config);
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::invalid_argument(msg);
    }
    const std::string scenario = merged_config.at("scenario").get<std::string>();
    const std::string dir = merged_config.at("output_dir").get<std::string>();
    std::filesystem::create_directories(dir);
    RunManifest manifest = make_manifest(merged_config);

    const auto t0 = std::chrono::steady_clock::now();
    if (scenario == "two-point") {
        emit_two_point(run_two_point(merged_config), dir, manifest);
    } else if (scenario == "single-source") {
        emit_single_source(run_single_source(merged_config), dir, manifest);
    } else if (scenario == "multi-source") {
        emit_multi_source(run_multi_source(merged_config), dir, manifest);
    } else if (scenario == "general-source") {
        emit_general_source(run_general_source(merged_config), dir, manifest);
    } else if (scenario == "classify-qr") {
        emit_classify_qr(run_classify_qr(merged_config), dir, manifest);
    } else if (scenario == "classify-multisource") {
        emit_classify_multisource(run_classify_multisource(merged_config), dir, manifest);
    } else if (scenario == "face") {
        emit_face(run_face(merged_config), dir, manifest);
    } else if (scenario == "discriminate") {
        emit_discriminate(run_discriminate(merged_config), dir, manifest);
    } else {
        throw std::invalid_argument("unknown scenario: " + scenario);
    }
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(manifest, dir);
}

} // namespace recimaging
