#include "recimaging/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

#include "recimaging/sampling.hpp"
#include "recimaging/util.hpp"

namespace recimaging {

Method method_from_name(const std::string& name) {
    static const std::map<std::string, Method> table = {
        {"direct", Method::Direct},
        {"binary-spade", Method::BinarySpade},
        {"spade", Method::Spade},
        {"separate-spade", Method::SeparateSpade},
        {"orthogonalized-spade", Method::OrthogonalizedSpade},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown method: " + name);
    return it->second;
}

std::string method_name(Method method) {
    switch (method) {
        case Method::Direct: return "direct";
        case Method::BinarySpade: return "binary-spade";
        case Method::Spade: return "spade";
        case Method::SeparateSpade: return "separate-spade";
        case Method::OrthogonalizedSpade: return "orthogonalized-spade";
    }
    throw std::logic_error("unreachable method");
}

Povm make_povm(const MeasurementGeometry& geom) {
    if (geom.centroids.empty()) throw std::invalid_argument("measurement: centroid list is empty");
    const auto [lo_it, hi_it] = std::minmax_element(geom.centroids.begin(), geom.centroids.end());
    const double pad = geom.region_pad * geom.psf.sigma;
    switch (geom.method) {
        case Method::Direct:
            return build_direct_imaging(geom.psf, *lo_it - pad, *hi_it + pad, geom.t_max);
        case Method::BinarySpade: {
            const double xi = geom.xi > 0 ? geom.xi : geom.psf.sigma;
            const double center = 0.5 * (*lo_it + *hi_it);
            return build_binary_spade(geom.psf.sigma, xi, center,
                                      default_grid(geom.centroids, geom.psf.sigma));
        }
        case Method::Spade:
            if (geom.centroids.size() != 1)
                throw std::invalid_argument("measurement: single-source SPADE needs one centroid");
            return build_spade_single(geom.psf, geom.centroids.front(), geom.source_size,
                                      geom.l_max, default_grid(geom.centroids, geom.psf.sigma));
        case Method::SeparateSpade:
            return build_separate_spade(geom.psf, geom.centroids, geom.source_size, geom.l_max,
                                        default_grid(geom.centroids, geom.psf.sigma));
        case Method::OrthogonalizedSpade:
            return build_orthogonalized_spade(geom.psf, geom.centroids, geom.source_size,
                                              geom.l_max,
                                              default_grid(geom.centroids, geom.psf.sigma));
    }
    throw std::logic_error("unreachable method");
}

// --- run artifacts ------------------------------------------------------

RunManifest make_manifest(const Json& merged_config) {
    RunManifest m;
    m.config = merged_config;
    m.version = kVersion;
    const std::string canonical = merged_config.dump() + "|" + kVersion;
    m.hash = to_hex(fnv1a64(canonical));
    return m;
}

void write_manifest(const RunManifest& manifest, const std::string& out_dir) {
    Json j;
    j["config"] = manifest.config;
    j["hash"] = manifest.hash;
    j["version"] = manifest.version;
    j["constants"] = {{"beta_cutoff", kBetaCutoff},
                      {"lambda_floor", kLambdaFloor},
                      {"d_floor", kDFloor}};
    const std::uint64_t seed = manifest.config.value("seed", std::uint64_t{0});
    j["stage_seeds"] = {{"prior", derive_seed(seed, 0)},
                       {"splits", derive_seed(seed, 1)},
                       {"sampling", derive_seed(seed, 2)},
                       {"augment", derive_seed(seed, 3)}};
    j["timing"] = {{"wall_seconds", manifest.wall_seconds}};
    const std::filesystem::path path = std::filesystem::path(out_dir) / "manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

CsvFile::CsvFile(const std::string& path, const std::string& manifest_hash,
                 const std::vector<std::string>& header)
    : n_cols_(header.size()), path_(path) {
    if (header.empty()) throw std::logic_error("csv: empty header");
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open " + path);
    out_ << "# manifest=" << manifest_hash << "\n";
    for (std::size_t i = 0; i < header.size(); ++i)
        out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
}

void CsvFile::row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_)
        throw std::logic_error("csv: row width mismatch in " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    if (!out_) throw std::runtime_error("write failed: " + path_);
}

std::string CsvFile::num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) throw std::logic_error("csv: number formatting failed");
    return std::string(buf, res.ptr);
}

std::string CsvFile::num(int v) { return std::to_string(v); }
std::string CsvFile::num(std::int64_t v) { return std::to_string(v); }

// --- configuration ------------------------------------------------------

std::vector<std::string> scenario_names() {
    return {"two-point",      "single-source",  "multi-source", "general-source",
            "classify-qr",    "classify-multisource", "face",   "discriminate"};
}

namespace {

Json int_range(int lo, int hi) {
    Json arr = Json::array();
    for (int k = lo; k <= hi; ++k) arr.push_back(k);
    return arr;
}

Json log_spaced(double lo, double hi, int n) {
    Json arr = Json::array();
    const double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < n; ++i)
        arr.push_back(std::pow(10.0, llo + (lhi - llo) * i / (n - 1)));
    return arr;
}

Json default_learning(int max_epochs) {
    return Json{{"learning_rate", 1.0},
                {"l2", 1e-4},
                {"max_epochs", max_epochs},
                {"grad_tol", 1e-6}};
}

} // namespace

Json default_config(const std::string& scenario) {
    Json j;
    j["scenario"] = scenario;
    j["seed"] = 1;
    j["output_dir"] = "out/" + scenario;
    j["sigma"] = 1.0;
    if (scenario == "two-point") {
        j["xi"] = 1.0;
        j["gamma_list"] = {0.05, 0.1, 0.2};
        j["n_quad"] = 201;
        j["prior_halfwidth"] = 8.0;
    } else if (scenario == "single-source") {
        j["methods"] = {"direct", "spade"};
        j["alpha_list"] = log_spaced(1e-3, 1e-1, 5);
        j["n_max"] = 20;
        j["w_scenes"] = 50;
        j["l_max"] = 2;
        j["t_max"] = 50;
        j["s_grid"] = {{"min_exp", 0.0}, {"max_exp", 12.0}, {"per_decade", 4}};
    } else if (scenario == "multi-source") {
        j["methods"] = {"direct", "separate-spade", "orthogonalized-spade"};
        j["q"] = 2;
        j["interval_list"] = {2.0, 20.0};
        j["alpha_list"] = log_spaced(1e-3, 1e-1, 5);
        j["n_max"] = 20;
        j["w_scenes"] = 50;
        j["l_max"] = 2;
        j["t_max"] = 50;
    } else if (scenario == "general-source") {
        j["methods"] = {"direct"};
        j["source_size"] = 10.0;
        j["n_pixels"] = 200;
        j["w_scenes"] = 200;
        j["l_max"] = 3;
        j["t_max"] = 50;
        j["s_grid"] = {{"min_exp", 0.0}, {"max_exp", 10.0}, {"per_decade", 4}};
        j["n_task_dump"] = 8;
    } else if (scenario == "classify-qr") {
        j["source_size"] = 10.0;
        j["n_pixels"] = 200;
        j["p0"] = 0.2;
        j["eta_blocks"] = {{-5.0, -3.8}, {-3.0, -2.2}, {-1.4, -0.2},
                           {0.6, 1.2},   {2.0, 3.4},   {4.2, 5.0}};
        j["t_max"] = 50;
        j["w_train"] = 200;
        j["w_test"] = 100;
        j["repetitions"] = 5;
        j["s_list"] = {1e2, 1e4, 1e6};
        j["k_list"] = int_range(0, 20);
        j["learning"] = default_learning(2000);
    } else if (scenario == "classify-multisource") {
        j["methods"] = {"direct", "orthogonalized-spade"};
        j["q"] = 3;
        j["interval"] = 10.0;
        j["alpha"] = 0.1;
        j["n_max"] = 20;
        j["p0"] = 0.5;
        j["n_classes"] = 20;
        j["l_max"] = 2;
        j["t_max"] = 50;
        j["train_per_class"] = 10;
        j["test_per_class"] = 5;
        j["repetitions"] = 3;
        j["batches"] = 10;
        j["s_list"] = {1e10};
        j["k_list"] = int_range(0, 15);
        j["learning"] = default_learning(800);
    } else if (scenario == "face") {
        j["methods"] = {"orthogonalized-spade"};
        j["data_dir"] = "data/faces";
        j["segments"] = 3;
        j["interval"] = 10.0;
        j["source_size"] = 0.1;
        j["l_max"] = 2;
        j["t_max"] = 50;
        j["train_per_class"] = 9;
        j["repetitions"] = 20;
        j["s_list"] = {1e6, 1e8, 1e10};
        j["k_list"] = int_range(0, 16);
        j["learning"] = default_learning(800);
    } else if (scenario == "discriminate") {
        j["methods"] = {"direct", "binary-spade"};
        j["d_sep"] = 0.6;
        j["alpha_list"] = log_spaced(1e-2, 1e-1, 5);
        j["xi"] = 1.0;
        j["t_max"] = 50;
        j["trials"] = 400;
        j["s_auto_scale"] = 2.0;
    } else {
        throw std::invalid_argument("unknown scenario: " + scenario);
    }
    return j;
}

Json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw; // unquoted strings stay strings

    Json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw std::invalid_argument("override has an empty path segment: " + assignment);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (!node->is_object() && !node->is_null())
            throw std::invalid_argument("override path crosses a non-object: " + assignment);
        start = dot + 1;
    }
}

Json merged_with_defaults(const Json& config) {
    if (!config.is_object()) throw std::invalid_argument("config must be a JSON object");
    if (!config.contains("scenario") || !config.at("scenario").is_string())
        throw std::invalid_argument("config.scenario: required string");
    Json merged = default_config(config.at("scenario").get<std::string>());
    merged.merge_patch(config);
    return merged;
}

// --- validation ---------------------------------------------------------

namespace {

class Checker {
  public:
    explicit Checker(const Json& cfg) : cfg_(cfg) {}

    std::vector<std::string> problems;

    void unknown_keys(const Json& defaults) {
        for (const auto& [key, value] : cfg_.items()) {
            if (!defaults.contains(key)) {
                problems.push_back(key + ": unknown key");
                continue;
            }
            if (defaults.at(key).is_object() && value.is_object())
                for (const auto& [sub, sval] : value.items()) {
                    (void)sval;
                    if (!defaults.at(key).contains(sub))
                        problems.push_back(key + "." + sub + ": unknown key");
                }
        }
    }

    double number(const std::string& key, double lo, double hi) {
        const Json* v = fetch(key);
        if (!v) return lo;
        if (!v->is_number()) {
            problems.push_back(key + ": must be a number");
            return lo;
        }
        const double x = v->get<double>();
        if (x < lo || x > hi)
            problems.push_back(key + ": out of range [" + CsvFile::num(lo) + ", " +
                               CsvFile::num(hi) + "]");
        return x;
    }

    int integer(const std::string& key, int lo, int hi) {
        const Json* v = fetch(key);
        if (!v) return lo;
        if (!v->is_number_integer()) {
            problems.push_back(key + ": must be an integer");
            return lo;
        }
        const int x = v->get<int>();
        if (x < lo || x > hi)
            problems.push_back(key + ": out of range [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "]");
        return x;
    }

    std::string text(const std::string& key) {
        const Json* v = fetch(key);
        if (!v) return {};
        if (!v->is_string() || v->get<std::string>().empty()) {
            problems.push_back(key + ": must be a nonempty string");
            return {};
        }
        return v->get<std::string>();
    }

    std::vector<double> number_list(const std::string& key, double lo, double hi,
                                    std::size_t min_len = 1) {
        std::vector<double> out;
        const Json* v = fetch(key);
        if (!v) return out;
        if (!v->is_array() || v->size() < min_len) {
            problems.push_back(key + ": must be an array with at least " +
                               std::to_string(min_len) + " entries");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            const Json& e = (*v)[i];
            if (!e.is_number()) {
                problems.push_back(key + "[" + std::to_string(i) + "]: must be a number");
                continue;
            }
            const double x = e.get<double>();
            if (x < lo || x > hi)
                problems.push_back(key + "[" + std::to_string(i) + "]: out of range");
            out.push_back(x);
        }
        return out;
    }

    std::vector<int> int_list(const std::string& key, int lo, int hi) {
        std::vector<int> out;
        const Json* v = fetch(key);
        if (!v) return out;
        if (!v->is_array() || v->empty()) {
            problems.push_back(key + ": must be a nonempty array");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            const Json& e = (*v)[i];
            if (!e.is_number_integer()) {
                problems.push_back(key + "[" + std::to_string(i) + "]: must be an integer");
                continue;
            }
            const int x = e.get<int>();
            if (x < lo || x > hi)
                problems.push_back(key + "[" + std::to_string(i) + "]: out of range");
            out.push_back(x);
        }
        return out;
    }

    std::vector<std::string> methods(const std::set<std::string>& allowed) {
        std::vector<std::string> out;
        const Json* v = fetch("methods");
        if (!v) return out;
        if (!v->is_array() || v->empty()) {
            problems.push_back("methods: must be a nonempty array");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            const Json& e = (*v)[i];
            if (!e.is_string() || !allowed.count(e.get<std::string>())) {
                problems.push_back("methods[" + std::to_string(i) +
                                   "]: not valid for this scenario");
                continue;
            }
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    void learning() {
        if (!cfg_.contains("learning")) return;
        const Json& l = cfg_.at("learning");
        if (!l.is_object()) {
            problems.push_back("learning: must be an object");
            return;
        }
        sub_number(l, "learning.learning_rate", "learning_rate", 1e-12, 1e6);
        sub_number(l, "learning.l2", "l2", 0.0, 1e6);
        sub_integer(l, "learning.max_epochs", "max_epochs", 1);
        sub_number(l, "learning.grad_tol", "grad_tol", 0.0, 1.0);
    }

    void seed_and_output() {
        const Json* s = fetch("seed");
        if (s && (!s->is_number_integer() || s->get<std::int64_t>() < 0))
            problems.push_back("seed: must be a nonnegative integer");
        text("output_dir");
    }

  private:
    const Json& cfg_;

    const Json* fetch(const std::string& key) {
        if (!cfg_.contains(key)) {
            problems.push_back(key + ": required");
            return nullptr;
        }
        return &cfg_.at(key);
    }

    void sub_number(const Json& obj, const std::string& path, const std::string& key, double lo,
                    double hi) {
        if (!obj.contains(key)) {
            problems.push_back(path + ": required");
            return;
        }
        if (!obj.at(key).is_number() || obj.at(key).get<double>() < lo ||
            obj.at(key).get<double>() > hi)
            problems.push_back(path + ": out of range");
    }

    void sub_integer(const Json& obj, const std::string& path, const std::string& key, int lo) {
        if (!obj.contains(key)) {
            problems.push_back(path + ": required");
            return;
        }
        if (!obj.at(key).is_number_integer() || obj.at(key).get<int>() < lo)
            problems.push_back(path + ": must be an integer >= " + std::to_string(lo));
    }
};

} // namespace

std::vector<std::string> validate_config(const Json& merged_config) {
    std::vector<std::string> problems;
    if (!merged_config.is_object()) return {"config must be a JSON object"};
    if (!merged_config.contains("scenario") || !merged_config.at("scenario").is_string())
        return {"scenario: required string"};
    const std::string scn = merged_config.at("scenario").get<std::string>();
    const auto names = scenario_names();
    if (std::find(names.begin(), names.end(), scn) == names.end())
        return {"scenario: unknown value '" + scn + "'"};

    Checker c(merged_config);
    c.unknown_keys(default_config(scn));
    c.seed_and_output();
    const double sigma = c.number("sigma", 1e-9, 1e9);

    if (scn == "two-point") {
        c.number("xi", 1e-9, 1e9);
        c.number_list("gamma_list", 1e-9, 1e9);
        c.integer("n_quad", 2, 100000);
        c.number("prior_halfwidth", 1e-3, 100.0);
    } else if (scn == "single-source") {
        c.methods({"direct", "spade"});
        c.number_list("alpha_list", 1e-9, 1e3);
        c.integer("n_max", 1, 100000);
        c.integer("w_scenes", 2, 1000000);
        c.integer("l_max", 1, kMaxDerivativeOrder);
        c.integer("t_max", 1, 100000);
        if (merged_config.contains("s_grid") && merged_config.at("s_grid").is_object()) {
            Checker g(merged_config.at("s_grid"));
            const double lo = g.number("min_exp", -6.0, 20.0);
            const double hi = g.number("max_exp", -6.0, 20.0);
            g.integer("per_decade", 1, 1000);
            if (g.problems.empty() && hi <= lo)
                g.problems.push_back("max_exp: must exceed min_exp");
            for (const auto& p : g.problems) c.problems.push_back("s_grid." + p);
        } else {
            c.problems.push_back("s_grid: required object");
        }
    } else if (scn == "multi-source") {
        c.methods({"direct", "separate-spade", "orthogonalized-spade"});
        const int q = c.integer("q", 2, 64);
        const auto intervals = c.number_list("interval_list", 1e-9, 1e9);
        const auto alphas = c.number_list("alpha_list", 1e-9, 1e3);
        c.integer("n_max", 1, 100000);
        c.integer("w_scenes", 2, 1000000);
        c.integer("l_max", 1, kMaxDerivativeOrder);
        c.integer("t_max", 1, 100000);
        if (c.problems.empty())
            for (const double interval : intervals) {
                const double gap = interval / q;
                for (const double a : alphas)
                    if (a * sigma >= gap)
                        c.problems.push_back(
                            "alpha_list: alpha*sigma must stay below the centroid gap " +
                            CsvFile::num(gap));
            }
    } else if (scn == "general-source") {
        c.methods({"direct", "spade"});
        c.number("source_size", 1e-9, 1e9);
        c.integer("n_pixels", 2, 1000000);
        c.integer("w_scenes", 2, 1000000);
        c.integer("l_max", 1, kMaxDerivativeOrder);
        c.integer("t_max", 1, 100000);
        c.integer("n_task_dump", 1, 10000);
        if (merged_config.contains("s_grid") && merged_config.at("s_grid").is_object()) {
            Checker g(merged_config.at("s_grid"));
            const double lo = g.number("min_exp", -6.0, 20.0);
            const double hi = g.number("max_exp", -6.0, 20.0);
            g.integer("per_decade", 1, 1000);
            if (g.problems.empty() && hi <= lo)
                g.problems.push_back("max_exp: must exceed min_exp");
            for (const auto& p : g.problems) c.problems.push_back("s_grid." + p);
        } else {
            c.problems.push_back("s_grid: required object");
        }
    } else if (scn == "classify-qr") {
        const double size = c.number("source_size", 1e-9, 1e9);
        c.integer("n_pixels", 2, 1000000);
        c.number("p0", 1e-9, 1.0);
        c.integer("t_max", 1, 100000);
        c.integer("w_train", 2, 1000000);
        c.integer("w_test", 1, 1000000);
        c.integer("repetitions", 1, 100000);
        c.number_list("s_list", 1.0, 1e18);
        c.int_list("k_list", 0, 100000);
        c.learning();
        const Json* blocks = merged_config.contains("eta_blocks") ? &merged_config.at("eta_blocks") : nullptr;
        if (!blocks || !blocks->is_array() || blocks->empty())
            c.problems.push_back("eta_blocks: must be a nonempty array of [lo, hi] pairs");
        else
            for (std::size_t i = 0; i < blocks->size(); ++i) {
                const Json& b = (*blocks)[i];
                if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number() ||
                    !(b[0].get<double>() < b[1].get<double>()))
                    c.problems.push_back("eta_blocks[" + std::to_string(i) +
                                         "]: must be [lo, hi] with lo < hi");
                else if (b[0].get<double>() < -size / 2 || b[1].get<double>() > size / 2)
                    c.problems.push_back("eta_blocks[" + std::to_string(i) +
                                         "]: outside the source interval");
            }
    } else if (scn == "classify-multisource") {
        c.methods({"direct", "separate-spade", "orthogonalized-spade"});
        const int q = c.integer("q", 2, 64);
        const double interval = c.number("interval", 1e-9, 1e9);
        const double alpha = c.number("alpha", 1e-9, 1e3);
        c.integer("n_max", 1, 100000);
        c.number("p0", 1e-9, 1.0);
        c.integer("n_classes", 2, 100000);
        c.integer("l_max", 1, kMaxDerivativeOrder);
        c.integer("t_max", 1, 100000);
        c.integer("train_per_class", 1, 1000000);
        c.integer("test_per_class", 1, 1000000);
        c.integer("repetitions", 1, 100000);
        c.integer("batches", 1, 100000);
        c.number_list("s_list", 1.0, 1e18);
        c.int_list("k_list", 0, 100000);
        c.learning();
        if (c.problems.empty() && alpha * sigma >= interval / q)
            c.problems.push_back("alpha: alpha*sigma must stay below the centroid gap " +
                                 CsvFile::num(interval / q));
    } else if (scn == "face") {
        c.methods({"direct", "separate-spade", "orthogonalized-spade"});
        c.text("data_dir");
        const int segments = c.integer("segments", 1, 4096);
        const double interval = c.number("interval", 1e-9, 1e9);
        const double size = c.number("source_size", 1e-9, 1e9);
        c.integer("l_max", 1, kMaxDerivativeOrder);
        c.integer("t_max", 1, 100000);
        c.integer("train_per_class", 1, 1000000);
        c.integer("repetitions", 1, 100000);
        c.number_list("s_list", 1.0, 1e18);
        c.int_list("k_list", 0, 100000);
        c.learning();
        if (c.problems.empty() && size * sigma >= interval / segments)
            c.problems.push_back("source_size: sources must be confined within their segments");
    } else if (scn == "discriminate") {
        c.methods({"direct", "binary-spade", "spade"});
        c.number("d_sep", 1e-9, 1e9);
        c.number_list("alpha_list", 1e-9, 1e3, 2);
        c.number("xi", 1e-9, 1e9);
        c.integer("t_max", 1, 100000);
        c.integer("trials", 1, 10000000);
        c.number("s_auto_scale", 1e-9, 1e9);
    }
    problems = std::move(c.problems);
    std::sort(problems.begin(), problems.end());
    problems.erase(std::unique(problems.begin(), problems.end()), problems.end());
    return problems;
}

// --- classification engine ----------------------------------------------

ClassificationRun run_classification(const SplitProvider& provider,
                                     const ClassificationSettings& settings) {
    if (settings.k_list.empty()) throw std::invalid_argument("classification: empty K list");
    if (settings.s_list.empty()) throw std::invalid_argument("classification: empty S list");
    if (settings.repetitions < 1)
        throw std::invalid_argument("classification: repetitions must be positive");

    ClassificationRun out;
    RecSpectrum spectrum;
    std::vector<ClassifierModel> models(settings.k_list.size());
    std::vector<FeatureScaler> scalers(settings.k_list.size());
    int n_tasks = 0;

    for (int rep = 0; rep < settings.repetitions; ++rep) {
        std::mt19937_64 split_rng(derive_seed(settings.seed, 1000 + rep));
        const SplitData split = provider(rep, split_rng);
        if (split.train_probs.empty() || split.test_probs.empty())
            throw std::runtime_error("classification: empty train or test split");
        if (split.train_probs.size() != split.train_labels.size() ||
            split.test_probs.size() != split.test_labels.size())
            throw std::runtime_error("classification: labels do not match examples");

        if (rep == 0 || settings.resplit) {
            PriorEnsemble ensemble;
            ensemble.prob_vectors = split.train_probs;
            Eigen::VectorXd D;
            Eigen::MatrixXd G;
            build_dg(ensemble, D, G);
            spectrum = solve_spectrum(D, G);
            n_tasks = spectrum.n_tasks();

            const int n_train = static_cast<int>(split.train_probs.size());
            Eigen::MatrixXd feats(n_train, n_tasks);
            for (int i = 0; i < n_train; ++i)
                feats.row(i) = eigentask_values(spectrum, split.train_probs[i]).transpose();

            // independent deterministic fits: worker count cannot change results
            parallel_for(settings.k_list.size(), [&](std::size_t ki) {
                const int k_eff = std::min(settings.k_list[ki], n_tasks - 1);
                const Eigen::MatrixXd sub = feats.leftCols(k_eff + 1);
                scalers[ki] = fit_scaler(sub);
                TaskDataset train{apply_scaler(scalers[ki], sub), split.train_labels,
                                  split.n_classes};
                models[ki] = train_softmax(train, settings.hyper);
            });

            if (rep == 0) {
                out.beta_sq = spectrum.beta_sq;
                out.n_tasks = n_tasks;
                out.c_t.clear();
                for (const double s : settings.s_list) out.c_t.push_back(total_rec(spectrum, s));
            }
        }

        const int n_test = static_cast<int>(split.test_probs.size());
        for (std::size_t si = 0; si < settings.s_list.size(); ++si) {
            const double s = settings.s_list[si];
            std::mt19937_64 samp_rng(
                derive_seed(settings.seed, 2000 + rep * 1000 + static_cast<int>(si)));
            const auto photons = static_cast<std::int64_t>(std::llround(s));
            Eigen::MatrixXd xi_hat(n_test, n_tasks);
            for (int i = 0; i < n_test; ++i) {
                const Eigen::VectorXd p = sanitize_probabilities(split.test_probs[i]);
                const CountVector counts = sample_counts(p, photons, samp_rng);
                xi_hat.row(i) =
                    eigentask_values(spectrum, empirical_probs(counts)).transpose();
            }
            for (std::size_t ki = 0; ki < settings.k_list.size(); ++ki) {
                const int k_eff = std::min(settings.k_list[ki], n_tasks - 1);
                int correct = 0;
                for (int i = 0; i < n_test; ++i) {
                    const Eigen::VectorXd f =
                        apply_scaler(scalers[ki], Eigen::VectorXd(xi_hat.row(i).head(k_eff + 1)));
                    if (predict_class(models[ki], f) == split.test_labels[static_cast<std::size_t>(i)])
                        ++correct;
                }
                out.cells.push_back({s, settings.k_list[ki], rep,
                                     static_cast<double>(correct) / n_test});
            }
        }
    }
    return out;
}

std::vector<AccuracySummary> summarize_accuracy(const std::vector<AccuracyCell>& cells) {
    std::map<std::pair<double, int>, std::vector<double>> groups;
    for (const auto& cell : cells) groups[{cell.s, cell.k}].push_back(cell.accuracy);
    std::vector<AccuracySummary> out;
    for (const auto& [key, vals] : groups) {
        AccuracySummary s;
        s.s = key.first;
        s.k = key.second;
        s.min = *std::min_element(vals.begin(), vals.end());
        s.max = *std::max_element(vals.begin(), vals.end());
        KahanSum acc;
        for (const double v : vals) acc.add(v);
        s.mean = acc.value() / static_cast<double>(vals.size());
        out.push_back(s);
    }
    return out;
}

AccuracySummary peak_accuracy(const std::vector<AccuracySummary>& summaries, double s) {
    const AccuracySummary* best = nullptr;
    for (const auto& row : summaries) {
        if (row.s != s) continue;
        if (!best || row.mean > best->mean) best = &row;
    }
    if (!best) throw std::invalid_argument("peak accuracy: no row at the requested S");
    return *best;
}

} // namespace recimaging
