#include "recimaging/scene.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "recimaging/util.hpp"

namespace recimaging {

double Scene::total_intensity() const {
    KahanSum acc;
    for (const auto& src : sources)
        for (double v : src.pixels) acc.add(v);
    return acc.value();
}

std::vector<double> Scene::positions() const {
    std::vector<double> out;
    for (const auto& src : sources)
        for (int s = 0; s < src.n_pixels(); ++s) out.push_back(src.position(s));
    return out;
}

Eigen::VectorXd Scene::intensities() const {
    std::vector<double> out;
    for (const auto& src : sources)
        for (double v : src.pixels) out.push_back(v);
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void Scene::normalize() {
    const double total = total_intensity();
    if (!(total > 0)) throw std::runtime_error("scene: cannot normalize zero total intensity");
    for (auto& src : sources)
        for (double& v : src.pixels) v /= total;
}

Scene make_point_scene(const std::vector<double>& positions,
                       const std::vector<double>& intensities) {
    if (positions.size() != intensities.size())
        throw std::invalid_argument("point scene: positions/intensities length mismatch");
    Scene scene;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (intensities[i] < 0) throw std::invalid_argument("point scene: negative intensity");
        scene.sources.push_back(CompactSource{positions[i], 1e-9, {intensities[i]}});
    }
    scene.normalize();
    return scene;
}

MomentVector moments(const Scene& scene, int max_order) {
    if (max_order < 0) throw std::invalid_argument("moments: negative order");
    const int q_count = static_cast<int>(scene.sources.size());
    MomentVector mv;
    mv.x = Eigen::MatrixXd::Zero(q_count, max_order + 1);
    for (int q = 0; q < q_count; ++q) {
        const auto& src = scene.sources[q];
        std::vector<KahanSum> acc(max_order + 1);
        for (int s = 0; s < src.n_pixels(); ++s) {
            const double tau = (src.position(s) - src.centroid) / src.size;
            if (std::abs(tau) > 0.5 + 1e-12)
                throw std::runtime_error("moments: emitter outside the source extent");
            double p = 1.0;
            for (int n = 0; n <= max_order; ++n) {
                acc[n].add(src.pixels[s] * p);
                p *= tau;
            }
        }
        for (int n = 0; n <= max_order; ++n) mv.x(q, n) = acc[n].value();
    }
    return mv;
}

namespace {

constexpr int kRedrawBudget = 1000;

bool admissible(const SceneGeneratorConfig& cfg, double u) {
    if (cfg.zeta && !cfg.zeta(u)) return false;
    switch (cfg.draw_case) {
        case SceneGeneratorConfig::Case::Active: return !cfg.eta || cfg.eta(u);
        case SceneGeneratorConfig::Case::Inactive: return cfg.eta && !cfg.eta(u);
        case SceneGeneratorConfig::Case::Unrestricted: return true;
    }
    return true;
}

Scene skeleton(const SceneGeneratorConfig& cfg) {
    if (cfg.centroids.empty()) throw std::invalid_argument("scene generator: no sources");
    if (cfg.sizes.size() != cfg.centroids.size())
        throw std::invalid_argument("scene generator: sizes/centroids length mismatch");
    if (cfg.n_max < 1) throw std::invalid_argument("scene generator: n_max must be positive");
    if (cfg.p0 < 0 || cfg.p0 > 1) throw std::invalid_argument("scene generator: p0 outside [0,1]");
    Scene scene;
    for (std::size_t q = 0; q < cfg.centroids.size(); ++q)
        scene.sources.push_back(
            CompactSource{cfg.centroids[q], cfg.sizes[q], std::vector<double>(cfg.n_max, 0.0)});
    return scene;
}

template <typename DrawFn>
Scene draw_scene(const SceneGeneratorConfig& cfg, std::mt19937_64& rng, DrawFn&& draw) {
    Scene scene = skeleton(cfg);
    bool any_admissible = false;
    for (int attempt = 0; attempt < kRedrawBudget; ++attempt) {
        double total = 0.0;
        for (auto& src : scene.sources)
            for (int s = 0; s < src.n_pixels(); ++s) {
                const double u = src.position(s);
                if (!admissible(cfg, u)) {
                    src.pixels[s] = 0.0;
                    continue;
                }
                any_admissible = true;
                src.pixels[s] = draw(rng);
                total += src.pixels[s];
            }
        if (!any_admissible) throw std::runtime_error("scene generator: no admissible segments");
        if (total > 0) {
            scene.normalize();
            return scene;
        }
    }
    throw std::runtime_error("scene generator: redraw budget exhausted (all-zero draws)");
}

} // namespace

Scene generate_scene(const SceneGeneratorConfig& cfg, std::mt19937_64& rng) {
    return draw_scene(cfg, rng, [&cfg](std::mt19937_64& r) { return bernoulli(r, cfg.p0) ? 1.0 : 0.0; });
}

Scene generate_uniform_random_scene(const SceneGeneratorConfig& cfg, std::mt19937_64& rng) {
    return draw_scene(cfg, rng, [](std::mt19937_64& r) { return u01(r); });
}

namespace {

/// Reads PGM token stream: whitespace-separated, '#' comments to end of line.
std::string next_pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

std::vector<double> read_pgm(std::istream& in, const std::string& magic) {
    const std::string wtok = next_pgm_token(in), htok = next_pgm_token(in),
                      mtok = next_pgm_token(in);
    if (wtok.empty() || htok.empty() || mtok.empty())
        throw std::runtime_error("image: truncated PGM header");
    const long w = std::stol(wtok), h = std::stol(htok), maxval = std::stol(mtok);
    if (w <= 0 || h <= 0) throw std::runtime_error("image: bad PGM dimensions");
    if (maxval <= 0 || maxval > 65535) throw std::runtime_error("image: PGM maxval out of range");
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(w * h));
    if (magic == "P2") {
        for (long i = 0; i < w * h; ++i) {
            const std::string tok = next_pgm_token(in);
            if (tok.empty()) throw std::runtime_error("image: truncated P2 data");
            data.push_back(std::stod(tok));
        }
    } else { // P5: binary, one or two bytes per sample, big-endian
        const int bytes = maxval > 255 ? 2 : 1;
        for (long i = 0; i < w * h; ++i) {
            int hi = in.get();
            if (hi == EOF) throw std::runtime_error("image: truncated P5 data");
            long v = hi;
            if (bytes == 2) {
                int lo = in.get();
                if (lo == EOF) throw std::runtime_error("image: truncated P5 data");
                v = (v << 8) | lo;
            }
            data.push_back(static_cast<double>(v));
        }
    }
    return data;
}

std::vector<double> read_csv_matrix(std::istream& in) {
    std::vector<double> data;
    std::size_t cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::size_t n = 0;
        while (std::getline(row, cell, ',')) {
            data.push_back(std::stod(cell));
            ++n;
        }
        if (cols == 0)
            cols = n;
        else if (n != cols)
            throw std::runtime_error("image: ragged CSV matrix");
    }
    if (data.empty()) throw std::runtime_error("image: empty CSV matrix");
    return data;
}

} // namespace

Scene ingest_raster_image(const std::string& path, int segments,
                          const std::vector<std::pair<double, double>>& placement) {
    if (segments < 1) throw std::invalid_argument("image: need at least one segment");
    if (static_cast<int>(placement.size()) != segments)
        throw std::invalid_argument("image: placement list must have one (centroid,size) per segment");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("image: cannot open " + path);

    std::vector<double> flat;
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 == 'P' && (m1 == '2' || m1 == '5')) {
        flat = read_pgm(in, std::string{"P"} + m1);
    } else {
        in.seekg(0);
        flat = read_csv_matrix(in);
    }
    for (double v : flat)
        if (v < 0) throw std::runtime_error("image: negative sample value");
    if (flat.size() % static_cast<std::size_t>(segments) != 0)
        throw std::runtime_error("image: pixel count not divisible by segment count");

    const std::size_t per = flat.size() / segments;
    Scene scene;
    for (int m = 0; m < segments; ++m) {
        CompactSource src;
        src.centroid = placement[m].first;
        src.size = placement[m].second;
        if (src.size <= 0) throw std::invalid_argument("image: placement size must be positive");
        src.pixels.assign(flat.begin() + static_cast<long>(m * per),
                          flat.begin() + static_cast<long>((m + 1) * per));
        scene.sources.push_back(std::move(src));
    }
    scene.normalize();
    return scene;
}

std::string scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["sources"] = nlohmann::json::array();
    for (const auto& src : scene.sources)
        j["sources"].push_back(
            {{"centroid", src.centroid}, {"size", src.size}, {"pixels", src.pixels}});
    return j.dump();
}

Scene scene_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Scene scene;
    for (const auto& js : j.at("sources"))
        scene.sources.push_back(CompactSource{js.at("centroid").get<double>(),
                                              js.at("size").get<double>(),
                                              js.at("pixels").get<std::vector<double>>()});
    return scene;
}

} // namespace recimaging
