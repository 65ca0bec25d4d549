#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "recimaging/learn.hpp"
#include "recimaging/povm.hpp"
#include "recimaging/rec.hpp"

namespace recimaging {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum class Method { Direct, BinarySpade, Spade, SeparateSpade, OrthogonalizedSpade };

Method method_from_name(const std::string& name);
std::string method_name(Method method);

// Measurement recipe shared by every scenario: which basis to build and the
// geometry it is matched to.
struct MeasurementGeometry {
    Method method = Method::Direct;
    PsfModel psf;
    std::vector<double> centroids;
    double source_size = 0.0;
    int l_max = 2;
    int t_max = 50;
    double region_pad = 5.0;   // detection region = centroid span +- pad*sigma
    double xi = 0.0;           // binary SPADE mode width; 0 -> psf.sigma
};

Povm make_povm(const MeasurementGeometry& geom);

// --- run artifacts ------------------------------------------------------

struct RunManifest {
    Json config;
    std::string hash;
    std::string version;
    double wall_seconds = 0.0;
};

RunManifest make_manifest(const Json& merged_config);
void write_manifest(const RunManifest& manifest, const std::string& out_dir);

// CSV writer: first line is `# manifest=<hash>`, second the header row.
class CsvFile {
  public:
    CsvFile(const std::string& path, const std::string& manifest_hash,
            const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);

    static std::string num(double v);
    static std::string num(int v);
    static std::string num(std::int64_t v);

  private:
    std::ofstream out_;
    std::size_t n_cols_;
    std::string path_;
};

// --- configuration ------------------------------------------------------

std::vector<std::string> scenario_names();
Json default_config(const std::string& scenario);
Json load_config_file(const std::string& path);

// Apply one `key.path=value` override; values parse as JSON when possible,
// otherwise as strings.
void apply_override(Json& config, const std::string& assignment);

// Defaults for the config's scenario, overlaid with the user's keys.
Json merged_with_defaults(const Json& config);

// Empty vector means valid; otherwise one message per problem.
std::vector<std::string> validate_config(const Json& merged_config);

// Runs the scenario and writes artifacts into config["output_dir"].
void run_experiment(const Json& merged_config);

// --- shared classification engine ---------------------------------------

struct SplitData {
    std::vector<Eigen::VectorXd> train_probs;
    std::vector<int> train_labels;
    std::vector<Eigen::VectorXd> test_probs;
    std::vector<int> test_labels;
    int n_classes = 0;
};

using SplitProvider = std::function<SplitData(int repetition, std::mt19937_64& rng)>;

struct ClassificationSettings {
    std::vector<int> k_list;       // eigentask truncation indices (K keeps tasks 0..K)
    std::vector<double> s_list;    // photons per test example
    int repetitions = 5;
    bool resplit = false;          // rebuild spectrum + models every repetition
    SoftmaxHyper hyper;
    std::uint64_t seed = 1;
};

struct AccuracyCell {
    double s = 0.0;
    int k = 0;
    int repetition = 0;
    double accuracy = 0.0;
};

struct ClassificationRun {
    std::vector<AccuracyCell> cells;
    Eigen::VectorXd beta_sq;       // spectrum of the first repetition's prior
    std::vector<double> c_t;       // C_T at each s, first repetition's prior
    int n_tasks = 0;
};

ClassificationRun run_classification(const SplitProvider& provider,
                                     const ClassificationSettings& settings);

struct AccuracySummary {
    double s = 0.0;
    int k = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

std::vector<AccuracySummary> summarize_accuracy(const std::vector<AccuracyCell>& cells);

// Best mean accuracy at a given s; returns the summary row of the peak.
AccuracySummary peak_accuracy(const std::vector<AccuracySummary>& summaries, double s);

}  // namespace recimaging
