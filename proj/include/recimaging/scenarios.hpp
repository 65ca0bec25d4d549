#pragma once

#include <string>
#include <vector>

#include "recimaging/experiment.hpp"

namespace recimaging {

// Scenario runners are pure given the merged config (no filesystem writes);
// run_experiment in the CLI layer adds CSV/manifest emission around them.

struct TwoPointRow {
    double gamma = 0.0;
    double d00 = 0.0;
    double beta1_sq = 0.0;
    double lambda1 = 0.0;
    double series = 0.0; ///< small-gamma expansion of beta_1^2
    bool censored = false;
};

struct TwoPointResult {
    std::vector<TwoPointRow> rows;
    double sigma = 1.0;
    double xi = 1.0;
};

TwoPointResult run_two_point(const Json& cfg);

/// One solved spectrum; interval = centroid span (0 for single-source runs).
struct SpectrumRecord {
    std::string method;
    double alpha = 0.0;
    double interval = 0.0;
    RecSpectrum spectrum;
};

struct SlopeRow {
    std::string method;
    double interval = 0.0;
    int k = 0;
    double slope = 0.0;
    int n_points = 0;
};

struct CtRow {
    std::string method;
    double alpha = 0.0;
    double s = 0.0;
    double c_t = 0.0;
    double c_t_trace = 0.0;
};

struct SingleSourceResult {
    std::vector<SpectrumRecord> records;
    std::vector<SlopeRow> slopes;
    std::vector<CtRow> ct_rows;
};

SingleSourceResult run_single_source(const Json& cfg);

struct MultiSourceResult {
    std::vector<SpectrumRecord> records;
    std::vector<SlopeRow> slopes;
};

MultiSourceResult run_multi_source(const Json& cfg);

struct GeneralSourceResult {
    std::vector<SpectrumRecord> records;
    std::vector<CtRow> ct_rows;
    /// task_profiles[m](j, k) = r_k at outcome j for method m (dumped tasks only)
    std::vector<Eigen::MatrixXd> task_profiles;
    /// task_values[m](w, k) = f_k on scene w
    std::vector<Eigen::MatrixXd> task_values;
    std::vector<std::vector<std::string>> outcome_labels;
};

GeneralSourceResult run_general_source(const Json& cfg);

struct ClassifyQrResult {
    std::vector<AccuracyCell> cells;
    std::vector<AccuracySummary> summaries;
    Eigen::VectorXd beta_sq;
    std::vector<double> s_list;
    std::vector<double> c_t; ///< per S
    int n_tasks = 0;
};

ClassifyQrResult run_classify_qr(const Json& cfg);

struct MethodBatchSummary {
    std::string method;
    int batch = 0;
    double s = 0.0;
    int peak_k = 0;
    double peak_mean = 0.0;
    double c_t = 0.0;
};

struct ClassifyMultiResult {
    struct Cell {
        std::string method;
        int batch = 0;
        AccuracyCell cell;
    };
    std::vector<Cell> cells;
    std::vector<MethodBatchSummary> peaks; ///< per method x batch x S
};

ClassifyMultiResult run_classify_multisource(const Json& cfg);

struct FaceResult {
    struct Cell {
        std::string method;
        AccuracyCell cell;
    };
    std::vector<Cell> cells;
    std::vector<std::string> methods;
    std::vector<std::vector<AccuracySummary>> summaries_by_method;
    int n_classes = 0;
    int n_images = 0;
};

FaceResult run_face(const Json& cfg);

struct DiscrimRow {
    std::string method;
    double alpha = 0.0;
    double separation = 0.0;
    std::int64_t s_used = 0;
    double chernoff = 0.0;
    double p_succ = 0.0;
    double varsigma = 0.0; ///< -log(1 - p_succ)/S, the empirical exponent per photon
};

struct DiscrimResult {
    std::vector<DiscrimRow> rows;
    std::vector<SlopeRow> slopes; ///< slope of log C vs log alpha, k unused (0)
};

DiscrimResult run_discriminate(const Json& cfg);

} // namespace recimaging
