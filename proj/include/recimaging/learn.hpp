#pragma once

#include <Eigen/Core>
#include <random>
#include <vector>

namespace recimaging {

/// Per-component mean absolute value over the training set; zero-spread
/// components keep scale 1 and are flagged.
struct FeatureScaler {
    Eigen::VectorXd scale;
    std::vector<int> flagged;
};

/// rows: examples, cols: feature components
FeatureScaler fit_scaler(const Eigen::MatrixXd& features);

Eigen::MatrixXd apply_scaler(const FeatureScaler& scaler, const Eigen::MatrixXd& features);
Eigen::VectorXd apply_scaler(const FeatureScaler& scaler, const Eigen::VectorXd& feature);

/// Truncated eigentask vectors with class labels.
struct TaskDataset {
    Eigen::MatrixXd features; ///< rows: examples, cols: eigentasks 0..K
    std::vector<int> labels;
    int n_classes = 0;

    int n_examples() const { return static_cast<int>(features.rows()); }
    int n_features() const { return static_cast<int>(features.cols()); }
};

struct SoftmaxHyper {
    double learning_rate = 1.0; ///< initial backtracking step
    double l2 = 1e-4;           ///< applied to W only
    int max_epochs = 5000;
    double grad_tol = 1e-6;
};

struct ClassifierModel {
    Eigen::MatrixXd W; ///< n_classes x n_features
    Eigen::VectorXd b;
    int epochs_run = 0;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
    bool converged = false;
};

/// Full-batch gradient descent with backtracking line search on mean
/// cross-entropy + (l2/2)||W||^2. Deterministic: zero init, fixed order.
ClassifierModel train_softmax(const TaskDataset& train, const SoftmaxHyper& hyper = {});

Eigen::VectorXd class_probabilities(const ClassifierModel& model, const Eigen::VectorXd& feature);

/// argmax of the softmax; ties resolve to the lowest class id.
int predict_class(const ClassifierModel& model, const Eigen::VectorXd& feature);

double accuracy(const ClassifierModel& model, const TaskDataset& data);

/// Analytic gradient of the training objective, flattened (W row-major, then b);
/// exposed for finite-difference verification.
Eigen::VectorXd softmax_objective_gradient(const TaskDataset& train, const SoftmaxHyper& hyper,
                                           const Eigen::MatrixXd& W, const Eigen::VectorXd& b);

double softmax_objective(const TaskDataset& train, const SoftmaxHyper& hyper,
                         const Eigen::MatrixXd& W, const Eigen::VectorXd& b);

/// Synthetic training features: Gaussian jitter around each class prototype
/// with per-component standard deviations; labels follow the prototypes.
TaskDataset augment_features(const Eigen::MatrixXd& prototypes, const Eigen::MatrixXd& sd,
                             int per_class, std::mt19937_64& rng);

} // namespace recimaging
