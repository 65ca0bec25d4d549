#include "recimaging/learn.hpp"

#include <cmath>
#include <stdexcept>

namespace recimaging {

FeatureScaler fit_scaler(const Eigen::MatrixXd& features) {
    if (features.rows() == 0) throw std::invalid_argument("scaler: empty training set");
    FeatureScaler scaler;
    scaler.scale = features.cwiseAbs().colwise().mean();
    for (Eigen::Index k = 0; k < scaler.scale.size(); ++k)
        if (!(scaler.scale[k] > 0)) {
            scaler.scale[k] = 1.0;
            scaler.flagged.push_back(static_cast<int>(k));
        }
    return scaler;
}

Eigen::MatrixXd apply_scaler(const FeatureScaler& scaler, const Eigen::MatrixXd& features) {
    if (features.cols() != scaler.scale.size())
        throw std::invalid_argument("scaler: feature dimension mismatch");
    return features.array().rowwise() / scaler.scale.transpose().array();
}

Eigen::VectorXd apply_scaler(const FeatureScaler& scaler, const Eigen::VectorXd& feature) {
    if (feature.size() != scaler.scale.size())
        throw std::invalid_argument("scaler: feature dimension mismatch");
    return feature.cwiseQuotient(scaler.scale);
}

namespace {

void validate_dataset(const TaskDataset& data) {
    if (data.n_examples() == 0) throw std::invalid_argument("dataset: no examples");
    if (static_cast<int>(data.labels.size()) != data.n_examples())
        throw std::invalid_argument("dataset: labels/features length mismatch");
    if (data.n_classes < 2) throw std::invalid_argument("dataset: need at least two classes");
    for (int label : data.labels)
        if (label < 0 || label >= data.n_classes)
            throw std::invalid_argument("dataset: label outside [0, n_classes)");
}

/// Row-wise softmax probabilities and the mean cross-entropy, numerically stable.
double softmax_and_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                        Eigen::MatrixXd& probs) {
    probs.resizeLike(logits);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const Eigen::ArrayXd e = (logits.row(i).transpose().array() - m).exp();
        const double z = e.sum();
        probs.row(i) = (e / z).transpose();
        loss -= logits(i, labels[static_cast<std::size_t>(i)]) - m - std::log(z);
    }
    return loss / static_cast<double>(logits.rows());
}

struct Objective {
    const TaskDataset& data;
    const SoftmaxHyper& hyper;

    double loss(const Eigen::MatrixXd& W, const Eigen::VectorXd& b) const {
        const Eigen::MatrixXd logits =
            (data.features * W.transpose()).rowwise() + b.transpose();
        Eigen::MatrixXd probs;
        const double ce = softmax_and_loss(logits, data.labels, probs);
        return ce + 0.5 * hyper.l2 * W.squaredNorm();
    }

    double loss_and_grad(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, Eigen::MatrixXd& gW,
                         Eigen::VectorXd& gb) const {
        const Eigen::MatrixXd logits =
            (data.features * W.transpose()).rowwise() + b.transpose();
        Eigen::MatrixXd probs;
        const double ce = softmax_and_loss(logits, data.labels, probs);
        for (Eigen::Index i = 0; i < probs.rows(); ++i)
            probs(i, data.labels[static_cast<std::size_t>(i)]) -= 1.0;
        probs /= static_cast<double>(probs.rows());
        gW = probs.transpose() * data.features + hyper.l2 * W;
        gb = probs.colwise().sum();
        return ce + 0.5 * hyper.l2 * W.squaredNorm();
    }
};

} // namespace

double softmax_objective(const TaskDataset& train, const SoftmaxHyper& hyper,
                         const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
    validate_dataset(train);
    return Objective{train, hyper}.loss(W, b);
}

Eigen::VectorXd softmax_objective_gradient(const TaskDataset& train, const SoftmaxHyper& hyper,
                                           const Eigen::MatrixXd& W, const Eigen::VectorXd& b) {
    validate_dataset(train);
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    Objective{train, hyper}.loss_and_grad(W, b, gW, gb);
    Eigen::VectorXd flat(gW.size() + gb.size());
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < gW.rows(); ++r)
        for (Eigen::Index c = 0; c < gW.cols(); ++c) flat[at++] = gW(r, c);
    for (Eigen::Index r = 0; r < gb.size(); ++r) flat[at++] = gb[r];
    return flat;
}

ClassifierModel train_softmax(const TaskDataset& train, const SoftmaxHyper& hyper) {
    validate_dataset(train);
    const Objective obj{train, hyper};
    ClassifierModel model;
    model.W = Eigen::MatrixXd::Zero(train.n_classes, train.n_features());
    model.b = Eigen::VectorXd::Zero(train.n_classes);

    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    double loss = obj.loss_and_grad(model.W, model.b, gW, gb);
    double step = hyper.learning_rate;
    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        model.epochs_run = epoch;
        const double grad_sq = gW.squaredNorm() + gb.squaredNorm();
        model.final_grad_norm = std::sqrt(grad_sq);
        if (model.final_grad_norm < hyper.grad_tol) {
            model.converged = true;
            break;
        }
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            const Eigen::MatrixXd w_try = model.W - step * gW;
            const Eigen::VectorXd b_try = model.b - step * gb;
            const double trial = obj.loss(w_try, b_try);
            if (std::isnan(trial))
                throw std::runtime_error("softmax training diverged (loss NaN) at step size " +
                                         std::to_string(step));
            if (trial <= loss - 1e-4 * step * grad_sq) {
                model.W = w_try;
                model.b = b_try;
                loss = trial;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if (!accepted) break; // no descent direction at representable step sizes
        loss = obj.loss_and_grad(model.W, model.b, gW, gb);
        step = std::min(step * 2.0, hyper.learning_rate);
    }
    model.final_loss = loss;
    return model;
}

Eigen::VectorXd class_probabilities(const ClassifierModel& model, const Eigen::VectorXd& feature) {
    if (feature.size() != model.W.cols())
        throw std::invalid_argument("predict: feature dimension mismatch");
    Eigen::VectorXd logits = model.W * feature + model.b;
    const double m = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.array() - m).exp();
    return (e / e.sum()).matrix();
}

int predict_class(const ClassifierModel& model, const Eigen::VectorXd& feature) {
    const Eigen::VectorXd probs = class_probabilities(model, feature);
    int best = 0;
    for (int c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = c;
    return best;
}

double accuracy(const ClassifierModel& model, const TaskDataset& data) {
    validate_dataset(data);
    int hits = 0;
    for (int i = 0; i < data.n_examples(); ++i)
        if (predict_class(model, data.features.row(i).transpose()) ==
            data.labels[static_cast<std::size_t>(i)])
            ++hits;
    return static_cast<double>(hits) / data.n_examples();
}

TaskDataset augment_features(const Eigen::MatrixXd& prototypes, const Eigen::MatrixXd& sd,
                             int per_class, std::mt19937_64& rng) {
    if (prototypes.rows() != sd.rows() || prototypes.cols() != sd.cols())
        throw std::invalid_argument("augment: prototype/sd shape mismatch");
    if (per_class < 1) throw std::invalid_argument("augment: need at least one draw per class");
    const int n_classes = static_cast<int>(prototypes.rows());
    TaskDataset out;
    out.n_classes = n_classes;
    out.features.resize(static_cast<Eigen::Index>(n_classes) * per_class, prototypes.cols());
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Index row = 0;
    for (int c = 0; c < n_classes; ++c)
        for (int i = 0; i < per_class; ++i, ++row) {
            for (Eigen::Index k = 0; k < prototypes.cols(); ++k)
                out.features(row, k) = prototypes(c, k) + sd(c, k) * normal(rng);
            out.labels.push_back(c);
        }
    return out;
}

} // namespace recimaging
