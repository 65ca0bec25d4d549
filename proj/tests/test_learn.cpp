#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "recimaging/learn.hpp"
#include "recimaging/util.hpp"

using namespace recimaging;

namespace {

TaskDataset blob_dataset(int per_class, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    const std::vector<Eigen::Vector2d> centers = {
        {0.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}};
    TaskDataset data;
    data.n_classes = 3;
    data.features.resize(3 * per_class, 2);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per_class; ++i) {
            const int row = c * per_class + i;
            data.features(row, 0) = centers[static_cast<std::size_t>(c)][0] + noise(rng);
            data.features(row, 1) = centers[static_cast<std::size_t>(c)][1] + noise(rng);
            data.labels.push_back(c);
        }
    return data;
}

} // namespace

TEST_SUITE_BEGIN("learn");

TEST_CASE("analytic objective gradient matches central differences") {
    // ten random evaluation points; max relative error must stay below 1e-5
    std::mt19937_64 rng(606);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const TaskDataset data = blob_dataset(8, 1.5, 17);
    SoftmaxHyper hyper;
    hyper.l2 = 3e-3;

    const int n_classes = data.n_classes;
    const int n_features = data.n_features();
    const int dim = n_classes * n_features + n_classes;
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
        Eigen::MatrixXd W(n_classes, n_features);
        Eigen::VectorXd b(n_classes);
        for (int c = 0; c < n_classes; ++c) {
            for (int f = 0; f < n_features; ++f) W(c, f) = gauss(rng);
            b[c] = gauss(rng);
        }
        const Eigen::VectorXd grad = softmax_objective_gradient(data, hyper, W, b);
        REQUIRE(grad.size() == dim);

        const double h = 1e-6;
        for (int i = 0; i < dim; ++i) {
            auto shifted = [&](double delta) {
                Eigen::MatrixXd Ws = W;
                Eigen::VectorXd bs = b;
                if (i < n_classes * n_features)
                    Ws(i / n_features, i % n_features) += delta;
                else
                    bs[i - n_classes * n_features] += delta;
                return softmax_objective(data, hyper, Ws, bs);
            };
            const double fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            const double rel = std::abs(fd - grad[i]) / std::max(1e-8, std::abs(grad[i]));
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("training separates well-separated blobs perfectly") {
    const TaskDataset train = blob_dataset(30, 0.3, 5);
    const ClassifierModel model = train_softmax(train);
    CHECK(accuracy(model, train) == doctest::Approx(1.0));
    CHECK(model.epochs_run > 0);

    const TaskDataset test = blob_dataset(30, 0.3, 6);
    CHECK(accuracy(model, test) == doctest::Approx(1.0));

    // probabilities are a proper distribution
    const Eigen::VectorXd probs =
        class_probabilities(model, test.features.row(0).transpose());
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(probs.minCoeff() >= 0.0);
}

TEST_CASE("training is deterministic") {
    const TaskDataset train = blob_dataset(20, 0.8, 9);
    const ClassifierModel a = train_softmax(train);
    const ClassifierModel b = train_softmax(train);
    CHECK((a.W - b.W).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.b - b.b).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.epochs_run == b.epochs_run);
}

TEST_CASE("prediction ties resolve to the lowest class id") {
    ClassifierModel model;
    model.W = Eigen::MatrixXd::Zero(3, 2);
    model.b = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd x(2);
    x << 1.0, -1.0;
    CHECK(predict_class(model, x) == 0);
}

TEST_CASE("feature scaler flags zero-spread components and leaves them unscaled") {
    Eigen::MatrixXd f(4, 3);
    f << 1.0, 5.0, 0.0,
         -1.0, 5.0, 0.0,
         2.0, 5.0, 0.0,
         -2.0, 5.0, 0.0;
    const FeatureScaler scaler = fit_scaler(f);
    CHECK(scaler.scale[0] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(scaler.scale[1] == doctest::Approx(5.0).epsilon(1e-14));
    // only all-zero columns fall back to unit scale
    CHECK(scaler.scale[2] == 1.0);
    REQUIRE(scaler.flagged.size() == 1);
    CHECK(scaler.flagged[0] == 2);

    const Eigen::MatrixXd scaled = apply_scaler(scaler, f);
    CHECK(scaled(0, 0) == doctest::Approx(1.0 / 1.5).epsilon(1e-14));
    CHECK(scaled(0, 2) == 0.0);

    Eigen::VectorXd one(3);
    one << 3.0, 5.0, 0.0;
    const Eigen::VectorXd sv = apply_scaler(scaler, one);
    CHECK(sv[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("augmented features jitter prototypes deterministically") {
    Eigen::MatrixXd prototypes(2, 3);
    prototypes << 1.0, 2.0, 3.0,
                  -1.0, 0.0, 1.0;
    Eigen::MatrixXd sd = Eigen::MatrixXd::Constant(2, 3, 0.1);
    std::mt19937_64 rng_a(77), rng_b(77);
    const TaskDataset a = augment_features(prototypes, sd, 6, rng_a);
    const TaskDataset b = augment_features(prototypes, sd, 6, rng_b);
    REQUIRE(a.n_examples() == 12);
    REQUIRE(a.n_features() == 3);
    CHECK(a.n_classes == 2);
    CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.labels == b.labels);
    // labels follow the prototype rows
    CHECK(a.labels.front() == 0);
    CHECK(a.labels.back() == 1);
    // jitter stays near the prototypes at sd = 0.1
    for (int i = 0; i < 6; ++i)
        CHECK((a.features.row(i).transpose() - prototypes.row(0).transpose()).norm() < 1.5);

    // zero spread reproduces the prototypes exactly
    std::mt19937_64 rng_c(78);
    const TaskDataset exact =
        augment_features(prototypes, Eigen::MatrixXd::Zero(2, 3), 2, rng_c);
    CHECK((exact.features.row(0) - prototypes.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_SUITE_END();
