#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "recimaging/povm.hpp"

using namespace recimaging;

namespace {

const PsfModel kPsf{.sigma = 1.0};

double column_sum(const Eigen::MatrixXd& kernel, int col) { return kernel.col(col).sum(); }

} // namespace

TEST_SUITE_BEGIN("povm");

TEST_CASE("every family is complete: probabilities sum to one at any position") {
    const std::vector<double> positions = {-1.7, -0.3, 0.0, 0.42, 2.9};
    std::vector<Povm> povms;
    povms.push_back(build_direct_imaging(kPsf, -8.0, 8.0, 40));
    povms.push_back(build_binary_spade(1.0, 1.0, 0.0, default_grid({0.0}, 1.0)));
    povms.push_back(build_spade_single(kPsf, 0.1, 0.5, 3, default_grid({0.1}, 1.0)));
    povms.push_back(
        build_separate_spade(kPsf, {-1.0, 1.0}, 0.3, 2, default_grid({-1.0, 1.0}, 1.0)));
    povms.push_back(
        build_orthogonalized_spade(kPsf, {-1.0, 1.0}, 0.3, 2, default_grid({-1.0, 1.0}, 1.0)));

    for (const Povm& povm : povms) {
        const Eigen::MatrixXd kernel = exact_probability_kernel(povm, positions);
        REQUIRE(kernel.rows() == povm.n_probs());
        for (std::size_t s = 0; s < positions.size(); ++s) {
            CHECK(column_sum(kernel, static_cast<int>(s)) == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(kernel.col(static_cast<int>(s)).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("direct imaging pixel probabilities are plain psf-squared integrals") {
    // odd pixel count so one pixel straddles the emitter
    const Povm povm = build_direct_imaging(kPsf, -6.0, 6.0, 25);
    const Eigen::MatrixXd kernel = exact_probability_kernel(povm, {0.0});
    int peak = 0;
    kernel.col(0).head(povm.n_probs() - 1).maxCoeff(&peak);
    const auto& spec = povm.outcomes[static_cast<std::size_t>(peak)];
    CHECK(spec.pixel_lo < 0.0);
    CHECK(spec.pixel_hi > 0.0);
    // sink holds only the mass outside the detection region
    const double outside =
        1.0 - 0.5 * (std::erf(6.0 / (std::sqrt(2.0) * 1.0)) - std::erf(-6.0 / (std::sqrt(2.0))));
    CHECK(kernel(povm.n_probs() - 1, 0) == doctest::Approx(outside).epsilon(1e-8));
}

TEST_CASE("binary spade matches the two-point closed form at xi = sigma") {
    const Povm povm = build_binary_spade(1.0, 1.0, 0.0, default_grid({0.0}, 1.0));
    for (const double L : {0.1, 0.5, 1.0, 2.0}) {
        const Eigen::MatrixXd kernel = exact_probability_kernel(povm, {-L / 2.0, L / 2.0});
        const double p0 = 0.5 * (kernel(0, 0) + kernel(0, 1));
        CHECK(p0 == doctest::Approx(std::exp(-L * L / 16.0)).epsilon(1e-10));
    }
}

TEST_CASE("binary spade mode probability for general xi") {
    // |<mode_xi | psi(.-u)>|^2 = (2 xi sigma/(xi^2+sigma^2)) exp(-u^2/(2(xi^2+sigma^2)))
    const double xi = 0.7;
    const Povm povm = build_binary_spade(1.0, xi, 0.0, default_grid({0.0}, 1.0, 8001));
    const double u = 0.9;
    const Eigen::MatrixXd kernel = exact_probability_kernel(povm, {u});
    const double denom = xi * xi + 1.0;
    const double expected = (2.0 * xi / denom) * std::exp(-u * u / (2.0 * denom));
    CHECK(kernel(0, 0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("exact_probabilities agrees with the kernel applied to intensities") {
    const Povm povm = build_spade_single(kPsf, 0.0, 0.4, 2, default_grid({0.0}, 1.0));
    const Scene scene = make_point_scene({-0.1, 0.05, 0.2}, {0.2, 0.5, 0.3});
    const Eigen::VectorXd direct = exact_probabilities(povm, scene);
    const Eigen::MatrixXd kernel = exact_probability_kernel(povm, scene.positions());
    const Eigen::VectorXd via_kernel = kernel * scene.intensities();
    CHECK((direct - via_kernel).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("moment expansion converges to the exact probabilities as order grows") {
    const double alpha = 0.05;
    const Povm povm = build_spade_single(kPsf, 0.0, alpha, 2, default_grid({0.0}, 1.0));
    Scene scene;
    scene.sources.push_back(CompactSource{0.0, alpha, {0.4, 0.0, 0.0, 0.6}});
    scene.normalize();
    const Eigen::VectorXd exact = exact_probabilities(povm, scene);

    const std::vector<SourceGeometry> geom = {{0.0, alpha}};
    double prev_err = 1e9;
    for (int order : {2, 4, 6}) {
        const CoeffTensor tensor = coefficient_tensor(povm, geom, order);
        const Eigen::VectorXd series =
            moment_probabilities(tensor, moments(scene, order), alpha);
        const double err = (series - exact).cwiseAbs().maxCoeff();
        CHECK(err < prev_err * 1.1);
        prev_err = err;
    }
    CHECK(prev_err < 1e-8);
}

TEST_CASE("orthogonalized and separate families coincide for far-apart sources") {
    const std::vector<double> far = {-10.0, 10.0};
    const Grid grid = default_grid(far, 1.0);
    const Povm sep = build_separate_spade(kPsf, far, 0.2, 2, grid);
    const Povm orth = build_orthogonalized_spade(kPsf, far, 0.2, 2, grid);
    REQUIRE(sep.n_probs() == orth.n_probs());
    const std::vector<double> positions = {-10.05, -9.95, 9.9, 10.1};
    const Eigen::MatrixXd ks = exact_probability_kernel(sep, positions);
    const Eigen::MatrixXd ko = exact_probability_kernel(orth, positions);
    // mode shapes coincide; the separate family halves each outcome weight
    // again (1/(2Q) vs 1/2) because per-source modes may overlap in general
    const int modes = sep.n_probs() - 1;
    CHECK((2.0 * ks.topRows(modes) - ko.topRows(modes)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("single-centroid families reduce to the single-source family") {
    const Grid grid = default_grid({0.0}, 1.0);
    const Povm single = build_spade_single(kPsf, 0.0, 0.3, 2, grid);
    const Povm sep = build_separate_spade(kPsf, {0.0}, 0.3, 2, grid);
    const Povm orth = build_orthogonalized_spade(kPsf, {0.0}, 0.3, 2, grid);
    const std::vector<double> positions = {-0.12, 0.07};
    const Eigen::MatrixXd k1 = exact_probability_kernel(single, positions);
    const Eigen::MatrixXd k2 = exact_probability_kernel(sep, positions);
    const Eigen::MatrixXd k3 = exact_probability_kernel(orth, positions);
    // separate/orthogonalized weight per-source families by 1/(2Q) vs 1/2 single
    REQUIRE(k1.rows() == k2.rows());
    CHECK((k1 - k2).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((k2 - k3).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("povm json descriptor carries the identifying metadata") {
    const Povm povm = build_binary_spade(1.0, 0.8, 0.25, default_grid({0.25}, 1.0));
    const std::string json = povm_to_json(povm);
    CHECK(json.find("binary") != std::string::npos);
    CHECK(json.find("0.8") != std::string::npos);
    const Povm direct = build_direct_imaging(kPsf, -4.0, 4.0, 16);
    CHECK(povm_to_json(direct).find("pixel_edges") != std::string::npos);
}

TEST_CASE("labels cover every probability entry including the sink") {
    const Povm povm = build_separate_spade(kPsf, {-1.0, 1.0}, 0.3, 2, default_grid({-1.0, 1.0}, 1.0));
    const auto labels = povm.labels();
    CHECK(static_cast<int>(labels.size()) == povm.n_probs());
    CHECK(labels.back().find("sink") != std::string::npos);
}

TEST_SUITE_END();
