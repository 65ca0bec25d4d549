#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <string>
#include <vector>

#include "recimaging/discrim.hpp"
#include "recimaging/experiment.hpp"
#include "recimaging/rec.hpp"
#include "recimaging/sampling.hpp"
#include "recimaging/scenarios.hpp"

namespace py = pybind11;
using namespace recimaging;

namespace {

Povm make_povm_py(const std::string& method, double sigma, const std::vector<double>& centroids,
                  double source_size, int l_max, int t_max, double xi) {
    MeasurementGeometry geom;
    geom.method = method_from_name(method);
    geom.psf = PsfModel{.sigma = sigma};
    geom.centroids = centroids;
    geom.source_size = source_size;
    geom.l_max = l_max;
    geom.t_max = t_max;
    geom.xi = xi;
    return make_povm(geom);
}

RecSpectrum spectrum_from_probs(const Eigen::MatrixXd& prob_rows,
                                const std::vector<double>& weights) {
    PriorEnsemble ens;
    ens.weights = weights;
    ens.prob_vectors.reserve(static_cast<std::size_t>(prob_rows.rows()));
    for (Eigen::Index w = 0; w < prob_rows.rows(); ++w)
        ens.prob_vectors.push_back(prob_rows.row(w).transpose());
    Eigen::VectorXd D;
    Eigen::MatrixXd G;
    build_dg(ens, D, G);
    return solve_spectrum(D, G);
}

std::vector<std::int64_t> sample_counts_py(const Eigen::VectorXd& p, std::int64_t total,
                                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_counts(sanitize_probabilities(p), total, rng).counts;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Reconstruction-capacity experiments for diffraction-limited imaging";
    m.attr("__version__") = RECIMAGING_VERSION;

    py::class_<Povm>(m, "Povm")
        .def_property_readonly("n_probs", &Povm::n_probs)
        .def_property_readonly("labels", &Povm::labels)
        .def("__repr__", [](const Povm& p) {
            return "<Povm " + povm_kind_name(p.kind) + " with " + std::to_string(p.n_probs()) +
                   " outcomes>";
        });

    py::class_<RecSpectrum>(m, "RecSpectrum")
        .def_readonly("beta_sq", &RecSpectrum::beta_sq)
        .def_readonly("lam", &RecSpectrum::lambda)
        .def_readonly("R", &RecSpectrum::R)
        .def_readonly("kept_outcomes", &RecSpectrum::kept_outcomes)
        .def_property_readonly("n_tasks", &RecSpectrum::n_tasks);

    m.def("make_povm", &make_povm_py, py::arg("method"), py::arg("sigma"), py::arg("centroids"),
          py::arg("source_size"), py::arg("l_max") = 2, py::arg("t_max") = 50,
          py::arg("xi") = 0.0,
          "Build the measurement for a method name and source geometry");
    m.def("probability_kernel", &exact_probability_kernel, py::arg("povm"), py::arg("positions"),
          "Outcome probability per unit intensity for point emitters at the given positions");
    m.def("rec_spectrum", &spectrum_from_probs, py::arg("prob_rows"),
          py::arg("weights") = std::vector<double>{},
          "Eigentask spectrum of an ensemble of probability vectors (rows)");
    m.def("total_rec", &total_rec, py::arg("spectrum"), py::arg("photons"),
          "Total reconstruction capacity at the given photon budget");
    m.def("eigentask_values", &eigentask_values, py::arg("spectrum"), py::arg("probs"),
          "Eigentask readouts for one probability vector");
    m.def("sample_counts", &sample_counts_py, py::arg("probs"), py::arg("photons"),
          py::arg("seed"), "Multinomial photon counts, summing exactly to `photons`");
    m.def("chernoff_exponent", &chernoff_exponent, py::arg("p0"), py::arg("p1"),
          "Classical Chernoff exponent between two outcome distributions");

    m.def("scenario_names", &scenario_names);
    m.def("default_config_json",
          [](const std::string& scenario) { return default_config(scenario).dump(); });
    m.def("merged_with_defaults_json",
          [](const std::string& text) { return merged_with_defaults(Json::parse(text)).dump(); });
    m.def("validate_config_json",
          [](const std::string& text) { return validate_config(Json::parse(text)); });
    m.def("run_experiment_json",
          [](const std::string& text) { run_experiment(Json::parse(text)); });
}
