// Python bindings for the ulrsim core: the uncertain-model primitives, the
// divergence/fit helpers, graph construction, and the experiment drivers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <string>
#include <vector>

#include "ulrsim/analysis.hpp"
#include "ulrsim/harness.hpp"
#include "ulrsim/network.hpp"
#include "ulrsim/uncertain_models.hpp"

namespace py = pybind11;
using namespace ulr;

namespace {

ObservationHistogram histogram_from(const std::vector<long long>& counts) {
  return ObservationHistogram::from_counts(counts);
}

FitModel fit_model_from(const std::string& name) {
  if (name == "linear") return FitModel::Linear;
  if (name == "linear_plus_log") return FitModel::LinearPlusLog;
  throw std::invalid_argument("fit model must be 'linear' or 'linear_plus_log', got '" + name +
                              "'");
}

std::string outcome_name(UlrOutcome outcome) {
  switch (outcome) {
    case UlrOutcome::Accept: return "accept";
    case UlrOutcome::Reject: return "reject";
    default: return "unsure";
  }
}

std::vector<CategoricalParams> params_from(const std::vector<std::vector<double>>& rows) {
  std::vector<CategoricalParams> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.emplace_back(row);
  return out;
}

py::dict ca_to_dict(const CaDivergence& d) {
  py::dict out;
  out["value"] = d.value;
  out["std_error"] = d.std_error;
  out["samples"] = d.samples;
  out["exact"] = d.exact;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Non-Bayesian social learning with uncertain statistical models";
  mod.attr("__version__") = kVersion;

  py::class_<EvidenceCounts>(mod, "EvidenceCounts")
      .def_static(
          "finite", [](const std::vector<double>& r) { return EvidenceCounts::finite(r); },
          py::arg("r"))
      .def_static(
          "certain",
          [](const std::vector<double>& pi) {
            return EvidenceCounts::certain_model(CategoricalParams(pi));
          },
          py::arg("pi"))
      .def_property_readonly("is_certain",
                             [](const EvidenceCounts& e) { return e.mode == EvidenceMode::Certain; })
      .def_property_readonly("categories", &EvidenceCounts::categories);

  py::class_<Topology>(mod, "Topology")
      .def_property_readonly("m", [](const Topology& g) { return g.m; })
      .def_property_readonly("edges", [](const Topology& g) { return g.edges; })
      .def_property_readonly("positions", [](const Topology& g) { return g.positions; })
      .def("degrees", &Topology::degrees)
      .def("is_connected", &Topology::is_connected)
      .def("is_complete", &Topology::is_complete)
      .def_static("complete", &Topology::complete, py::arg("m"))
      .def_static("ring", &Topology::ring, py::arg("m"));

  py::class_<MixingMatrix>(mod, "MixingMatrix")
      .def_property_readonly("m", [](const MixingMatrix& a) { return a.m; })
      .def_property_readonly("weights", [](const MixingMatrix& a) { return a.weights; })
      .def_property_readonly("eta", [](const MixingMatrix& a) { return a.eta; })
      .def_property_readonly("lambda_bound", [](const MixingMatrix& a) { return a.lambda_bound; })
      .def("at", &MixingMatrix::at, py::arg("i"), py::arg("j"));

  // --- uncertain-model primitives ------------------------------------------
  mod.def("log_beta", &log_beta, py::arg("alpha"));
  mod.def(
      "dirichlet_log_pdf",
      [](const std::vector<double>& pi, const EvidenceCounts& evidence) {
        return dirichlet_log_pdf(CategoricalParams(pi), evidence);
      },
      py::arg("pi"), py::arg("evidence"));
  mod.def(
      "log_posterior_predictive",
      [](const std::vector<long long>& n, const EvidenceCounts& evidence) {
        return log_posterior_predictive(histogram_from(n), evidence);
      },
      py::arg("n"), py::arg("evidence"));
  mod.def(
      "log_ulr",
      [](const std::vector<long long>& n, const EvidenceCounts& evidence) {
        return log_ulr(histogram_from(n), evidence);
      },
      py::arg("n"), py::arg("evidence"));
  mod.def(
      "log_likelihood_update",
      [](const std::vector<long long>& n_prev, int k, const EvidenceCounts& evidence,
         long long t) { return log_likelihood_update(histogram_from(n_prev), k, evidence, t); },
      py::arg("n_prev"), py::arg("k"), py::arg("evidence"), py::arg("t"));
  mod.def(
      "log_asymptotic_ulr",
      [](const EvidenceCounts& evidence, const std::vector<double>& ground_truth) {
        return log_asymptotic_ulr(evidence, CategoricalParams(ground_truth));
      },
      py::arg("evidence"), py::arg("ground_truth"));
  mod.def(
      "ulrt_classify",
      [](double log_ratio, double upsilon) {
        return outcome_name(ulrt_classify(log_ratio, upsilon).outcome);
      },
      py::arg("log_ratio"), py::arg("upsilon"));
  mod.def(
      "normalized_belief_limits",
      [](const std::vector<EvidenceCounts>& hypotheses, const std::vector<double>& ground_truth) {
        return normalized_belief_limits(hypotheses, CategoricalParams(ground_truth));
      },
      py::arg("hypotheses"), py::arg("ground_truth"));

  // --- divergences and rate fits -------------------------------------------
  mod.def(
      "kl_divergence",
      [](const std::vector<double>& p, const std::vector<double>& q) {
        return kl_divergence(CategoricalParams(p), CategoricalParams(q));
      },
      py::arg("p"), py::arg("q"));
  mod.def(
      "ca_divergence_exact",
      [](const std::vector<std::vector<double>>& ground_truths,
         const std::vector<std::vector<double>>& hypotheses) {
        return ca_to_dict(ca_divergence_exact(params_from(ground_truths), params_from(hypotheses)));
      },
      py::arg("ground_truths"), py::arg("hypotheses"));
  mod.def(
      "ca_divergence_mc",
      [](const std::vector<std::vector<double>>& ground_truths,
         const std::vector<std::vector<double>>& hypotheses, long long samples,
         std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return ca_to_dict(
            ca_divergence_mc(params_from(ground_truths), params_from(hypotheses), samples, rng));
      },
      py::arg("ground_truths"), py::arg("hypotheses"), py::arg("samples"), py::arg("seed"));
  mod.def(
      "fit_rate",
      [](const std::vector<std::pair<double, double>>& points, const std::string& model) {
        const RateFitResult fit = fit_rate(points, fit_model_from(model));
        py::dict out;
        out["slope"] = fit.slope;
        out["intercept"] = fit.intercept;
        out["residual"] = fit.residual;
        out["poly_exponent"] = fit.poly_exponent ? py::cast(*fit.poly_exponent) : py::none();
        out["scale"] = fit.scale ? py::cast(*fit.scale) : py::none();
        return out;
      },
      py::arg("points"), py::arg("model"));

  // --- graphs and mixing ----------------------------------------------------
  mod.def(
      "random_geometric_graph",
      [](int m, double radius, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return random_geometric_graph(m, radius, rng);
      },
      py::arg("m"), py::arg("radius"), py::arg("seed"));
  mod.def("lazy_metropolis", &lazy_metropolis, py::arg("topology"));
  mod.def("uniform_complete", &uniform_complete, py::arg("topology"));
  mod.def("consensus_gap", &consensus_gap, py::arg("matrix"), py::arg("t"));

  // --- experiment drivers ----------------------------------------------------
  mod.def("preset_names", &preset_names);
  mod.def(
      "preset_json", [](const std::string& name) { return config_to_json(preset_config(name)); },
      py::arg("name"));
  mod.def(
      "run_experiment_json",
      [](const std::string& config_json, const std::string& output_dir) {
        ExperimentConfig config = config_from_json_text(config_json, "<python>");
        if (!output_dir.empty()) config.output = output_dir;
        const ExperimentResult result = run_experiment(config);
        py::list failures;
        for (const RunFailure& f : result.failures) {
          py::dict row;
          row["run"] = f.run;
          row["rule"] = f.rule;
          row["t"] = f.t;
          row["agent"] = f.agent;
          row["hypothesis"] = f.hypothesis;
          row["message"] = f.message;
          failures.append(row);
        }
        py::dict out;
        out["output_dir"] = result.output_dir;
        out["failures"] = failures;
        return out;
      },
      py::arg("config_json"), py::arg("output_dir") = std::string());
  mod.def("analyze_directory", &analyze_directory, py::arg("dir"));
  mod.def("write_figure_preset", &write_figure_preset, py::arg("name"), py::arg("out_dir"));
  mod.def("write_figures", &write_figures, py::arg("dir"));
}
