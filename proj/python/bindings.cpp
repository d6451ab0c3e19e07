#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "surropt/dataset.hpp"
#include "surropt/de_suite.hpp"
#include "surropt/error.hpp"
#include "surropt/experiment.hpp"
#include "surropt/objective.hpp"
#include "surropt/stats.hpp"
#include "surropt/surrogate.hpp"

namespace py = pybind11;
using namespace surropt;

namespace {

de::DEConfig make_de_config(int pop_size, double crossover_prob, double scale_factor, int max_evals,
                            std::uint64_t seed, const std::map<std::string, double>& params) {
  de::DEConfig cfg;
  cfg.pop_size = pop_size;
  cfg.crossover_prob = crossover_prob;
  cfg.scale_factor = scale_factor;
  cfg.max_evals = max_evals;
  cfg.seed = seed;
  cfg.variant_params = params;
  return cfg;
}

py::dict trace_dict(const de::RunTrace& t) {
  py::dict d;
  d["variant"] = std::string(de::variant_name(t.variant));
  d["seed"] = t.seed;
  d["best_so_far"] = t.best_so_far;
  d["best_x"] = t.best_x;
  return d;
}

}  // namespace

PYBIND11_MODULE(_surropt, m) {
  m.doc() = "Surrogate-assisted differential evolution toolkit";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<BoundsError>(m, "BoundsError", base.ptr());

  m.attr("LAYOUT_DIM") = dataset::kLayoutDim;
  m.attr("VARIANTS") = [] {
    std::vector<std::string> names;
    for (auto v : de::kAllVariants) names.emplace_back(de::variant_name(v));
    return names;
  }();

  m.def("table1_specs", [] {
    std::vector<std::vector<int>> out;
    for (const auto& s : surrogate::table1_specs()) out.push_back(s.hidden_widths);
    return out;
  }, "Hidden-layer widths of the ten reference architectures.");

  m.def("oracle", [](const std::vector<double>& x, std::uint64_t seed, int coupling_count, double noise_stddev) {
    dataset::SyntheticOracleConfig cfg;
    cfg.seed = seed;
    cfg.coupling_count = coupling_count;
    cfg.noise_stddev = noise_stddev;
    cfg.dim = static_cast<int>(x.size());
    return dataset::synthetic_oracle(x, cfg);
  }, py::arg("x"), py::arg("seed") = 1, py::arg("coupling_count") = dataset::SyntheticOracleConfig{}.coupling_count,
     py::arg("noise_stddev") = 0.0, "(f1, f2, f3) of a layout vector in [0,1]^n.");

  m.def("run", [](const std::string& variant, py::function fn, std::vector<double> lower, std::vector<double> upper,
                  int pop_size, double crossover_prob, double scale_factor, int max_evals, std::uint64_t seed,
                  const std::map<std::string, double>& params) {
    objective::SearchSpace space{std::move(lower), std::move(upper)};
    space.validate();
    objective::FunctionObjective obj(std::move(space), [&fn](std::span<const double> x) {
      return fn(std::vector<double>(x.begin(), x.end())).cast<double>();
    });
    const auto cfg = make_de_config(pop_size, crossover_prob, scale_factor, max_evals, seed, params);
    return trace_dict(de::run(de::variant_from_name(variant), obj, cfg));
  }, py::arg("variant"), py::arg("fn"), py::arg("lower"), py::arg("upper"), py::arg("pop_size") = 10,
     py::arg("crossover_prob") = 0.5, py::arg("scale_factor") = 0.7, py::arg("max_evals") = 1000,
     py::arg("seed") = 0, py::arg("params") = std::map<std::string, double>{},
     "Minimize a Python callable over a box with one DE variant.");

  m.def("run_sphere", [](const std::string& variant, int dim, int max_evals, std::uint64_t seed) {
    auto sphere = objective::make_sphere(dim);
    const auto cfg = make_de_config(10, 0.5, 0.7, max_evals, seed, {});
    return trace_dict(de::run(de::variant_from_name(variant), *sphere, cfg));
  }, py::arg("variant"), py::arg("dim"), py::arg("max_evals") = 1000, py::arg("seed") = 0);

  m.def("rank_sum_test", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = stats::wilcoxon_rank_sum(a, b);
    py::dict d;
    d["statistic"] = r.statistic;
    d["p_value"] = r.p_value;
    d["significant"] = r.significant_at_5pct;
    d["method"] = stats::method_name(r.method);
    return d;
  }, py::arg("a"), py::arg("b"), "Two-sided Wilcoxon rank-sum test.");

  m.def("run_seed", [](std::uint64_t base, const std::string& variant, int scenario, int run) {
    return experiment::run_seed(base, de::variant_from_name(variant), scenario, run);
  });

  m.def("run_pipeline", [](const std::filesystem::path& bundle, const std::string& config_json) {
    const auto cfg = experiment::ExperimentConfig::from_json(nlohmann::json::parse(config_json));
    const auto res = experiment::run_pipeline(cfg, bundle);
    py::dict d;
    d["report"] = res.report.report;
    d["warnings"] = res.report.warnings;
    return d;
  }, py::arg("bundle"), py::arg("config_json") = "{}",
     "Run the full pipeline; config_json uses the same keys as the CLI --config file.");
}
