#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "surropt/error.hpp"
#include "surropt/experiment.hpp"
#include "surropt/io.hpp"

namespace fs = std::filesystem;
namespace ex = surropt::experiment;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& out_help) {
  cmd->add_option("--config", c.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "base seed (also the oracle seed unless the config sets one)");
  cmd->add_option("--out", c.out, out_help);
}

ex::ExperimentConfig resolve(const Common& c) {
  ex::ExperimentConfig cfg;
  bool oracle_seed_set = false;
  if (!c.config.empty()) {
    cfg = ex::ExperimentConfig::load(c.config);
    const auto raw = nlohmann::json::parse(surropt::io::read_file(c.config));
    oracle_seed_set = raw.contains("data") && raw["data"].contains("oracle") && raw["data"]["oracle"].contains("seed");
  }
  if (c.seed) {
    cfg.base_seed = *c.seed;
    if (!oracle_seed_set) cfg.oracle.seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

fs::path out_or(const Common& c, const char* fallback) { return c.out.empty() ? fs::path(fallback) : fs::path(c.out); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted layout optimization with differential evolution"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ex::kToolVersion);

  Common gen_c, train_c, opt_c, cmp_c, rep_c, pipe_c;

  auto* gen = app.add_subcommand("gen-data", "sample the synthetic oracle into a CSV dataset");
  add_common(gen, gen_c, "output CSV path (default data/dataset.csv)");
  std::optional<int> count;
  gen->add_option("--count", count, "number of samples (default from config, 2000)");

  auto* trn = app.add_subcommand("train", "train surrogates for the requested network specs");
  add_common(trn, train_c, "model directory (default models)");
  std::string data_path;
  std::vector<int> specs;
  trn->add_option("--data", data_path, "dataset CSV")->required()->check(CLI::ExistingFile);
  trn->add_option("--specs", specs, "network spec indices 1-10")->check(CLI::Range(1, 10))->delimiter(',');

  auto* opt = app.add_subcommand("optimize", "run the optimization campaign on trained surrogates");
  add_common(opt, opt_c, "run directory (default runs)");
  std::string models_dir;
  std::optional<int> runs, budget;
  std::vector<int> scenarios;
  std::vector<std::string> variants;
  opt->add_option("--models", models_dir, "model directory")->required()->check(CLI::ExistingDirectory);
  opt->add_option("--runs", runs, "runs per variant");
  opt->add_option("--budget", budget, "evaluations per run");
  opt->add_option("--scenarios", scenarios, "scenario ids")->delimiter(',');
  opt->add_option("--variants", variants, "variant names")->delimiter(',');

  auto* cmp = app.add_subcommand("compare", "pairwise rank-sum tests over trace files");
  add_common(cmp, cmp_c, "comparison directory (default compare)");
  std::string traces_dir;
  std::optional<std::size_t> eval_index;
  cmp->add_option("--traces", traces_dir, "trace directory")->required();
  cmp->add_option("--eval-index", eval_index, "1-based evaluation to compare (default final)");

  auto* rep = app.add_subcommand("report", "verify manifests and summarize a bundle");
  add_common(rep, rep_c, "bundle directory (default bundle)");

  auto* pipe = app.add_subcommand("pipeline", "gen-data, train, optimize, compare and report into one bundle");
  add_common(pipe, pipe_c, "bundle directory (default bundle)");
  std::vector<int> pipe_specs;
  pipe->add_option("--specs", pipe_specs, "network spec indices 1-10")->check(CLI::Range(1, 10))->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      auto cfg = resolve(gen_c);
      if (count) cfg.sample_count = *count;
      if (cfg.sample_count < 1) throw surropt::ConfigError("--count must be >= 1");
      const auto res = ex::gen_data(cfg.sample_count, cfg.oracle, out_or(gen_c, "data/dataset.csv"));
      std::cout << "wrote " << res.csv.string() << "\n";
    } else if (*trn) {
      auto cfg = resolve(train_c);
      if (!specs.empty()) cfg.surrogate_spec_indices = specs;
      const auto out = out_or(train_c, "models");
      const auto res = ex::train(data_path, cfg, out);
      int failures = 0;
      for (const auto& so : res.specs) {
        for (std::size_t m = 0; m < so.errors.size(); ++m) {
          if (!so.errors[m].empty()) {
            ++failures;
            std::cerr << "spec " << so.spec_index << " " << surropt::dataset::kMetricNames[m] << ": " << so.errors[m] << "\n";
          }
        }
      }
      std::cout << "wrote " << (out / "mse_table.csv").string() << "\n";
      if (failures == static_cast<int>(res.specs.size()) * surropt::dataset::kMetricCount) return kExitFailure;
    } else if (*opt) {
      auto cfg = resolve(opt_c);
      if (runs) cfg.runs_per_variant = *runs;
      if (budget) cfg.de_config.max_evals = *budget;
      if (!scenarios.empty()) cfg.scenario_ids = scenarios;
      if (!variants.empty()) {
        cfg.variants.clear();
        for (const auto& v : variants) cfg.variants.push_back(surropt::de::variant_from_name(v));
      }
      cfg.validate();
      const auto res = ex::optimize(models_dir, cfg, out_or(opt_c, "runs"));
      std::cout << "wrote " << res.trace_files << " traces\n";
    } else if (*cmp) {
      auto cfg = resolve(cmp_c);
      if (eval_index) cfg.compare_eval_index = eval_index;
      const auto res = ex::compare(traces_dir, out_or(cmp_c, "compare"), cfg.compare_eval_index);
      std::cout << "compared " << res.scenarios.size() << " scenario(s)\n";
    } else if (*rep) {
      const auto res = ex::report(out_or(rep_c, "bundle"));
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << res.report.string() << "\n";
    } else if (*pipe) {
      auto cfg = resolve(pipe_c);
      if (!pipe_specs.empty()) cfg.surrogate_spec_indices = pipe_specs;
      const auto res = ex::run_pipeline(cfg, out_or(pipe_c, "bundle"));
      for (const auto& w : res.report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << res.report.report.string() << "\n";
    }
  } catch (const surropt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
