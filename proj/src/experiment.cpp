#include "surropt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <regex>
#include <set>

#include "surropt/error.hpp"
#include "surropt/io.hpp"
#include "surropt/objective.hpp"
#include "surropt/parallel.hpp"
#include "surropt/rng.hpp"
#include "surropt/stats.hpp"

namespace surropt::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kTagSplit = 0x73706c6974ULL;
constexpr std::uint64_t kTagInit = 0x696e6974ULL;
constexpr std::uint64_t kTagTrain = 0x747261696eULL;
constexpr std::uint64_t kTagRun = 0x72756eULL;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string two_digit(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

std::string model_file_name(int spec, int metric) {
  return "spec" + two_digit(spec) + "_" + dataset::kMetricNames[static_cast<std::size_t>(metric)] + ".model";
}

std::string trace_file_name(de::VariantId v, int scenario, std::uint64_t seed) {
  return std::string(de::variant_name(v)) + "_" + std::to_string(scenario) + "_" + std::to_string(seed) + ".csv";
}

std::string csv_number(double v) { return std::isfinite(v) ? io::format_double(v) : std::string("nan"); }

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

void ExperimentConfig::validate() const {
  if (scenario_ids.empty()) throw ConfigError("no scenarios selected");
  for (int s : scenario_ids) (void)objective::scenario_weights(s);
  if (variants.empty()) throw ConfigError("no variants selected");
  if (runs_per_variant < 1) throw ConfigError("runs_per_variant must be >= 1");
  de_config.validate();
  for (int idx : surrogate_spec_indices) (void)surrogate::table1_spec(idx);
  if (surrogate_spec_indices.empty()) throw ConfigError("no surrogate specs selected");
  if (sample_count < 2) throw ConfigError("sample_count must be >= 2");
  oracle.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
  training.validate();
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

int ExperimentConfig::worker_count() const { return workers > 0 ? workers : default_workers(); }

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown(j,
                 {"scenarios", "variants", "runs_per_variant", "base_seed", "de", "surrogate_specs", "data",
                  "training", "compare", "workers"},
                 "config");
  read_key(j, "scenarios", c.scenario_ids);
  if (auto it = j.find("variants"); it != j.end()) {
    c.variants.clear();
    for (const auto& name : *it) c.variants.push_back(de::variant_from_name(name.get<std::string>()));
  }
  read_key(j, "runs_per_variant", c.runs_per_variant);
  read_key(j, "base_seed", c.base_seed);
  read_key(j, "surrogate_specs", c.surrogate_spec_indices);
  read_key(j, "workers", c.workers);
  if (auto it = j.find("de"); it != j.end()) {
    reject_unknown(*it, {"pop_size", "crossover_prob", "scale_factor", "max_evals", "variant_params"}, "de");
    read_key(*it, "pop_size", c.de_config.pop_size);
    read_key(*it, "crossover_prob", c.de_config.crossover_prob);
    read_key(*it, "scale_factor", c.de_config.scale_factor);
    read_key(*it, "max_evals", c.de_config.max_evals);
    read_key(*it, "variant_params", c.de_config.variant_params);
  }
  if (auto it = j.find("data"); it != j.end()) {
    reject_unknown(*it, {"path", "count", "oracle", "train_fraction"}, "data");
    if (auto p = it->find("path"); p != it->end() && !p->is_null()) c.data_path = p->get<std::string>();
    read_key(*it, "count", c.sample_count);
    read_key(*it, "train_fraction", c.train_fraction);
    if (auto o = it->find("oracle"); o != it->end()) {
      reject_unknown(*o, {"seed", "coupling_count", "noise_stddev", "dim"}, "data.oracle");
      read_key(*o, "seed", c.oracle.seed);
      read_key(*o, "coupling_count", c.oracle.coupling_count);
      read_key(*o, "noise_stddev", c.oracle.noise_stddev);
      read_key(*o, "dim", c.oracle.dim);
    }
  }
  if (auto it = j.find("training"); it != j.end()) {
    reject_unknown(*it, {"max_epochs", "batch_size", "learning_rate", "early_stop_patience"}, "training");
    read_key(*it, "max_epochs", c.training.max_epochs);
    read_key(*it, "batch_size", c.training.batch_size);
    read_key(*it, "learning_rate", c.training.learning_rate);
    read_key(*it, "early_stop_patience", c.training.early_stop_patience);
  }
  if (auto it = j.find("compare"); it != j.end()) {
    reject_unknown(*it, {"eval_index"}, "compare");
    if (auto e = it->find("eval_index"); e != it->end() && !e->is_null()) c.compare_eval_index = e->get<std::size_t>();
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  j["scenarios"] = scenario_ids;
  j["variants"] = json::array();
  for (auto v : variants) j["variants"].push_back(std::string(de::variant_name(v)));
  j["runs_per_variant"] = runs_per_variant;
  j["base_seed"] = base_seed;
  j["surrogate_specs"] = surrogate_spec_indices;
  j["workers"] = workers;
  j["de"] = {{"pop_size", de_config.pop_size},
             {"crossover_prob", de_config.crossover_prob},
             {"scale_factor", de_config.scale_factor},
             {"max_evals", de_config.max_evals},
             {"variant_params", de_config.variant_params}};
  j["data"] = {{"path", data_path ? json(data_path->string()) : json()},
               {"count", sample_count},
               {"train_fraction", train_fraction},
               {"oracle",
                {{"seed", oracle.seed},
                 {"coupling_count", oracle.coupling_count},
                 {"noise_stddev", oracle.noise_stddev},
                 {"dim", oracle.dim}}}};
  j["training"] = {{"max_epochs", training.max_epochs},
                   {"batch_size", training.batch_size},
                   {"learning_rate", training.learning_rate},
                   {"early_stop_patience", training.early_stop_patience}};
  j["compare"] = {{"eval_index", compare_eval_index ? json(*compare_eval_index) : json()}};
  return j;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  try {
    return from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
}

std::uint64_t run_seed(std::uint64_t base_seed, de::VariantId variant, int scenario, int run_index) {
  return derive_seed({base_seed, kTagRun, static_cast<std::uint64_t>(variant), static_cast<std::uint64_t>(scenario),
                      static_cast<std::uint64_t>(run_index)});
}

// ---------------------------------------------------------------------------
// manifest

Manifest::Manifest(std::string command, fs::path root) : command_(std::move(command)), root_(std::move(root)) {}

void Manifest::add(const fs::path& file, bool is_volatile) {
  ordered_json entry;
  entry["path"] = file.generic_string();
  entry["sha256"] = io::sha256_file(root_ / file);
  entry["bytes"] = fs::file_size(root_ / file);
  if (is_volatile) entry["volatile"] = true;
  files_.push_back(std::move(entry));
}

void Manifest::set(const std::string& key, json value) { extra_[key] = std::move(value); }

fs::path Manifest::write(double wall_time_seconds) const {
  ordered_json j;
  j["command"] = command_;
  j["tool"] = "surropt";
  j["tool_version"] = kToolVersion;
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  j["files"] = files_;
  j["wall_time_seconds"] = wall_time_seconds;
  const fs::path path = root_ / ("manifest." + command_ + ".json");
  io::write_file(path, j.dump(2) + "\n");
  return path;
}

// ---------------------------------------------------------------------------
// gen-data

GenDataResult gen_data(int count, const dataset::SyntheticOracleConfig& oracle, const fs::path& out_csv) {
  const auto start = Clock::now();
  const auto records = dataset::gen_dataset(count, oracle);
  GenDataResult res;
  res.csv = out_csv;
  res.metadata = out_csv;
  res.metadata.replace_extension(".meta.json");
  dataset::write_csv(res.csv, records);
  dataset::write_metadata(res.metadata, count, oracle);

  const fs::path root = out_csv.has_parent_path() ? out_csv.parent_path() : fs::path(".");
  Manifest manifest("gen-data", root);
  manifest.add(res.csv.filename());
  manifest.add(res.metadata.filename());
  manifest.set("seeds", {{"oracle", oracle.seed}});
  res.manifest = manifest.write(seconds_since(start));
  return res;
}

// ---------------------------------------------------------------------------
// train

TrainResult train(const fs::path& data_path, const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto start = Clock::now();
  const auto records = dataset::load_csv(data_path, cfg.oracle.dim);
  const std::uint64_t split_seed = derive_seed({cfg.base_seed, kTagSplit});
  const auto data_split = dataset::split(records, cfg.train_fraction, split_seed);
  const auto stats = dataset::compute_stats(data_split.train);
  const int dim = cfg.oracle.dim;

  std::array<surrogate::RegressionData, dataset::kMetricCount> data;
  for (int m = 0; m < dataset::kMetricCount; ++m) {
    data[static_cast<std::size_t>(m)] = dataset::regression_data(data_split, m, stats);
  }

  const auto& specs = cfg.surrogate_spec_indices;
  TrainResult result;
  result.specs.resize(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s) result.specs[s].spec_index = specs[s];
  std::vector<std::optional<surrogate::SurrogateModel>> models(specs.size() * dataset::kMetricCount);

  fs::create_directories(out_dir);
  parallel_for(models.size(), cfg.worker_count(), [&](std::size_t job) {
    const std::size_t s = job / dataset::kMetricCount;
    const int m = static_cast<int>(job % dataset::kMetricCount);
    const auto mi = static_cast<std::size_t>(m);
    const int spec_index = specs[s];
    auto net = surrogate::build_network(surrogate::table1_spec(spec_index), dim,
                                        derive_seed({cfg.base_seed, kTagInit, static_cast<std::uint64_t>(spec_index),
                                                     static_cast<std::uint64_t>(m)}));
    auto tcfg = cfg.training;
    tcfg.seed = derive_seed({cfg.base_seed, kTagTrain, static_cast<std::uint64_t>(spec_index), static_cast<std::uint64_t>(m)});
    try {
      result.specs[s].reports[mi] = surrogate::train(net, data[mi], tcfg);
    } catch (const TrainingDivergedError& e) {
      result.specs[s].errors[mi] = e.what();
      return;
    }
    surrogate::SurrogateModel model;
    model.metric = dataset::kMetricNames[mi];
    model.network = std::move(net);
    model.input_min = stats.x_min;
    model.input_max = stats.x_max;
    model.target_mean = stats.f_mean[mi];
    model.target_stddev = stats.f_stddev[mi];
    surrogate::save_model(model, out_dir / model_file_name(spec_index, m));
    models[job] = std::move(model);
  });

  Manifest manifest("train", out_dir);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int m = 0; m < dataset::kMetricCount; ++m) {
      if (result.specs[s].reports[static_cast<std::size_t>(m)]) manifest.add(model_file_name(specs[s], m));
    }
  }

  // best spec per metric: lowest final test MSE
  for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& so : result.specs) {
      if (so.reports[m] && so.reports[m]->final_test_mse < best) {
        best = so.reports[m]->final_test_mse;
        result.best_spec[m] = so.spec_index;
      }
    }
  }

  std::string table = "spec,layers,nodes,label,f1,f2,f3,f1_raw,f2_raw,f3_raw,best_f1,best_f2,best_f3,status\n";
  std::string times = "spec,f1,f2,f3\n";
  for (const auto& so : result.specs) {
    const auto spec = surrogate::table1_spec(so.spec_index);
    table += std::to_string(so.spec_index) + "," + std::to_string(spec.hidden_widths.size()) + "," +
             std::to_string(spec.total_nodes()) + "," + spec.label();
    times += std::to_string(so.spec_index);
    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
      table += "," + (so.reports[m] ? csv_number(so.reports[m]->final_test_mse) : std::string("nan"));
      times += "," + (so.reports[m] ? csv_number(so.reports[m]->wall_time_seconds) : std::string("nan"));
    }
    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
      const double scale = stats.f_stddev[m] * stats.f_stddev[m];
      table += "," + (so.reports[m] ? csv_number(so.reports[m]->final_test_mse * scale) : std::string("nan"));
    }
    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
      table += result.best_spec[m] == so.spec_index ? ",1" : ",0";
    }
    std::string status = "ok";
    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
      if (!so.errors[m].empty()) status = std::string(dataset::kMetricNames[m]) + ": " + so.errors[m];
    }
    table += "," + status + "\n";
    times += "\n";

    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
      if (!so.reports[m]) continue;
      std::string curve = "epoch,train_mse,test_mse\n";
      const auto& hist = so.reports[m]->mse_history;
      for (std::size_t e = 0; e < hist.size(); ++e) {
        curve += std::to_string(e + 1) + "," + csv_number(hist[e].train_mse) + "," + csv_number(hist[e].test_mse) + "\n";
      }
      const fs::path rel = fs::path("learning_curves") /
                           ("spec" + two_digit(so.spec_index) + "_" + dataset::kMetricNames[m] + ".csv");
      io::write_file(out_dir / rel, curve);
      manifest.add(rel);
    }
  }
  io::write_file(out_dir / "mse_table.csv", table);
  manifest.add("mse_table.csv");
  io::write_file(out_dir / "training_times.csv", times);
  manifest.add("training_times.csv", true);

  ordered_json best = ordered_json::object();
  for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
    if (result.best_spec[m] == 0) continue;
    const auto it = std::find_if(result.specs.begin(), result.specs.end(),
                                 [&](const SpecOutcome& so) { return so.spec_index == result.best_spec[m]; });
    best[dataset::kMetricNames[m]] = {{"spec", result.best_spec[m]},
                                      {"file", model_file_name(result.best_spec[m], static_cast<int>(m))},
                                      {"test_mse", it->reports[m]->final_test_mse},
                                      {"test_mse_raw", it->reports[m]->final_test_mse * stats.f_stddev[m] * stats.f_stddev[m]}};
  }
  io::write_file(out_dir / "best_models.json", best.dump(2) + "\n");
  manifest.add("best_models.json");

  // test-split predictions of the best models, raw metric scale
  std::string pred = "index,f1,f2,f3,f1_pred,f2_pred,f3_pred\n";
  for (std::size_t r = 0; r < data_split.test.size(); ++r) {
    const auto& rec = data_split.test[r];
    pred += std::to_string(r);
    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) pred += "," + csv_number(rec.f[m]);
    for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
      double p = std::nan("");
      if (result.best_spec[m] != 0) {
        const auto s = static_cast<std::size_t>(
            std::find(specs.begin(), specs.end(), result.best_spec[m]) - specs.begin());
        p = models[s * dataset::kMetricCount + m]->predict(rec.x);
      }
      pred += "," + csv_number(p);
    }
    pred += "\n";
  }
  io::write_file(out_dir / "predictions.csv", pred);
  manifest.add("predictions.csv");

  manifest.set("seeds", {{"base", cfg.base_seed}, {"split", split_seed}});
  manifest.set("data", {{"path", data_path.generic_string()}, {"sha256", io::sha256_file(data_path)}});
  manifest.set("training", cfg.to_json()["training"]);
  manifest.write(seconds_since(start));
  return result;
}

std::array<std::shared_ptr<const surrogate::SurrogateModel>, dataset::kMetricCount> load_best_models(
    const fs::path& models_dir) {
  const fs::path index = models_dir / "best_models.json";
  json best = json::object();
  if (fs::exists(index)) best = json::parse(io::read_file(index));
  std::array<std::shared_ptr<const surrogate::SurrogateModel>, dataset::kMetricCount> out;
  for (std::size_t m = 0; m < dataset::kMetricCount; ++m) {
    const char* name = dataset::kMetricNames[m];
    if (!best.contains(name)) throw Error("no trained model for metric " + std::string(name) + " in " + models_dir.string());
    const fs::path file = models_dir / best[name].at("file").get<std::string>();
    if (!fs::exists(file)) throw Error("model file for metric " + std::string(name) + " is missing: " + file.string());
    out[m] = std::make_shared<const surrogate::SurrogateModel>(surrogate::load_model(file));
  }
  return out;
}

// ---------------------------------------------------------------------------
// optimize

void write_trace_csv(const fs::path& path, const std::vector<double>& best_so_far) {
  std::string out = "eval_index,best_so_far\n";
  for (std::size_t t = 0; t < best_so_far.size(); ++t) {
    out += std::to_string(t + 1) + "," + io::format_double(best_so_far[t]) + "\n";
  }
  io::write_file(path, out);
}

std::vector<double> read_trace_csv(const fs::path& path) {
  const std::string text = io::read_file(path);
  std::vector<double> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    ++line_no;
    if (line_no == 1) {
      if (line != "eval_index,best_so_far") throw ParseError(path.string() + ": unexpected header", 0, 0);
      continue;
    }
    const auto fields = io::split_fields(line);
    const auto idx = fields.size() == 2 ? io::parse_double(fields[0]) : std::nullopt;
    const auto val = fields.size() == 2 ? io::parse_double(fields[1]) : std::nullopt;
    if (!idx || !val || *idx != static_cast<double>(out.size() + 1)) {
      throw ParseError(path.string() + ": malformed row " + std::to_string(line_no - 1), line_no - 1, 0);
    }
    out.push_back(*val);
  }
  if (out.empty()) throw ParseError(path.string() + ": no rows", 0, 0);
  return out;
}

OptimizeResult optimize(const fs::path& models_dir, const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const auto start = Clock::now();
  const auto models = load_best_models(models_dir);
  const int dim = models[0]->network.input_dim();
  const auto space = objective::SearchSpace::unit_box(dim);

  struct Job {
    int scenario;
    de::VariantId variant;
    int run;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int s : cfg.scenario_ids) {
    for (auto v : cfg.variants) {
      for (int r = 0; r < cfg.runs_per_variant; ++r) jobs.push_back({s, v, r, run_seed(cfg.base_seed, v, s, r)});
    }
  }
  std::vector<de::RunTrace> traces(jobs.size());
  std::vector<std::array<double, 3>> best_parts(jobs.size());
  fs::create_directories(out_dir / "traces");

  parallel_for(jobs.size(), cfg.worker_count(), [&](std::size_t k) {
    const auto& job = jobs[k];
    auto obj = objective::ScalarizedObjective::from_models(objective::scenario_weights(job.scenario), models, space);
    auto dcfg = cfg.de_config;
    dcfg.seed = job.seed;
    traces[k] = de::run(job.variant, *obj, dcfg);
    if (obj->eval_count() != traces[k].best_so_far.size()) {
      throw Error("evaluation count mismatch in run " + trace_file_name(job.variant, job.scenario, job.seed));
    }
    best_parts[k] = obj->components(traces[k].best_x);
    write_trace_csv(out_dir / "traces" / trace_file_name(job.variant, job.scenario, job.seed), traces[k].best_so_far);
  });

  Manifest manifest("optimize", out_dir);
  for (const auto& job : jobs) manifest.add(fs::path("traces") / trace_file_name(job.variant, job.scenario, job.seed));

  for (int s : cfg.scenario_ids) {
    for (auto v : cfg.variants) {
      stats::RunSet rs{v, s, {}};
      for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (jobs[k].scenario == s && jobs[k].variant == v) rs.traces.push_back(traces[k]);
      }
      const auto curves = stats::aggregate(rs);
      std::string out = "eval_index,mean,std,min\n";
      for (std::size_t t = 0; t < curves.mean.size(); ++t) {
        out += std::to_string(t + 1) + "," + io::format_double(curves.mean[t]) + "," +
               io::format_double(curves.stddev[t]) + "," + io::format_double(curves.min[t]) + "\n";
      }
      const fs::path rel = fs::path("aggregate") / (std::string(de::variant_name(v)) + "_" + std::to_string(s) + ".csv");
      io::write_file(out_dir / rel, out);
      manifest.add(rel);
    }
  }

  std::string layouts = "variant,scenario,run,seed,best_F,lambda1,lambda2,lambda3";
  for (int j = 1; j <= dim; ++j) layouts += ",x" + std::to_string(j);
  layouts += "\n";
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& job = jobs[k];
    layouts += std::string(de::variant_name(job.variant)) + "," + std::to_string(job.scenario) + "," +
               std::to_string(job.run) + "," + std::to_string(job.seed) + "," +
               io::format_double(traces[k].best_so_far.back());
    for (double c : best_parts[k]) layouts += "," + io::format_double(c);
    for (double x : traces[k].best_x) layouts += "," + io::format_double(x);
    layouts += "\n";
  }
  io::write_file(out_dir / "best_layouts.csv", layouts);
  manifest.add("best_layouts.csv");

  manifest.set("seeds", {{"base", cfg.base_seed}});
  manifest.set("config", cfg.to_json());
  manifest.set("models", {{"dir", models_dir.generic_string()}});
  manifest.write(seconds_since(start));
  return {jobs.size()};
}

// ---------------------------------------------------------------------------
// compare

CompareResult compare(const fs::path& traces_dir, const fs::path& out_dir, std::optional<std::size_t> eval_index) {
  const auto start = Clock::now();
  if (!fs::is_directory(traces_dir)) throw IoError("trace directory " + traces_dir.string() + " does not exist");
  static const std::regex pattern(R"(^([A-Z]+)_([0-9]+)_([0-9]+)\.csv$)");

  struct Entry {
    std::uint64_t seed;
    std::vector<double> trace;
  };
  std::map<int, std::map<de::VariantId, std::vector<Entry>>> grouped;
  std::vector<std::string> bad;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(traces_dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string name = file.filename().string();
    std::smatch m;
    try {
      if (!std::regex_match(name, m, pattern)) throw Error("name does not match <VARIANT>_<scenario>_<seed>.csv");
      const auto variant = de::variant_from_name(m[1].str());
      const int scenario = std::stoi(m[2].str());
      const std::uint64_t seed = std::stoull(m[3].str());
      grouped[scenario][variant].push_back({seed, read_trace_csv(file)});
    } catch (const std::exception& ex) {
      bad.push_back(name + " (" + ex.what() + ")");
    }
  }
  if (!bad.empty()) {
    std::string msg = "unparsable trace files:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw Error(msg);
  }
  if (grouped.empty()) throw Error("no trace files in " + traces_dir.string());

  CompareResult result;
  Manifest manifest("compare", out_dir);
  ordered_json summary;
  summary["eval_index"] = eval_index ? json(*eval_index) : json("final");
  summary["test"] = "two-sided Wilcoxon rank-sum, alpha 0.05";
  summary["reference_underperformers"] = {"DERAND", "OBDE", "DESIM"};
  summary["scenarios"] = ordered_json::object();

  for (auto& [scenario, by_variant] : grouped) {
    std::vector<stats::RunSet> runsets;
    for (auto v : de::kAllVariants) {
      auto it = by_variant.find(v);
      if (it == by_variant.end()) continue;
      std::sort(it->second.begin(), it->second.end(), [](const Entry& a, const Entry& b) { return a.seed < b.seed; });
      stats::RunSet rs{v, scenario, {}};
      for (auto& e : it->second) rs.traces.push_back({e.trace, {}, v, e.seed});
      runsets.push_back(std::move(rs));
    }
    if (runsets.size() < 2) {
      throw Error("scenario " + std::to_string(scenario) + " has fewer than two variants to compare");
    }
    const auto matrix = stats::pairwise_comparison_matrix(runsets, eval_index);
    const auto standing = stats::summarize(matrix, runsets);

    std::string header = "variant";
    for (auto v : matrix.variants) header += "," + std::string(de::variant_name(v));
    std::string pvals = header + "\n";
    std::string mask = header + "\n";
    for (std::size_t i = 0; i < matrix.variants.size(); ++i) {
      pvals += std::string(de::variant_name(matrix.variants[i]));
      mask += std::string(de::variant_name(matrix.variants[i]));
      for (std::size_t j = 0; j < matrix.variants.size(); ++j) {
        pvals += "," + io::format_double(matrix.cells[i][j].p_value);
        mask += matrix.cells[i][j].significant_at_5pct ? ",1" : ",0";
      }
      pvals += "\n";
      mask += "\n";
    }
    const std::string stem = "scenario" + std::to_string(scenario);
    io::write_file(out_dir / (stem + "_pvalues.csv"), pvals);
    io::write_file(out_dir / (stem + "_significance.csv"), mask);
    manifest.add(stem + "_pvalues.csv");
    manifest.add(stem + "_significance.csv");

    ordered_json sj;
    sj["eval_index"] = matrix.eval_index;
    sj["runs_per_variant"] = ordered_json::object();
    for (const auto& rs : runsets) sj["runs_per_variant"][std::string(de::variant_name(rs.variant))] = rs.traces.size();
    sj["standings"] = ordered_json::array();
    for (const auto& s : standing.standings) {
      sj["standings"].push_back({{"variant", std::string(de::variant_name(s.variant))},
                                 {"outperforms", s.outperforms},
                                 {"outperformed_by", s.outperformed_by},
                                 {"median_final", s.median_final}});
    }
    sj["never_outperformed"] = ordered_json::array();
    for (auto v : standing.never_outperformed) sj["never_outperformed"].push_back(std::string(de::variant_name(v)));
    sj["significant_pairs"] = ordered_json::array();
    for (std::size_t i = 0; i < matrix.variants.size(); ++i) {
      for (std::size_t j = i + 1; j < matrix.variants.size(); ++j) {
        if (!matrix.cells[i][j].significant_at_5pct) continue;
        const bool i_better = matrix.cells[i][j].statistic <
                              static_cast<double>(runsets[i].traces.size()) *
                                  static_cast<double>(runsets[i].traces.size() + runsets[j].traces.size() + 1) / 2.0;
        sj["significant_pairs"].push_back({{"better", std::string(de::variant_name(matrix.variants[i_better ? i : j]))},
                                           {"worse", std::string(de::variant_name(matrix.variants[i_better ? j : i]))},
                                           {"p_value", matrix.cells[i][j].p_value},
                                           {"method", stats::method_name(matrix.cells[i][j].method)}});
      }
    }
    summary["scenarios"][std::to_string(scenario)] = sj;
    result.scenarios.push_back(scenario);
  }
  io::write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  manifest.add("summary.json");
  manifest.set("traces_dir", traces_dir.generic_string());
  manifest.write(seconds_since(start));
  result.summary = std::move(summary);
  return result;
}

// ---------------------------------------------------------------------------
// report

ReportResult report(const fs::path& bundle_dir) {
  const auto start = Clock::now();
  if (!fs::is_directory(bundle_dir)) throw IoError("bundle directory " + bundle_dir.string() + " does not exist");
  ReportResult res;
  ordered_json rep;
  rep["tool"] = "surropt";
  rep["tool_version"] = kToolVersion;

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"data", "gen-data"}, {"models", "train"}, {"runs", "optimize"}, {"compare", "compare"}};
  rep["manifests"] = ordered_json::object();
  for (const auto& [dir, command] : stages) {
    const fs::path path = bundle_dir / dir / ("manifest." + command + ".json");
    if (!fs::exists(path)) {
      res.warnings.push_back("missing manifest " + (fs::path(dir) / path.filename()).generic_string());
      continue;
    }
    const auto m = json::parse(io::read_file(path));
    std::size_t ok = 0;
    std::size_t listed = 0;
    for (const auto& f : m.at("files")) {
      ++listed;
      const fs::path rel = fs::path(dir) / f.at("path").get<std::string>();
      const fs::path file = bundle_dir / rel;
      if (!fs::exists(file)) {
        res.warnings.push_back("missing file " + rel.generic_string());
      } else if (io::sha256_file(file) != f.at("sha256").get<std::string>()) {
        res.warnings.push_back("content changed: " + rel.generic_string());
      } else {
        ++ok;
      }
    }
    rep["manifests"][command] = {{"path", (fs::path(dir) / path.filename()).generic_string()},
                                 {"files_listed", listed},
                                 {"files_verified", ok}};
    if (m.contains("seeds")) rep["manifests"][command]["seeds"] = m["seeds"];
  }

  const fs::path best_models = bundle_dir / "models" / "best_models.json";
  if (fs::exists(best_models)) {
    rep["best_test_mse"] = ordered_json::parse(io::read_file(best_models));
  } else {
    res.warnings.push_back("missing file models/best_models.json");
  }

  const fs::path layouts = bundle_dir / "runs" / "best_layouts.csv";
  if (fs::exists(layouts)) {
    const std::string text = io::read_file(layouts);
    std::map<int, ordered_json> best;
    std::size_t pos = text.find('\n');
    while (pos != std::string::npos && pos + 1 < text.size()) {
      const auto nl = text.find('\n', pos + 1);
      const std::string_view line(text.data() + pos + 1, (nl == std::string::npos ? text.size() : nl) - pos - 1);
      pos = nl;
      const auto f = io::split_fields(line);
      if (f.size() < 5) continue;
      const int scenario = std::stoi(std::string(f[1]));
      const double value = io::parse_double(f[4]).value_or(std::nan(""));
      if (!best.contains(scenario) || value < best[scenario]["best_F"].get<double>()) {
        best[scenario] = {{"best_F", value},
                          {"variant", std::string(f[0])},
                          {"run", std::stoi(std::string(f[2]))},
                          {"seed", std::stoull(std::string(f[3]))}};
      }
    }
    rep["best_F"] = ordered_json::object();
    for (auto& [s, v] : best) rep["best_F"]["scenario" + std::to_string(s)] = v;
  } else {
    res.warnings.push_back("missing file runs/best_layouts.csv");
  }

  const fs::path summary = bundle_dir / "compare" / "summary.json";
  if (fs::exists(summary)) {
    const auto s = ordered_json::parse(io::read_file(summary));
    rep["significance"] = ordered_json::object();
    for (const auto& [scenario, sj] : s.at("scenarios").items()) {
      rep["significance"]["scenario" + scenario] = {{"never_outperformed", sj.at("never_outperformed")},
                                                    {"standings", sj.at("standings")}};
    }
  } else {
    res.warnings.push_back("missing file compare/summary.json");
  }

  rep["warnings"] = res.warnings;
  res.report = bundle_dir / "report.json";
  io::write_file(res.report, rep.dump(2) + "\n");
  Manifest manifest("report", bundle_dir);
  manifest.add("report.json");
  manifest.write(seconds_since(start));
  return res;
}

// ---------------------------------------------------------------------------
// pipeline

PipelineResult run_pipeline(const ExperimentConfig& cfg, const fs::path& bundle_dir) {
  cfg.validate();
  fs::create_directories(bundle_dir);
  fs::path data = cfg.data_path.value_or(bundle_dir / "data" / "dataset.csv");
  if (!cfg.data_path) gen_data(cfg.sample_count, cfg.oracle, data);
  PipelineResult res;
  res.training = train(data, cfg, bundle_dir / "models");
  optimize(bundle_dir / "models", cfg, bundle_dir / "runs");
  res.comparison = compare(bundle_dir / "runs" / "traces", bundle_dir / "compare", cfg.compare_eval_index);
  res.report = report(bundle_dir);
  return res;
}

}  // namespace surropt::experiment
