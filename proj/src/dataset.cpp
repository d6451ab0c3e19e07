#include "surropt/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surropt/error.hpp"
#include "surropt/io.hpp"
#include "surropt/rng.hpp"

namespace surropt::dataset {

namespace {

constexpr std::array<double, 2> kInductanceScale = {10.0, 2.0};
constexpr std::array<double, 2> kInductanceBase = {1.0, 0.5};
constexpr int kHeatSources = 4;
constexpr double kDiagDecay = 3.0;
constexpr double kCouplingScale = 0.3;

double inductance_value(const SyntheticOracle::Inductance& m, std::span<const double> x) {
  double acc = m.base;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - m.diag_center[i];
    acc += m.diag_weight[i] * d * d;
  }
  for (const auto& c : m.couplings) {
    const double d = x[static_cast<std::size_t>(c.a)] - x[static_cast<std::size_t>(c.b)] - c.offset;
    acc += c.weight * d * d;
  }
  return m.scale * acc;
}

double noise_sample(std::uint64_t seed, int metric, std::span<const double> x, double stddev) {
  std::uint64_t h = derive_seed({seed, 0x6e6f697365ULL, static_cast<std::uint64_t>(metric)});
  for (double v : x) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  Rng rng(h);
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

void check_unit_box(std::span<const double> x, int dim) {
  if (static_cast<int>(x.size()) != dim) {
    throw DimensionError("layout vector has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(dim));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
      throw BoundsError("x" + std::to_string(i + 1) + " = " + io::format_double(x[i]) +
                        " lies outside [0,1]");
    }
  }
}

}  // namespace

void SyntheticOracleConfig::validate() const {
  if (dim < 3) throw ConfigError("oracle dimension must be >= 3");
  if (coupling_count < 0) throw ConfigError("coupling_count must be >= 0");
  if (!(noise_stddev >= 0.0) || !std::isfinite(noise_stddev)) {
    throw ConfigError("noise_stddev must be a finite value >= 0");
  }
}

SyntheticOracle::SyntheticOracle(const SyntheticOracleConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto n = static_cast<std::size_t>(cfg_.dim);
  for (int m = 0; m < 2; ++m) {
    Rng rng(derive_seed({cfg_.seed, 0x696e64ULL, static_cast<std::uint64_t>(m)}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto& ind = inductance_[static_cast<std::size_t>(m)];
    ind.scale = kInductanceScale[static_cast<std::size_t>(m)];
    ind.base = kInductanceBase[static_cast<std::size_t>(m)];
    ind.diag_weight.resize(n);
    ind.diag_center.resize(n);
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::shuffle(rank.begin(), rank.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      ind.diag_weight[i] = std::exp(-static_cast<double>(rank[i]) / kDiagDecay);
      ind.diag_center[i] = -1.0 + 3.0 * unit(rng);
    }
    for (int k = 0; k < cfg_.coupling_count; ++k) {
      QuadraticTerm t;
      t.a = static_cast<int>(uniform_index(rng, n));
      do {
        t.b = static_cast<int>(uniform_index(rng, n));
      } while (t.b == t.a);
      t.weight = kCouplingScale * (0.5 + 1.5 * unit(rng));
      t.offset = unit(rng) - 0.5;
      ind.couplings.push_back(t);
    }
  }

  Rng rng(derive_seed({cfg_.seed, 0x68656174ULL}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < kHeatSources; ++k) {
    HeatSource s;
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t pick = j + uniform_index(rng, n - j);
      std::swap(pool[j], pool[pick]);
      s.coords[j] = pool[j];
      s.center[j] = -0.5 + 2.0 * unit(rng);
    }
    s.amplitude = 10.0 + 10.0 * unit(rng);
    s.width = 1.2 + 0.6 * unit(rng);
    sources_.push_back(s);
  }
}

std::array<double, kMetricCount> SyntheticOracle::evaluate(std::span<const double> x) const {
  check_unit_box(x, cfg_.dim);
  std::array<double, kMetricCount> f{};
  f[0] = inductance_value(inductance_[0], x);
  f[1] = inductance_value(inductance_[1], x);

  std::array<double, kHeatSources> heat{};
  for (std::size_t k = 0; k < sources_.size(); ++k) {
    const auto& s = sources_[k];
    double r2 = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = x[static_cast<std::size_t>(s.coords[j])] - s.center[j];
      r2 += d * d;
    }
    heat[k] = s.amplitude * std::exp(-r2 / (2.0 * s.width * s.width));
  }
  const double peak = *std::max_element(heat.begin(), heat.end());
  double sum = 0.0;
  for (double h : heat) sum += std::exp(kSharpness * (h - peak));
  f[2] = kAmbient + peak + std::log(sum) / kSharpness;

  if (cfg_.noise_stddev > 0.0) {
    for (int m = 0; m < kMetricCount; ++m) {
      f[static_cast<std::size_t>(m)] += noise_sample(cfg_.seed, m, x, cfg_.noise_stddev);
    }
  }
  return f;
}

std::array<double, kMetricCount> synthetic_oracle(std::span<const double> x,
                                                  const SyntheticOracleConfig& cfg) {
  return SyntheticOracle(cfg).evaluate(x);
}

std::vector<SampleRecord> gen_dataset(int count, const SyntheticOracleConfig& cfg) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  const SyntheticOracle oracle(cfg);
  Rng rng(derive_seed({cfg.seed, 0x73616d706c65ULL}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SampleRecord> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int r = 0; r < count; ++r) {
    SampleRecord rec;
    rec.x.resize(static_cast<std::size_t>(cfg.dim));
    for (auto& v : rec.x) v = unit(rng);
    rec.f = oracle.evaluate(rec.x);
    out.push_back(std::move(rec));
  }
  return out;
}

CornerMinimum inductance_corner_minimum(const SyntheticOracle& oracle, int metric) {
  if (metric != 0 && metric != 1) throw ConfigError("corner minimum is defined for f1 and f2 only");
  const auto& m = oracle.inductance(metric);
  const int n = oracle.config().dim;
  if (n > 30) throw ConfigError("corner enumeration limited to dim <= 30");

  // couplings touching each coordinate, with the sign of that coordinate in the term
  std::vector<std::vector<std::pair<std::size_t, double>>> touching(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < m.couplings.size(); ++k) {
    touching[static_cast<std::size_t>(m.couplings[k].a)].push_back({k, 1.0});
    touching[static_cast<std::size_t>(m.couplings[k].b)].push_back({k, -1.0});
  }
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  // residual r_k = x_a - x_b - offset_k at the current corner
  std::vector<double> residual(m.couplings.size());
  double value = m.base;
  for (int i = 0; i < n; ++i) {
    const double d = m.diag_center[static_cast<std::size_t>(i)];
    value += m.diag_weight[static_cast<std::size_t>(i)] * d * d;
  }
  for (std::size_t k = 0; k < m.couplings.size(); ++k) {
    residual[k] = -m.couplings[k].offset;
    value += m.couplings[k].weight * residual[k] * residual[k];
  }

  CornerMinimum best{value, x};
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const auto j = static_cast<std::size_t>(std::countr_zero(step));
    const double old = x[j];
    const double now = 1.0 - old;
    const double dc = m.diag_center[j];
    value += m.diag_weight[j] * ((now - dc) * (now - dc) - (old - dc) * (old - dc));
    for (const auto& [k, sign] : touching[j]) {
      const double r_new = residual[k] + sign * (now - old);
      value += m.couplings[k].weight * (r_new * r_new - residual[k] * residual[k]);
      residual[k] = r_new;
    }
    x[j] = now;
    if (value < best.value) best = {value, x};
  }
  best.value *= m.scale;
  return best;
}

NormalizationStats compute_stats(std::span<const SampleRecord> records) {
  if (records.empty()) throw Error("cannot compute statistics of an empty sample set");
  const std::size_t dim = records.front().x.size();
  NormalizationStats s;
  s.x_min.assign(dim, std::numeric_limits<double>::infinity());
  s.x_max.assign(dim, -std::numeric_limits<double>::infinity());
  for (const auto& r : records) {
    if (r.x.size() != dim) throw DimensionError("records have inconsistent dimension");
    for (std::size_t i = 0; i < dim; ++i) {
      s.x_min[i] = std::min(s.x_min[i], r.x[i]);
      s.x_max[i] = std::max(s.x_max[i], r.x[i]);
    }
  }
  const double n = static_cast<double>(records.size());
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    double mean = 0.0;
    for (const auto& r : records) mean += r.f[m];
    mean /= n;
    double var = 0.0;
    for (const auto& r : records) var += (r.f[m] - mean) * (r.f[m] - mean);
    var = records.size() > 1 ? var / (n - 1.0) : 0.0;
    s.f_mean[m] = mean;
    s.f_constant[m] = !(var > 0.0);
    s.f_stddev[m] = s.f_constant[m] ? 1.0 : std::sqrt(var);
  }
  return s;
}

void write_csv(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  if (records.empty()) throw Error("refusing to write an empty dataset");
  const std::size_t dim = records.front().x.size();
  std::string out;
  for (std::size_t i = 0; i < dim; ++i) out += "x" + std::to_string(i + 1) + ",";
  out += "f1,f2,f3\n";
  for (const auto& r : records) {
    if (r.x.size() != dim) throw DimensionError("records have inconsistent dimension");
    for (double v : r.x) {
      out += io::format_double(v);
      out += ',';
    }
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      out += io::format_double(r.f[m]);
      out += m + 1 < kMetricCount ? ',' : '\n';
    }
  }
  io::write_file(path, out);
}

std::vector<SampleRecord> load_csv(const std::filesystem::path& path, int dim) {
  const std::string text = io::read_file(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      auto line = rest.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(path.string() + " is empty");

  std::map<std::string, std::size_t, std::less<>> columns;
  const auto header = io::split_fields(lines.front());
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name(header[c]);
    name.erase(0, name.find_first_not_of(" \t"));
    name.erase(name.find_last_not_of(" \t") + 1);
    columns.emplace(name, c);
  }
  std::vector<std::size_t> x_col(static_cast<std::size_t>(dim));
  std::array<std::size_t, kMetricCount> f_col{};
  auto require = [&](const std::string& name) {
    auto it = columns.find(name);
    if (it == columns.end()) throw SchemaError("missing column '" + name + "'", name);
    return it->second;
  };
  for (int i = 0; i < dim; ++i) x_col[static_cast<std::size_t>(i)] = require("x" + std::to_string(i + 1));
  for (std::size_t m = 0; m < kMetricCount; ++m) f_col[m] = require(kMetricNames[m]);

  std::vector<SampleRecord> out;
  out.reserve(lines.size() - 1);
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = io::split_fields(lines[row]);
    auto cell = [&](std::size_t col) {
      if (col >= fields.size()) {
        throw ParseError("row " + std::to_string(row) + " has no value for column " +
                             std::string(header[col]),
                         row, col + 1);
      }
      auto v = io::parse_double(fields[col]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(col + 1) + " (" +
                             std::string(header[col]) + "): '" + std::string(fields[col]) +
                             "' is not a finite number",
                         row, col + 1);
      }
      return *v;
    };
    SampleRecord rec;
    rec.x.resize(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < rec.x.size(); ++i) rec.x[i] = cell(x_col[i]);
    for (std::size_t m = 0; m < kMetricCount; ++m) rec.f[m] = cell(f_col[m]);
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw Error(path.string() + " has a header but no records");
  return out;
}

void write_metadata(const std::filesystem::path& path, int count, const SyntheticOracleConfig& cfg) {
  nlohmann::ordered_json meta;
  meta["format"] = "surropt-dataset";
  meta["version"] = 1;
  meta["count"] = count;
  meta["dim"] = cfg.dim;
  meta["source"] = "synthetic-oracle";
  meta["oracle"] = {{"seed", cfg.seed},
                    {"coupling_count", cfg.coupling_count},
                    {"noise_stddev", cfg.noise_stddev},
                    {"heat_sources", kHeatSources},
                    {"ambient", SyntheticOracle::kAmbient},
                    {"sharpness", SyntheticOracle::kSharpness}};
  meta["metrics"] = {{"f1", "control-path inductance proxy: positive quadratic form with pairwise couplings"},
                     {"f2", "main-path inductance proxy: positive quadratic form with pairwise couplings"},
                     {"f3", "temperature proxy: ambient + soft maximum of Gaussian heat sources"}};
  io::write_file(path, meta.dump(2) + "\n");
}

DataSplit split(std::span<const SampleRecord> records, double train_fraction, std::uint64_t seed) {
  if (records.size() < 2) throw Error("splitting needs at least 2 records");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0,1)");
  }
  const std::size_t n = records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * train_fraction - 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  DataSplit s;
  s.split_seed = seed;
  s.train_fraction = train_fraction;
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_train ? s.train : s.test).push_back(records[order[k]]);
  }
  return s;
}

surrogate::LabeledSet labeled_set(std::span<const SampleRecord> records, int metric,
                                  const NormalizationStats& stats) {
  if (metric < 0 || metric >= kMetricCount) throw ConfigError("metric index out of range");
  const auto dim = static_cast<Eigen::Index>(stats.x_min.size());
  surrogate::LabeledSet set;
  set.inputs.resize(dim, static_cast<Eigen::Index>(records.size()));
  set.targets.resize(static_cast<Eigen::Index>(records.size()));
  const auto m = static_cast<std::size_t>(metric);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (static_cast<Eigen::Index>(rec.x.size()) != dim) throw DimensionError("record dimension mismatch");
    for (Eigen::Index i = 0; i < dim; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double span = stats.x_max[k] - stats.x_min[k];
      set.inputs(i, static_cast<Eigen::Index>(r)) = span > 0.0 ? (rec.x[k] - stats.x_min[k]) / span : 0.0;
    }
    set.targets[static_cast<Eigen::Index>(r)] = (rec.f[m] - stats.f_mean[m]) / stats.f_stddev[m];
  }
  return set;
}

surrogate::RegressionData regression_data(const DataSplit& split, int metric,
                                          const NormalizationStats& stats) {
  return {labeled_set(split.train, metric, stats), labeled_set(split.test, metric, stats)};
}

}  // namespace surropt::dataset
