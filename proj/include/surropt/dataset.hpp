#pragma once

// Labeled layout samples: CSV ingestion, splitting, normalization and the
// synthetic stand-in for the electromagnetic/thermal simulations.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "surropt/surrogate.hpp"

namespace surropt::dataset {

inline constexpr int kLayoutDim = 36;
inline constexpr int kMetricCount = 3;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {"f1", "f2", "f3"};

struct SampleRecord {
  std::vector<double> x;
  std::array<double, kMetricCount> f{};  // control-path inductance, main-path inductance, max temperature

  bool operator==(const SampleRecord&) const = default;
};

struct DataSplit {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;
};

struct NormalizationStats {
  std::vector<double> x_min;
  std::vector<double> x_max;
  std::array<double, kMetricCount> f_mean{};
  std::array<double, kMetricCount> f_stddev{};
  std::array<bool, kMetricCount> f_constant{};  // stddev was zero; stored as 1
};

NormalizationStats compute_stats(std::span<const SampleRecord> records);

struct SyntheticOracleConfig {
  std::uint64_t seed = 1;
  int coupling_count = 2;
  double noise_stddev = 0.0;
  int dim = kLayoutDim;

  void validate() const;
};

/// Deterministic closed-form substitute for the simulation pipeline.
///
/// Inductances (f1, f2) are loop-area proxies, one independent random
/// structure per metric:
///
///   f = s * (c0 + sum_i d_i (x_i - t_i)^2 + sum_k c_k (x_a(k) - x_b(k) - delta_k)^2)
///
/// with d_i, c_k > 0, so f >= s*c0 > 0 everywhere. The d_i decay
/// geometrically over a seeded ordering of the coordinates.
///
/// Temperature (f3) is an ambient level plus a smooth maximum over heat sources:
///
///   f3 = T0 + (1/beta) log sum_k exp(beta * A_k exp(-|x_S(k) - mu_k|^2 / (2 sigma_k^2)))
///
/// where each source k reads a seeded triple of coordinates S(k). Everything is
/// a composition of polynomials, exp and log, hence smooth in x. With
/// noise_stddev > 0 each metric gets additive Gaussian noise whose stream is a
/// hash of (seed, metric, bit pattern of x), so the oracle stays a pure function.
class SyntheticOracle {
 public:
  struct QuadraticTerm {
    int a = 0;
    int b = 0;
    double weight = 0.0;
    double offset = 0.0;
  };
  struct Inductance {
    double scale = 1.0;
    double base = 0.0;
    std::vector<double> diag_weight;
    std::vector<double> diag_center;
    std::vector<QuadraticTerm> couplings;
  };
  struct HeatSource {
    std::array<int, 3> coords{};
    std::array<double, 3> center{};
    double amplitude = 0.0;
    double width = 0.0;
  };

  explicit SyntheticOracle(const SyntheticOracleConfig& cfg);

  std::array<double, kMetricCount> evaluate(std::span<const double> x) const;

  const SyntheticOracleConfig& config() const noexcept { return cfg_; }
  const Inductance& inductance(int metric) const { return inductance_.at(static_cast<std::size_t>(metric)); }
  const std::vector<HeatSource>& heat_sources() const noexcept { return sources_; }

  static constexpr double kAmbient = 25.0;
  static constexpr double kSharpness = 0.2;

 private:
  SyntheticOracleConfig cfg_;
  std::array<Inductance, 2> inductance_;
  std::vector<HeatSource> sources_;
};

/// Throws BoundsError when x leaves [0,1]^dim.
std::array<double, kMetricCount> synthetic_oracle(std::span<const double> x,
                                                  const SyntheticOracleConfig& cfg);

/// `count` records with x ~ U[0,1]^dim from a seeded stream, labeled by the oracle.
std::vector<SampleRecord> gen_dataset(int count, const SyntheticOracleConfig& cfg);

struct CornerMinimum {
  double value = 0.0;
  std::vector<double> corner;
};

/// Minimum of an inductance metric (0 or 1) over the 2^dim box corners, by Gray-code
/// enumeration with incremental updates of the quadratic form. Noise is ignored.
CornerMinimum inductance_corner_minimum(const SyntheticOracle& oracle, int metric);

/// Header x1..x{dim},f1,f2,f3; values in shortest round-trip decimal form.
void write_csv(const std::filesystem::path& path, std::span<const SampleRecord> records);

/// Throws SchemaError naming the first missing column, ParseError with the 1-based
/// data row and column of a bad cell, Error on an empty file.
std::vector<SampleRecord> load_csv(const std::filesystem::path& path, int dim = kLayoutDim);

/// Sidecar metadata describing how a synthetic dataset was produced.
void write_metadata(const std::filesystem::path& path, int count, const SyntheticOracleConfig& cfg);

/// Seeded shuffle, then ceil(n * train_fraction) records to train (capped so the
/// test side keeps at least one record).
DataSplit split(std::span<const SampleRecord> records, double train_fraction, std::uint64_t seed);

/// Regression view of one metric: inputs mapped to the unit box with the stats'
/// min/max, targets z-scored with the stats' mean/stddev.
surrogate::RegressionData regression_data(const DataSplit& split, int metric,
                                          const NormalizationStats& stats);

surrogate::LabeledSet labeled_set(std::span<const SampleRecord> records, int metric,
                                  const NormalizationStats& stats);

}  // namespace surropt::dataset
