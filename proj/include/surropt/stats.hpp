#pragma once

// Convergence-curve aggregation and Wilcoxon rank-sum comparisons of final
// best-so-far values across independent runs.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surropt/de_suite.hpp"

namespace surropt::stats {

enum class Alternative {
  TwoSided,
  Less,     // sample a tends to be smaller than b
  Greater,  // sample a tends to be larger than b
};

enum class TestMethod { Exact, NormalApproximation };

const char* method_name(TestMethod m);

struct StatTestResult {
  double statistic = 0.0;  // rank sum of sample a
  double p_value = 1.0;
  bool significant_at_5pct = false;
  TestMethod method = TestMethod::Exact;
};

inline constexpr double kSignificanceLevel = 0.05;
inline constexpr std::size_t kExactLimit = 14;  // |a| + |b| at or below this uses the exact law

/// 1-based ranks of the pooled values, ties replaced by their average rank.
std::vector<double> midranks(std::span<const double> values);

/// counts[s] = number of size-n1 subsets of {1..n1+n2} whose sum is s + n1(n1+1)/2.
std::vector<std::uint64_t> rank_sum_counts(std::size_t n1, std::size_t n2);

/// Exact null distribution when the pooled size is at most kExactLimit and there
/// are no ties, otherwise the normal approximation with tie and continuity
/// corrections.
StatTestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                 Alternative alternative = Alternative::TwoSided);

struct RunSet {
  de::VariantId variant = de::VariantId::DERAND;
  int scenario = 1;
  std::vector<de::RunTrace> traces;
};

/// Traces padded with their last value to the longest trace length.
std::vector<std::vector<double>> padded_traces(const RunSet& runset);

struct AggregateCurves {
  std::vector<double> mean;
  std::vector<double> stddev;  // unbiased; zeros for a single trace
  std::vector<double> min;
  bool single_trace = false;
};

AggregateCurves aggregate(const RunSet& runset);

/// Values of every trace at a 1-based evaluation index (after padding).
std::vector<double> values_at(const RunSet& runset, std::size_t eval_index);

struct ComparisonMatrix {
  std::vector<de::VariantId> variants;
  std::size_t eval_index = 0;  // 1-based
  std::vector<std::vector<StatTestResult>> cells;  // cells[i][j]: variant i (as a) vs variant j
};

/// Two-sided test for every ordered pair. Without eval_index all runsets must
/// share a padded length and their final values are compared.
ComparisonMatrix pairwise_comparison_matrix(std::span<const RunSet> runsets,
                                            std::optional<std::size_t> eval_index = std::nullopt);

struct VariantStanding {
  de::VariantId variant = de::VariantId::DERAND;
  int outperforms = 0;      // significant pairs where this variant has the lower values
  int outperformed_by = 0;  // significant pairs where it has the higher values
  double median_final = 0.0;
};

struct SignificanceSummary {
  std::vector<VariantStanding> standings;  // sorted: fewest losses, most wins, name
  std::vector<de::VariantId> never_outperformed;
};

/// Direction of a significant pair is read from the rank sum.
SignificanceSummary summarize(const ComparisonMatrix& matrix, std::span<const RunSet> runsets);

}  // namespace surropt::stats
