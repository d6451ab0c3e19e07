#include "surropt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surropt/error.hpp"

namespace surropt::stats {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

const char* method_name(TestMethod m) {
  return m == TestMethod::Exact ? "exact" : "normal-approximation";
}

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> rank(n);
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e + 1 < n && values[order[e + 1]] == values[order[s]]) ++e;
    const double mid = 0.5 * static_cast<double>(s + e) + 1.0;
    for (std::size_t k = s; k <= e; ++k) rank[order[k]] = mid;
    s = e + 1;
  }
  return rank;
}

std::vector<std::uint64_t> rank_sum_counts(std::size_t n1, std::size_t n2) {
  const std::size_t total = n1 + n2;
  const std::size_t max_sum = n1 * n2 + n1 * (n1 + 1) / 2;
  // ways[k][s]: k-subsets of the ranks seen so far with sum s
  std::vector<std::vector<std::uint64_t>> ways(n1 + 1, std::vector<std::uint64_t>(max_sum + 1, 0));
  ways[0][0] = 1;
  for (std::size_t r = 1; r <= total; ++r) {
    for (std::size_t k = std::min(r, n1); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= r; --s) ways[k][s] += ways[k - 1][s - r];
    }
  }
  const std::size_t min_sum = n1 * (n1 + 1) / 2;
  return {ways[n1].begin() + static_cast<std::ptrdiff_t>(min_sum), ways[n1].end()};
}

StatTestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, Alternative alternative) {
  if (a.empty() || b.empty()) throw Error("rank-sum test needs two nonempty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double v : pooled) {
    if (std::isnan(v)) throw Error("rank-sum test on NaN values");
  }
  const auto ranks = midranks(pooled);
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;

  StatTestResult res;
  res.statistic = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);

  // tie groups
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool ties = false;
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e + 1 < n && sorted[e + 1] == sorted[s]) ++e;
    const auto t = static_cast<double>(e - s + 1);
    if (t > 1) ties = true;
    tie_term += t * t * t - t;
    s = e + 1;
  }

  if (n <= kExactLimit && !ties) {
    res.method = TestMethod::Exact;
    const auto counts = rank_sum_counts(n1, n2);
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    const auto w = static_cast<std::size_t>(std::llround(res.statistic)) - n1 * (n1 + 1) / 2;
    std::uint64_t lower = 0;
    std::uint64_t upper = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (s <= w) lower += counts[s];
      if (s >= w) upper += counts[s];
    }
    const double p_le = static_cast<double>(lower) / total;
    const double p_ge = static_cast<double>(upper) / total;
    switch (alternative) {
      case Alternative::TwoSided: res.p_value = std::min(1.0, 2.0 * std::min(p_le, p_ge)); break;
      case Alternative::Less: res.p_value = p_le; break;
      case Alternative::Greater: res.p_value = p_ge; break;
    }
  } else {
    res.method = TestMethod::NormalApproximation;
    const double dn = static_cast<double>(n);
    const double mu = static_cast<double>(n1) * (dn + 1.0) / 2.0;
    const double var = static_cast<double>(n1 * n2) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (!(var > 0.0)) {
      res.p_value = 1.0;
    } else {
      const double sd = std::sqrt(var);
      const double diff = res.statistic - mu;
      switch (alternative) {
        case Alternative::TwoSided: {
          const double z = std::max(0.0, std::abs(diff) - 0.5) / sd;
          res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
          break;
        }
        case Alternative::Less: res.p_value = normal_cdf((diff + 0.5) / sd); break;
        case Alternative::Greater: res.p_value = 1.0 - normal_cdf((diff - 0.5) / sd); break;
      }
    }
  }
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  res.significant_at_5pct = res.p_value < kSignificanceLevel;
  return res;
}

std::vector<std::vector<double>> padded_traces(const RunSet& runset) {
  if (runset.traces.empty()) throw Error("run set has no traces");
  std::size_t length = 0;
  for (const auto& t : runset.traces) {
    if (t.best_so_far.empty()) throw Error("run set contains an empty trace");
    length = std::max(length, t.best_so_far.size());
  }
  std::vector<std::vector<double>> out;
  out.reserve(runset.traces.size());
  for (const auto& t : runset.traces) {
    auto padded = t.best_so_far;
    padded.resize(length, t.best_so_far.back());
    out.push_back(std::move(padded));
  }
  return out;
}

AggregateCurves aggregate(const RunSet& runset) {
  const auto traces = padded_traces(runset);
  const std::size_t length = traces.front().size();
  const auto count = static_cast<double>(traces.size());
  AggregateCurves out;
  out.single_trace = traces.size() == 1;
  out.mean.resize(length);
  out.stddev.resize(length);
  out.min.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    double sum = 0.0;
    double lo = traces.front()[t];
    for (const auto& tr : traces) {
      sum += tr[t];
      lo = std::min(lo, tr[t]);
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& tr : traces) ss += (tr[t] - mean) * (tr[t] - mean);
    out.mean[t] = mean;
    out.stddev[t] = out.single_trace ? 0.0 : std::sqrt(ss / (count - 1.0));
    out.min[t] = lo;
  }
  return out;
}

std::vector<double> values_at(const RunSet& runset, std::size_t eval_index) {
  const auto traces = padded_traces(runset);
  if (eval_index < 1 || eval_index > traces.front().size()) {
    throw Error("evaluation index " + std::to_string(eval_index) + " outside trace length " +
                std::to_string(traces.front().size()));
  }
  std::vector<double> out;
  for (const auto& t : traces) out.push_back(t[eval_index - 1]);
  return out;
}

ComparisonMatrix pairwise_comparison_matrix(std::span<const RunSet> runsets, std::optional<std::size_t> eval_index) {
  if (runsets.size() < 2) throw Error("comparison needs at least two run sets");
  std::size_t length = 0;
  for (std::size_t k = 0; k < runsets.size(); ++k) {
    const std::size_t len = padded_traces(runsets[k]).front().size();
    if (k == 0) {
      length = len;
    } else if (!eval_index && len != length) {
      throw Error("run sets have different trace lengths (" + std::to_string(length) + " vs " +
                  std::to_string(len) + ")");
    }
    length = std::min(length, len);
  }
  ComparisonMatrix m;
  m.eval_index = eval_index.value_or(length);
  std::vector<std::vector<double>> samples;
  for (const auto& rs : runsets) {
    m.variants.push_back(rs.variant);
    samples.push_back(values_at(rs, m.eval_index));
  }
  const std::size_t n = runsets.size();
  m.cells.assign(n, std::vector<StatTestResult>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.cells[i][j] = wilcoxon_rank_sum(samples[i], samples[j]);
  }
  return m;
}

SignificanceSummary summarize(const ComparisonMatrix& matrix, std::span<const RunSet> runsets) {
  const std::size_t n = matrix.variants.size();
  if (runsets.size() != n) throw Error("summary needs the run sets behind the matrix");
  SignificanceSummary out;
  for (std::size_t i = 0; i < n; ++i) {
    VariantStanding s;
    s.variant = matrix.variants[i];
    s.median_final = median(values_at(runsets[i], matrix.eval_index));
    const double n1 = static_cast<double>(runsets[i].traces.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !matrix.cells[i][j].significant_at_5pct) continue;
      const double n2 = static_cast<double>(runsets[j].traces.size());
      const double expected = n1 * (n1 + n2 + 1.0) / 2.0;
      if (matrix.cells[i][j].statistic < expected) {
        ++s.outperforms;
      } else if (matrix.cells[i][j].statistic > expected) {
        ++s.outperformed_by;
      }
    }
    out.standings.push_back(s);
  }
  std::stable_sort(out.standings.begin(), out.standings.end(), [](const VariantStanding& a, const VariantStanding& b) {
    if (a.outperformed_by != b.outperformed_by) return a.outperformed_by < b.outperformed_by;
    if (a.outperforms != b.outperforms) return a.outperforms > b.outperforms;
    return de::variant_name(a.variant) < de::variant_name(b.variant);
  });
  for (const auto& s : out.standings) {
    if (s.outperformed_by == 0) out.never_outperformed.push_back(s.variant);
  }
  return out;
}

}  // namespace surropt::stats
