#pragma once

// Weighted-sum scalarization of the three surrogates over a box-bounded
// search space.

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "surropt/surrogate.hpp"

namespace surropt::objective {

struct SearchSpace {
  std::vector<double> lower;
  std::vector<double> upper;

  static SearchSpace unit_box(int dim);
  static SearchSpace uniform(int dim, double lo, double hi);

  int dim() const noexcept { return static_cast<int>(lower.size()); }
  bool contains(std::span<const double> x) const;
  /// Throws ConfigError unless lower < upper elementwise and dimensions agree.
  void validate() const;
};

struct WeightVector {
  double w1 = 1.0;
  double w2 = 1.0;
  double w3 = 1.0;

  std::array<double, 3> as_array() const noexcept { return {w1, w2, w3}; }
  void validate() const;
  bool operator==(const WeightVector&) const = default;
};

/// Scenario 1 favours temperature (1,1,2); scenario 2 weighs all metrics equally.
WeightVector scenario_weights(int scenario_id);

/// Projects every coordinate onto [lower_i, upper_i].
std::vector<double> clamp(const SearchSpace& space, std::span<const double> x);

/// A box-constrained objective that counts its evaluations.
class Objective {
 public:
  explicit Objective(SearchSpace space);
  virtual ~Objective() = default;
  Objective(const Objective&) = delete;
  Objective& operator=(const Objective&) = delete;

  const SearchSpace& space() const noexcept { return space_; }

  /// Throws BoundsError for points outside the space; callers repair first.
  double evaluate(std::span<const double> x);

  std::uint64_t eval_count() const noexcept { return counter_.load(std::memory_order_relaxed); }

 protected:
  virtual double value(std::span<const double> x) const = 0;

 private:
  SearchSpace space_;
  std::atomic<std::uint64_t> counter_{0};
};

class FunctionObjective final : public Objective {
 public:
  using Function = std::function<double(std::span<const double>)>;
  FunctionObjective(SearchSpace space, Function fn) : Objective(std::move(space)), fn_(std::move(fn)) {}

 protected:
  double value(std::span<const double> x) const override { return fn_(x); }

 private:
  Function fn_;
};

/// sum_i x_i^2 on [lo, hi]^dim.
std::unique_ptr<FunctionObjective> make_sphere(int dim, double lo = -5.0, double hi = 5.0);

/// F(x) = w1*l1(x) + w2*l2(x) + w3*l3(x), each l_i on its z-scored scale.
class ScalarizedObjective final : public Objective {
 public:
  using Evaluator = std::function<double(std::span<const double>)>;

  ScalarizedObjective(WeightVector weights, std::array<Evaluator, 3> surrogates, SearchSpace space);

  /// Uses each model's network output on the unit box; checks input dims.
  static std::unique_ptr<ScalarizedObjective> from_models(
      WeightVector weights, std::array<std::shared_ptr<const surrogate::SurrogateModel>, 3> models,
      SearchSpace space);

  const WeightVector& weights() const noexcept { return weights_; }

  /// The three surrogate outputs at x; does not count as an evaluation.
  std::array<double, 3> components(std::span<const double> x) const;

 protected:
  double value(std::span<const double> x) const override;

 private:
  WeightVector weights_;
  std::array<Evaluator, 3> surrogates_;
};

}  // namespace surropt::objective
