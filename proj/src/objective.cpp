#include "surropt/objective.hpp"

#include <algorithm>
#include <cmath>

#include "surropt/error.hpp"

namespace surropt::objective {

SearchSpace SearchSpace::unit_box(int dim) { return uniform(dim, 0.0, 1.0); }

SearchSpace SearchSpace::uniform(int dim, double lo, double hi) {
  SearchSpace s{std::vector<double>(static_cast<std::size_t>(dim), lo),
                std::vector<double>(static_cast<std::size_t>(dim), hi)};
  s.validate();
  return s;
}

bool SearchSpace::contains(std::span<const double> x) const {
  if (x.size() != lower.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

void SearchSpace::validate() const {
  if (lower.empty()) throw ConfigError("search space has dimension 0");
  if (lower.size() != upper.size()) throw ConfigError("bound vectors differ in length");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) {
      throw ConfigError("lower bound not below upper bound in dimension " + std::to_string(i + 1));
    }
  }
}

void WeightVector::validate() const {
  for (double w : as_array()) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weights must be finite and nonnegative");
  }
  if (!(w1 > 0.0 || w2 > 0.0 || w3 > 0.0)) throw ConfigError("at least one weight must be positive");
}

WeightVector scenario_weights(int scenario_id) {
  switch (scenario_id) {
    case 1:
      return {1.0, 1.0, 2.0};
    case 2:
      return {1.0, 1.0, 1.0};
    default:
      throw ConfigError("unknown scenario " + std::to_string(scenario_id) + " (expected 1 or 2)");
  }
}

std::vector<double> clamp(const SearchSpace& space, std::span<const double> x) {
  if (x.size() != space.lower.size()) throw DimensionError("vector dimension differs from search space");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], space.lower[i], space.upper[i]);
  return out;
}

Objective::Objective(SearchSpace space) : space_(std::move(space)) { space_.validate(); }

double Objective::evaluate(std::span<const double> x) {
  if (x.size() != space_.lower.size()) throw DimensionError("point dimension differs from search space");
  if (!space_.contains(x)) throw BoundsError("point lies outside the search space");
  counter_.fetch_add(1, std::memory_order_relaxed);
  return value(x);
}

std::unique_ptr<FunctionObjective> make_sphere(int dim, double lo, double hi) {
  return std::make_unique<FunctionObjective>(SearchSpace::uniform(dim, lo, hi),
                                             [](std::span<const double> x) {
                                               double s = 0.0;
                                               for (double v : x) s += v * v;
                                               return s;
                                             });
}

ScalarizedObjective::ScalarizedObjective(WeightVector weights, std::array<Evaluator, 3> surrogates,
                                         SearchSpace space)
    : Objective(std::move(space)), weights_(weights), surrogates_(std::move(surrogates)) {
  weights_.validate();
  for (const auto& s : surrogates_) {
    if (!s) throw ConfigError("scalarized objective needs three surrogate evaluators");
  }
}

std::unique_ptr<ScalarizedObjective> ScalarizedObjective::from_models(
    WeightVector weights, std::array<std::shared_ptr<const surrogate::SurrogateModel>, 3> models,
    SearchSpace space) {
  std::array<Evaluator, 3> evals;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!models[i]) throw ConfigError("missing surrogate model f" + std::to_string(i + 1));
    if (models[i]->network.input_dim() != space.dim()) {
      throw DimensionError("surrogate f" + std::to_string(i + 1) + " expects " +
                           std::to_string(models[i]->network.input_dim()) + " inputs, search space has " +
                           std::to_string(space.dim()));
    }
    evals[i] = [model = models[i]](std::span<const double> x) { return model->predict_normalized(x); };
  }
  return std::make_unique<ScalarizedObjective>(weights, std::move(evals), std::move(space));
}

std::array<double, 3> ScalarizedObjective::components(std::span<const double> x) const {
  return {surrogates_[0](x), surrogates_[1](x), surrogates_[2](x)};
}

double ScalarizedObjective::value(std::span<const double> x) const {
  const auto c = components(x);
  return weights_.w1 * c[0] + weights_.w2 * c[1] + weights_.w3 * c[2];
}

}  // namespace surropt::objective
