#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "surropt/de_suite.hpp"
#include "surropt/error.hpp"

namespace surropt::de {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

void require_population(const Population& pop, std::size_t minimum, const char* op) {
  if (pop.size() < minimum) {
    throw ConfigError(std::string(op) + " needs a population of at least " + std::to_string(minimum) +
                      ", got " + std::to_string(pop.size()));
  }
}

// Weighted draw of one index; weights need not be normalized.
std::size_t weighted_pick(std::span<const double> weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last_positive = k;
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return last_positive;
}

}  // namespace

std::string_view variant_name(VariantId id) {
  switch (id) {
    case VariantId::DERAND: return "DERAND";
    case VariantId::DEBEST: return "DEBEST";
    case VariantId::DESPS: return "DESPS";
    case VariantId::SHADE: return "SHADE";
    case VariantId::RBDE: return "RBDE";
    case VariantId::JADE: return "JADE";
    case VariantId::DEGL: return "DEGL";
    case VariantId::DESIM: return "DESIM";
    case VariantId::DCMAEA: return "DCMAEA";
    case VariantId::OBDE: return "OBDE";
  }
  return "?";
}

VariantId variant_from_name(std::string_view name) {
  for (auto id : kAllVariants) {
    if (variant_name(id) == name) return id;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

const std::map<std::string, double>& default_variant_params() {
  static const std::map<std::string, double> defaults = {
      {"DESPS.radius", 0.2},            // fraction of the box diagonal
      {"DESPS.max_species_size", 5.0},
      {"SHADE.memory_size", 10.0},
      {"SHADE.p_max", 0.2},             // p_i ~ U[2/N, p_max]
      {"SHADE.archive_factor", 1.0},
      {"JADE.p", 0.1},
      {"JADE.c", 0.1},
      {"JADE.archive_factor", 1.0},
      {"DEGL.k", 2.0},
      {"DEGL.weight", 0.5},
      {"DCMAEA.sigma0", 0.3},           // fraction of the mean box width
      {"OBDE.jump_rate", 0.3},
  };
  return defaults;
}

double DEConfig::param(const std::string& key) const {
  if (auto it = variant_params.find(key); it != variant_params.end()) return it->second;
  const auto& defaults = default_variant_params();
  if (auto it = defaults.find(key); it != defaults.end()) return it->second;
  throw ConfigError("unknown variant parameter '" + key + "'");
}

void DEConfig::validate() const {
  if (pop_size < 4) throw ConfigError("pop_size must be >= 4, got " + std::to_string(pop_size));
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ConfigError("crossover_prob must lie in [0,1]");
  if (!(scale_factor > 0.0) || !std::isfinite(scale_factor)) throw ConfigError("scale_factor must be > 0");
  if (max_evals < pop_size) throw ConfigError("max_evals must be >= pop_size");
  const auto& defaults = default_variant_params();
  for (const auto& [key, value] : variant_params) {
    if (!defaults.contains(key)) throw ConfigError("unknown variant parameter '" + key + "'");
    if (!std::isfinite(value)) throw ConfigError("variant parameter '" + key + "' is not finite");
  }
}

BudgetedEvaluator::BudgetedEvaluator(objective::Objective& objective, int max_evals)
    : objective_(objective), max_evals_(max_evals) {
  trace_.reserve(static_cast<std::size_t>(std::max(max_evals, 0)));
}

Individual BudgetedEvaluator::evaluate(Vector x) {
  if (exhausted()) throw Error("evaluation budget exhausted");
  Individual ind{objective::clamp(space(), x), 0.0, true};
  ind.fitness = objective_.evaluate(ind.x);
  if (!std::isfinite(ind.fitness)) throw Error("objective returned a non-finite value");
  if (trace_.empty() || ind.fitness < trace_.back()) {
    trace_.push_back(ind.fitness);
    best_x_ = ind.x;
  } else {
    trace_.push_back(trace_.back());
  }
  return ind;
}

Population init_population(const DEConfig& cfg, const objective::SearchSpace& space, Rng& rng,
                           BudgetedEvaluator& evaluator) {
  cfg.validate();
  Population pop;
  pop.reserve(static_cast<std::size_t>(cfg.pop_size));
  for (int i = 0; i < cfg.pop_size; ++i) {
    Vector x(space.lower.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = std::uniform_real_distribution<double>(space.lower[j], space.upper[j])(rng);
    }
    if (evaluator.exhausted()) {
      pop.push_back({std::move(x), 0.0, false});
    } else {
      pop.push_back(evaluator.evaluate(std::move(x)));
    }
  }
  return pop;
}

Vector differential(std::span<const double> base, std::span<const double> a, std::span<const double> b,
                    double f) {
  if (a.size() != base.size() || b.size() != base.size()) throw DimensionError("vector dimensions differ");
  Vector v(base.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = base[j] + f * (a[j] - b[j]);
  return v;
}

std::vector<std::size_t> pick_distinct(std::size_t n, std::size_t exclude, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool;
  pool.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (k != exclude) pool.push_back(k);
  }
  if (pool.size() < count) throw ConfigError("not enough distinct donors");
  for (std::size_t k = 0; k < count; ++k) {
    std::swap(pool[k], pool[k + uniform_index(rng, pool.size() - k)]);
  }
  pool.resize(count);
  return pool;
}

std::size_t best_index(const Population& pop) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < pop.size(); ++k) {
    if (pop[k].fitness < pop[best].fitness) best = k;
  }
  return best;
}

Vector mutate_rand1(const Population& pop, std::size_t target, double f, Rng& rng) {
  require_population(pop, 4, "rand/1 mutation");
  const auto r = pick_distinct(pop.size(), target, 3, rng);
  return differential(pop[r[0]].x, pop[r[1]].x, pop[r[2]].x, f);
}

Vector mutate_best1(const Population& pop, std::size_t target, double f, Rng& rng) {
  require_population(pop, 4, "best/1 mutation");
  const auto r = pick_distinct(pop.size(), target, 2, rng);
  return differential(pop[best_index(pop)].x, pop[r[0]].x, pop[r[1]].x, f);
}

Vector crossover_binomial(std::span<const double> target, std::span<const double> donor, double cr, Rng& rng) {
  if (target.size() != donor.size()) throw DimensionError("crossover vectors differ in dimension");
  if (target.empty()) throw DimensionError("crossover of empty vectors");
  const std::size_t forced = uniform_index(rng, target.size());
  Vector trial(target.begin(), target.end());
  for (std::size_t j = 0; j < trial.size(); ++j) {
    const double u = uniform01(rng);
    if (u < cr || j == forced) trial[j] = donor[j];
  }
  return trial;
}

const Individual& select_greedy(const Individual& target, const Individual& trial) {
  if (!target.evaluated || !trial.evaluated) throw Error("selection between unevaluated individuals");
  return trial.fitness <= target.fitness ? trial : target;
}

Vector opposition_point(const objective::SearchSpace& space, std::span<const double> x) {
  if (!space.contains(x)) throw BoundsError("opposition of a point outside the search space");
  Vector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = space.lower[j] + space.upper[j] - x[j];
  return out;
}

std::pair<double, double> shade_sample_params(const ShadeMemory& memory, Rng& rng, double spread) {
  if (memory.f.empty() || memory.f.size() != memory.cr.size()) throw ConfigError("SHADE memory is empty");
  const std::size_t r = uniform_index(rng, memory.f.size());
  const double mf = memory.f[r];
  const double mcr = memory.cr[r];
  if (spread <= 0.0) return {std::clamp(mf, std::numeric_limits<double>::min(), 1.0), std::clamp(mcr, 0.0, 1.0)};

  const double cr = std::clamp(std::normal_distribution<double>(mcr, spread)(rng), 0.0, 1.0);
  std::cauchy_distribution<double> cauchy(mf, spread);
  double f = cauchy(rng);
  while (!(f > 0.0)) f = cauchy(rng);
  return {std::min(f, 1.0), cr};
}

double lehmer_mean(std::span<const double> values, std::span<const double> weights) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    num += weights[k] * values[k] * values[k];
    den += weights[k] * values[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

void shade_update_memory(ShadeMemory& memory, std::span<const double> successful_f,
                         std::span<const double> successful_cr, std::span<const double> improvements) {
  if (successful_f.size() != successful_cr.size() || successful_f.size() != improvements.size()) {
    throw DimensionError("success lists differ in length");
  }
  if (successful_f.empty()) return;
  const double total = std::accumulate(improvements.begin(), improvements.end(), 0.0);
  std::vector<double> w(improvements.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = total > 0.0 ? improvements[k] / total : 1.0 / static_cast<double>(w.size());
  }
  double cr = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) cr += w[k] * successful_cr[k];
  memory.f[memory.next] = lehmer_mean(successful_f, w);
  memory.cr[memory.next] = cr;
  memory.next = (memory.next + 1) % memory.f.size();
}

Vector jade_mutation(const Population& pop, const std::vector<Vector>& archive, std::size_t target,
                     double f, double p, Rng& rng) {
  if (pop.empty()) throw ConfigError("current-to-pbest mutation on an empty population");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0,1]");
  const std::size_t n = pop.size();
  if (n < 2 || n + archive.size() < 3) throw ConfigError("not enough distinct donors for current-to-pbest");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
  const auto top = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-12)), 1, n);
  const std::size_t pbest = order[uniform_index(rng, top)];

  std::size_t r1 = 0;
  do {
    r1 = uniform_index(rng, n);
  } while (r1 == target);
  std::size_t r2 = 0;
  do {
    r2 = uniform_index(rng, n + archive.size());
  } while (r2 == target || r2 == r1);
  const Vector& x2 = r2 < n ? pop[r2].x : archive[r2 - n];

  const auto& xi = pop[target].x;
  Vector v(xi.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    v[j] = xi[j] + f * (pop[pbest].x[j] - xi[j]) + f * (pop[r1].x[j] - x2[j]);
  }
  return v;
}

Vector degl_mutation(const Population& pop, std::size_t target, double f, int neighborhood_k,
                     double weight, Rng& rng) {
  const std::size_t n = pop.size();
  if (neighborhood_k < 1 || 2 * static_cast<std::size_t>(neighborhood_k) >= n) {
    throw ConfigError("DEGL neighborhood radius must satisfy 1 <= k < N/2");
  }
  const auto k = static_cast<std::size_t>(neighborhood_k);
  std::vector<std::size_t> ring;
  for (std::size_t off = n - k; off <= n + k; ++off) ring.push_back((target + off) % n);
  std::size_t local_best = ring.front();
  for (auto idx : ring) {
    if (pop[idx].fitness < pop[local_best].fitness) local_best = idx;
  }
  std::vector<std::size_t> others;
  for (auto idx : ring) {
    if (idx != target) others.push_back(idx);
  }
  const std::size_t p = others[uniform_index(rng, others.size())];
  std::size_t q = p;
  while (q == p) q = others[uniform_index(rng, others.size())];

  const auto r = pick_distinct(n, target, 2, rng);
  const std::size_t global_best = best_index(pop);
  const auto& xi = pop[target].x;
  Vector v(xi.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double local = xi[j] + f * (pop[local_best].x[j] - xi[j]) + f * (pop[p].x[j] - pop[q].x[j]);
    const double global = xi[j] + f * (pop[global_best].x[j] - xi[j]) + f * (pop[r[0]].x[j] - pop[r[1]].x[j]);
    v[j] = weight * global + (1.0 - weight) * local;
  }
  return v;
}

std::vector<double> rank_selection_probabilities(const Population& pop) {
  const std::size_t n = pop.size();
  if (n == 0) return {};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
  std::vector<double> rank(n);
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e + 1 < n && pop[order[e + 1]].fitness == pop[order[s]].fitness) ++e;
    const double mid = 0.5 * static_cast<double>(s + e) + 1.0;
    for (std::size_t k = s; k <= e; ++k) rank[order[k]] = mid;
    s = e + 1;
  }
  std::vector<double> prob(n);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    prob[k] = static_cast<double>(n) + 1.0 - rank[k];
    total += prob[k];
  }
  for (auto& v : prob) v /= total;
  return prob;
}

std::vector<std::vector<std::size_t>> speciation_partition(const Population& pop, double radius,
                                                           std::size_t max_species_size) {
  const std::size_t cap = std::max<std::size_t>(max_species_size, 1);
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
  const double r2 = radius * radius;
  std::vector<std::vector<std::size_t>> species;
  for (auto idx : order) {
    std::size_t chosen = species.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < species.size(); ++s) {
      if (species[s].size() >= cap) continue;
      const double d = squared_distance(pop[idx].x, pop[species[s].front()].x);
      if (d <= r2 && d < best) {
        best = d;
        chosen = s;
      }
    }
    if (chosen == species.size()) {
      species.push_back({idx});
    } else {
      species[chosen].push_back(idx);
    }
  }
  return species;
}

std::vector<double> similarity_weights(const Population& pop, std::size_t target) {
  const std::size_t n = pop.size();
  std::vector<double> dist(n, 0.0);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == target) continue;
    dist[k] = std::sqrt(squared_distance(pop[k].x, pop[target].x));
    mean += dist[k];
  }
  mean /= static_cast<double>(n - 1);
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == target) continue;
    w[k] = mean > 0.0 ? 1.0 / (1.0 + dist[k] / mean) : 1.0;
  }
  return w;
}

Vector similarity_mutation(const Population& pop, std::size_t target, double f, Rng& rng) {
  require_population(pop, 4, "similarity mutation");
  auto w = similarity_weights(pop, target);
  std::array<std::size_t, 3> r{};
  for (auto& idx : r) {
    idx = weighted_pick(w, rng);
    w[idx] = 0.0;
  }
  return differential(pop[r[0]].x, pop[r[1]].x, pop[r[2]].x, f);
}

}  // namespace surropt::de
