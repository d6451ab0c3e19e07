#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surropt/de_suite.hpp"
#include "surropt/error.hpp"

namespace surropt::de {

namespace {

using objective::SearchSpace;

Eigen::Map<const Eigen::VectorXd> as_eigen(const Vector& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// Offspring of one synchronous generation replace their targets afterwards.
template <typename DonorFn>
void classic_generation(Population& pop, BudgetedEvaluator& ev, double cr, Rng& rng, DonorFn&& donor) {
  Population next = pop;
  for (std::size_t i = 0; i < pop.size() && !ev.exhausted(); ++i) {
    const Vector v = donor(i);
    const Individual trial = ev.evaluate(crossover_binomial(pop[i].x, v, cr, rng));
    next[i] = select_greedy(pop[i], trial);
  }
  pop = std::move(next);
}

void run_derand(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  while (!ev.exhausted()) {
    classic_generation(pop, ev, cfg.crossover_prob, rng,
                       [&](std::size_t i) { return mutate_rand1(pop, i, cfg.scale_factor, rng); });
  }
}

void run_debest(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  while (!ev.exhausted()) {
    classic_generation(pop, ev, cfg.crossover_prob, rng,
                       [&](std::size_t i) { return mutate_best1(pop, i, cfg.scale_factor, rng); });
  }
}

double box_diagonal(const SearchSpace& space) {
  double s = 0.0;
  for (std::size_t j = 0; j < space.lower.size(); ++j) {
    s += (space.upper[j] - space.lower[j]) * (space.upper[j] - space.lower[j]);
  }
  return std::sqrt(s);
}

// Species of four or more run rand/1 among their own members; smaller species
// use their seed as base vector with a difference drawn from the whole population.
void run_desps(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  const double radius = cfg.param("DESPS.radius") * box_diagonal(ev.space());
  const auto cap = static_cast<std::size_t>(std::max(1.0, cfg.param("DESPS.max_species_size")));
  while (!ev.exhausted()) {
    const auto species = speciation_partition(pop, radius, cap);
    std::vector<std::size_t> species_of(pop.size());
    for (std::size_t s = 0; s < species.size(); ++s) {
      for (auto idx : species[s]) species_of[idx] = s;
    }
    classic_generation(pop, ev, cfg.crossover_prob, rng, [&](std::size_t i) {
      const auto& members = species[species_of[i]];
      if (members.size() >= 4) {
        std::vector<std::size_t> others;
        for (auto idx : members) {
          if (idx != i) others.push_back(idx);
        }
        const auto pick = pick_distinct(others.size(), others.size(), 3, rng);
        return differential(pop[others[pick[0]]].x, pop[others[pick[1]]].x, pop[others[pick[2]]].x,
                            cfg.scale_factor);
      }
      const auto r = pick_distinct(pop.size(), i, 2, rng);
      return differential(pop[members.front()].x, pop[r[0]].x, pop[r[1]].x, cfg.scale_factor);
    });
  }
}

void trim_archive(std::vector<Vector>& archive, std::size_t limit, Rng& rng) {
  while (archive.size() > limit) {
    const std::size_t k = uniform_index(rng, archive.size());
    archive[k] = std::move(archive.back());
    archive.pop_back();
  }
}

// Adaptive loop shared by SHADE and JADE: per-individual F/CR, current-to-pbest/1
// with archive, success lists for the parameter update.
struct AdaptiveOutcome {
  std::vector<double> f;
  std::vector<double> cr;
  std::vector<double> improvement;
};

template <typename SampleFn, typename PFn>
AdaptiveOutcome adaptive_generation(Population& pop, std::vector<Vector>& archive, std::size_t archive_limit,
                                    BudgetedEvaluator& ev, Rng& rng, SampleFn&& sample, PFn&& p_for) {
  AdaptiveOutcome out;
  Population next = pop;
  for (std::size_t i = 0; i < pop.size() && !ev.exhausted(); ++i) {
    const auto [f, cr] = sample();
    const Vector v = jade_mutation(pop, archive, i, f, p_for(), rng);
    const Individual trial = ev.evaluate(crossover_binomial(pop[i].x, v, cr, rng));
    if (trial.fitness < pop[i].fitness) {
      archive.push_back(pop[i].x);
      out.f.push_back(f);
      out.cr.push_back(cr);
      out.improvement.push_back(pop[i].fitness - trial.fitness);
    }
    next[i] = select_greedy(pop[i], trial);
  }
  pop = std::move(next);
  trim_archive(archive, archive_limit, rng);
  return out;
}

void run_shade(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  const auto h = static_cast<std::size_t>(std::max(1.0, cfg.param("SHADE.memory_size")));
  ShadeMemory memory(h, cfg.scale_factor, cfg.crossover_prob);
  const auto archive_limit =
      static_cast<std::size_t>(std::round(cfg.param("SHADE.archive_factor") * static_cast<double>(pop.size())));
  const double p_min = 2.0 / static_cast<double>(pop.size());
  const double p_max = std::max(p_min, cfg.param("SHADE.p_max"));
  std::vector<Vector> archive;
  while (!ev.exhausted()) {
    const auto outcome = adaptive_generation(
        pop, archive, archive_limit, ev, rng, [&] { return shade_sample_params(memory, rng); },
        [&] { return std::uniform_real_distribution<double>(p_min, p_max)(rng); });
    shade_update_memory(memory, outcome.f, outcome.cr, outcome.improvement);
  }
}

void run_jade(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  double mu_f = cfg.scale_factor;
  double mu_cr = cfg.crossover_prob;
  const double c = cfg.param("JADE.c");
  const double p = cfg.param("JADE.p");
  const auto archive_limit =
      static_cast<std::size_t>(std::round(cfg.param("JADE.archive_factor") * static_cast<double>(pop.size())));
  std::vector<Vector> archive;
  while (!ev.exhausted()) {
    ShadeMemory single(1, mu_f, mu_cr);
    const auto outcome = adaptive_generation(
        pop, archive, archive_limit, ev, rng, [&] { return shade_sample_params(single, rng); },
        [&] { return p; });
    if (!outcome.f.empty()) {
      const std::vector<double> equal(outcome.f.size(), 1.0);
      mu_cr = (1.0 - c) * mu_cr +
              c * std::accumulate(outcome.cr.begin(), outcome.cr.end(), 0.0) / static_cast<double>(outcome.cr.size());
      mu_f = (1.0 - c) * mu_f + c * lehmer_mean(outcome.f, equal);
    }
  }
}

// Base vector drawn by linear rank probability, difference pair uniformly.
void run_rbde(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  while (!ev.exhausted()) {
    const auto prob = rank_selection_probabilities(pop);
    classic_generation(pop, ev, cfg.crossover_prob, rng, [&](std::size_t i) {
      std::vector<double> w = prob;
      w[i] = 0.0;
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      const std::size_t base = pick(rng);
      std::vector<std::size_t> rest;
      for (std::size_t k = 0; k < pop.size(); ++k) {
        if (k != i && k != base) rest.push_back(k);
      }
      const auto r = pick_distinct(rest.size(), rest.size(), 2, rng);
      return differential(pop[base].x, pop[rest[r[0]]].x, pop[rest[r[1]]].x, cfg.scale_factor);
    });
  }
}

void run_degl(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  const int k = static_cast<int>(cfg.param("DEGL.k"));
  const double weight = cfg.param("DEGL.weight");
  while (!ev.exhausted()) {
    classic_generation(pop, ev, cfg.crossover_prob, rng, [&](std::size_t i) {
      return degl_mutation(pop, i, cfg.scale_factor, k, weight, rng);
    });
  }
}

void run_desim(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  while (!ev.exhausted()) {
    classic_generation(pop, ev, cfg.crossover_prob, rng,
                       [&](std::size_t i) { return similarity_mutation(pop, i, cfg.scale_factor, rng); });
  }
}

// Keeps the pop.size() fittest of pop and extra (stable, pop first).
void select_fittest(Population& pop, Population extra) {
  const std::size_t n = pop.size();
  Population all = std::move(pop);
  for (auto& e : extra) all.push_back(std::move(e));
  std::stable_sort(all.begin(), all.end(), [](const Individual& a, const Individual& b) {
    if (a.evaluated != b.evaluated) return a.evaluated;
    return a.fitness < b.fitness;
  });
  all.resize(n);
  pop = std::move(all);
}

// Opposition-based initialization, rand/1/bin generations and, with
// probability jump_rate, a generation jump to the opposites under the
// population's current per-coordinate range.
void run_obde(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  const double jump_rate = cfg.param("OBDE.jump_rate");
  {
    Population opposite;
    for (const auto& ind : pop) {
      if (ev.exhausted()) break;
      opposite.push_back(ev.evaluate(opposition_point(ev.space(), ind.x)));
    }
    select_fittest(pop, std::move(opposite));
  }
  while (!ev.exhausted()) {
    if (uniform01(rng) < jump_rate) {
      const std::size_t dim = pop.front().x.size();
      Vector lo(dim, std::numeric_limits<double>::infinity());
      Vector hi(dim, -std::numeric_limits<double>::infinity());
      for (const auto& ind : pop) {
        for (std::size_t j = 0; j < dim; ++j) {
          lo[j] = std::min(lo[j], ind.x[j]);
          hi[j] = std::max(hi[j], ind.x[j]);
        }
      }
      Population opposite;
      for (const auto& ind : pop) {
        if (ev.exhausted()) break;
        Vector o(dim);
        for (std::size_t j = 0; j < dim; ++j) o[j] = lo[j] + hi[j] - ind.x[j];
        opposite.push_back(ev.evaluate(std::move(o)));
      }
      select_fittest(pop, std::move(opposite));
    } else {
      classic_generation(pop, ev, cfg.crossover_prob, rng,
                         [&](std::size_t i) { return mutate_rand1(pop, i, cfg.scale_factor, rng); });
    }
  }
}

void run_dcmaea(Population& pop, BudgetedEvaluator& ev, const DEConfig& cfg, Rng& rng) {
  const auto& space = ev.space();
  const std::size_t dim = space.lower.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& ind : pop) mean += as_eigen(ind.x);
  mean /= static_cast<double>(pop.size());
  double width = 0.0;
  for (std::size_t j = 0; j < dim; ++j) width += space.upper[j] - space.lower[j];
  width /= static_cast<double>(dim);
  auto state = DcmaeaState::create(mean, cfg.param("DCMAEA.sigma0") * width, cfg.scale_factor,
                                   static_cast<int>(pop.size()));
  while (!ev.exhausted()) dcmaea_step(state, pop, ev, rng);
}

}  // namespace

DcmaeaState DcmaeaState::create(const Eigen::VectorXd& mean, double sigma, double de_scale, int lambda) {
  if (lambda < 2) throw ConfigError("DCMAEA needs at least two offspring per generation");
  const auto n = static_cast<double>(mean.size());
  DcmaeaState s;
  s.mean = mean;
  s.sigma = sigma;
  s.de_scale = de_scale;
  s.cov = Eigen::MatrixXd::Identity(mean.size(), mean.size());
  s.basis = s.cov;
  s.axis = Eigen::VectorXd::Ones(mean.size());
  s.path_c = Eigen::VectorXd::Zero(mean.size());
  s.path_sigma = Eigen::VectorXd::Zero(mean.size());

  const int mu = lambda / 2;
  s.weights.resize(mu);
  for (int k = 0; k < mu; ++k) s.weights[k] = std::log((lambda + 1) / 2.0) - std::log(k + 1.0);
  s.weights /= s.weights.sum();
  s.mu_eff = 1.0 / s.weights.squaredNorm();

  s.c_c = (4.0 + s.mu_eff / n) / (n + 4.0 + 2.0 * s.mu_eff / n);
  s.c_sigma = (s.mu_eff + 2.0) / (n + s.mu_eff + 5.0);
  s.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + s.mu_eff);
  s.c_mu = std::min(1.0 - s.c_1, 2.0 * (s.mu_eff - 2.0 + 1.0 / s.mu_eff) / ((n + 2.0) * (n + 2.0) + s.mu_eff));
  s.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((s.mu_eff - 1.0) / (n + 1.0)) - 1.0) + s.c_sigma;
  s.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
  return s;
}

void DcmaeaState::decompose() {
  cov = 0.5 * (cov + cov.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::VectorXd eig = solver.eigenvalues();
  basis = solver.eigenvectors();
  const double floor = 1e-14 * std::max(1.0, eig.maxCoeff());
  if (eig.minCoeff() < floor) {
    eig = eig.cwiseMax(floor);
    cov = basis * eig.asDiagonal() * basis.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    ++eigen_repairs;
  }
  axis = eig.cwiseSqrt();
}

std::vector<Vector> dcmaea_sample(const DcmaeaState& state, const Population& pop, Rng& rng) {
  const auto dim = state.mean.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    Eigen::VectorXd z(dim);
    for (Eigen::Index j = 0; j < dim; ++j) z[j] = normal(rng);
    const auto r = pick_distinct(pop.size(), i, 2, rng);
    Eigen::VectorXd v = state.mean + state.sigma * (state.basis * state.axis.cwiseProduct(z)) +
                        state.de_scale * (as_eigen(pop[r[0]].x) - as_eigen(pop[r[1]].x));
    out.emplace_back(v.data(), v.data() + v.size());
  }
  return out;
}

void dcmaea_update(DcmaeaState& state, const Population& offspring) {
  const auto mu = static_cast<std::size_t>(state.weights.size());
  if (offspring.size() < mu) throw ConfigError("too few offspring for the recombination weights");
  if (!(state.sigma > 0.0)) return;  // degenerate distribution, nothing to learn
  std::vector<std::size_t> order(offspring.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return offspring[a].fitness < offspring[b].fitness;
  });

  const auto dim = state.mean.size();
  const auto n = static_cast<double>(dim);
  Eigen::MatrixXd steps(dim, static_cast<Eigen::Index>(mu));
  Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = 0; k < mu; ++k) {
    const auto x = as_eigen(offspring[order[k]].x);
    steps.col(static_cast<Eigen::Index>(k)) = (x - state.mean) / state.sigma;
    new_mean += state.weights[static_cast<Eigen::Index>(k)] * x;
  }
  const Eigen::VectorXd step_w = (new_mean - state.mean) / state.sigma;
  state.mean = new_mean;
  ++state.generation;

  const Eigen::MatrixXd inv_sqrt =
      state.basis * state.axis.cwiseInverse().asDiagonal() * state.basis.transpose();
  state.path_sigma = (1.0 - state.c_sigma) * state.path_sigma +
                     std::sqrt(state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff) * (inv_sqrt * step_w);
  const double ps_norm = state.path_sigma.norm();
  const double decay = 1.0 - std::pow(1.0 - state.c_sigma, 2.0 * state.generation);
  const bool h_sigma = ps_norm / std::sqrt(std::max(decay, 1e-300)) < (1.4 + 2.0 / (n + 1.0)) * state.chi_n;
  state.path_c = (1.0 - state.c_c) * state.path_c +
                 (h_sigma ? std::sqrt(state.c_c * (2.0 - state.c_c) * state.mu_eff) : 0.0) * step_w;

  const Eigen::MatrixXd rank_mu = steps * state.weights.asDiagonal() * steps.transpose();
  const double correction = h_sigma ? 0.0 : state.c_c * (2.0 - state.c_c);
  state.cov = (1.0 - state.c_1 - state.c_mu) * state.cov +
              state.c_1 * (state.path_c * state.path_c.transpose() + correction * state.cov) +
              state.c_mu * rank_mu;
  state.sigma *= std::exp((state.c_sigma / state.d_sigma) * (ps_norm / state.chi_n - 1.0));
  state.decompose();
}

Population dcmaea_step(DcmaeaState& state, Population& pop, BudgetedEvaluator& evaluator, Rng& rng) {
  const auto candidates = dcmaea_sample(state, pop, rng);
  Population offspring;
  Population next = pop;
  for (std::size_t i = 0; i < candidates.size() && !evaluator.exhausted(); ++i) {
    offspring.push_back(evaluator.evaluate(candidates[i]));
    next[i] = select_greedy(pop[i], offspring.back());
  }
  pop = std::move(next);
  if (offspring.size() == candidates.size()) dcmaea_update(state, offspring);
  return offspring;
}

RunTrace run(VariantId variant, objective::Objective& objective, const DEConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  BudgetedEvaluator ev(objective, cfg.max_evals);
  Population pop = init_population(cfg, objective.space(), rng, ev);

  switch (variant) {
    case VariantId::DERAND: run_derand(pop, ev, cfg, rng); break;
    case VariantId::DEBEST: run_debest(pop, ev, cfg, rng); break;
    case VariantId::DESPS: run_desps(pop, ev, cfg, rng); break;
    case VariantId::SHADE: run_shade(pop, ev, cfg, rng); break;
    case VariantId::RBDE: run_rbde(pop, ev, cfg, rng); break;
    case VariantId::JADE: run_jade(pop, ev, cfg, rng); break;
    case VariantId::DEGL: run_degl(pop, ev, cfg, rng); break;
    case VariantId::DESIM: run_desim(pop, ev, cfg, rng); break;
    case VariantId::DCMAEA: run_dcmaea(pop, ev, cfg, rng); break;
    case VariantId::OBDE: run_obde(pop, ev, cfg, rng); break;
  }

  RunTrace trace;
  trace.best_so_far = ev.trace();
  trace.best_x = ev.best_x();
  trace.variant = variant;
  trace.seed = cfg.seed;
  return trace;
}

}  // namespace surropt::de
