#pragma once

// Differential Evolution variants sharing one run interface. Every variant is
// a synchronous generational loop over a fixed population, stops exactly when
// the evaluation budget is spent and repairs candidates by clamping to the box.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "surropt/objective.hpp"
#include "surropt/rng.hpp"

namespace surropt::de {

enum class VariantId { DERAND, DEBEST, DESPS, SHADE, RBDE, JADE, DEGL, DESIM, DCMAEA, OBDE };

inline constexpr std::array<VariantId, 10> kAllVariants = {
    VariantId::DERAND, VariantId::DEBEST, VariantId::DESPS, VariantId::SHADE, VariantId::RBDE,
    VariantId::JADE,   VariantId::DEGL,   VariantId::DESIM, VariantId::DCMAEA, VariantId::OBDE};

std::string_view variant_name(VariantId id);
VariantId variant_from_name(std::string_view name);

using Vector = std::vector<double>;

struct DEConfig {
  int pop_size = 10;
  double crossover_prob = 0.5;
  double scale_factor = 0.7;
  int max_evals = 1000;
  std::uint64_t seed = 0;
  /// Variant-specific overrides; see default_variant_params().
  std::map<std::string, double> variant_params;

  double param(const std::string& key) const;
  void validate() const;
};

/// Recommended defaults of every variant-specific parameter, keyed
/// "<VARIANT>.<name>" (e.g. "JADE.p").
const std::map<std::string, double>& default_variant_params();

struct Individual {
  Vector x;
  double fitness = 0.0;
  bool evaluated = false;
};

using Population = std::vector<Individual>;

struct RunTrace {
  std::vector<double> best_so_far;  // one entry per evaluation
  Vector best_x;
  VariantId variant = VariantId::DERAND;
  std::uint64_t seed = 0;
};

/// Charges evaluations against a budget and keeps the best-so-far trace.
class BudgetedEvaluator {
 public:
  BudgetedEvaluator(objective::Objective& objective, int max_evals);

  const objective::SearchSpace& space() const noexcept { return objective_.space(); }
  bool exhausted() const noexcept { return used() >= max_evals_; }
  int used() const noexcept { return static_cast<int>(trace_.size()); }
  int remaining() const noexcept { return max_evals_ - used(); }

  /// Clamps x into the space and evaluates it. Throws Error when the budget is spent.
  Individual evaluate(Vector x);

  const std::vector<double>& trace() const noexcept { return trace_; }
  const Vector& best_x() const noexcept { return best_x_; }

 private:
  objective::Objective& objective_;
  int max_evals_;
  std::vector<double> trace_;
  Vector best_x_;
};

/// pop_size uniform points in the space, evaluated in order (as far as the budget allows).
Population init_population(const DEConfig& cfg, const objective::SearchSpace& space, Rng& rng,
                           BudgetedEvaluator& evaluator);

/// base + F * (a - b).
Vector differential(std::span<const double> base, std::span<const double> a, std::span<const double> b,
                    double f);

/// `count` distinct indices from [0, n) excluding `exclude`.
std::vector<std::size_t> pick_distinct(std::size_t n, std::size_t exclude, std::size_t count, Rng& rng);

std::size_t best_index(const Population& pop);

Vector mutate_rand1(const Population& pop, std::size_t target, double f, Rng& rng);
Vector mutate_best1(const Population& pop, std::size_t target, double f, Rng& rng);

/// trial_j = donor_j if u_j < CR or j == j_rand, else target_j.
Vector crossover_binomial(std::span<const double> target, std::span<const double> donor, double cr, Rng& rng);

/// The trial survives when its fitness is less than or equal to the target's.
const Individual& select_greedy(const Individual& target, const Individual& trial);

/// lower + upper - x.
Vector opposition_point(const objective::SearchSpace& space, std::span<const double> x);

struct ShadeMemory {
  std::vector<double> f;
  std::vector<double> cr;
  std::size_t next = 0;

  ShadeMemory(std::size_t size, double f0, double cr0) : f(size, f0), cr(size, cr0) {}
};

/// Picks a random cell r; F ~ Cauchy(M_F[r], spread) redrawn while <= 0 and cut at 1,
/// CR ~ Normal(M_CR[r], spread) clipped to [0,1]. spread 0 returns the cell values.
std::pair<double, double> shade_sample_params(const ShadeMemory& memory, Rng& rng, double spread = 0.1);

/// Writes the improvement-weighted Lehmer mean of F and weighted arithmetic mean
/// of CR into the current cell and advances it. No-op without successes.
void shade_update_memory(ShadeMemory& memory, std::span<const double> successful_f,
                         std::span<const double> successful_cr, std::span<const double> improvements);

double lehmer_mean(std::span<const double> values, std::span<const double> weights);

/// current-to-pbest/1: x_i + F (x_pbest - x_i) + F (x_r1 - x~_r2) with pbest among the
/// ceil(p N) best and x~_r2 drawn from the population together with the archive.
Vector jade_mutation(const Population& pop, const std::vector<Vector>& archive, std::size_t target,
                     double f, double p, Rng& rng);

/// weight * global + (1 - weight) * local, where both models are
/// x_i + F (x_best - x_i) + F (x_a - x_b) over the whole population (global) or the
/// ring of radius k around i (local).
Vector degl_mutation(const Population& pop, std::size_t target, double f, int neighborhood_k,
                     double weight, Rng& rng);

/// Linear ranking: weight N + 1 - rank (midranks for ties), normalized.
std::vector<double> rank_selection_probabilities(const Population& pop);

/// Fitness-ordered sweep: each individual joins the nearest existing seed within
/// `radius` whose species has room, otherwise it founds a new species. The seed
/// is the first index of each species.
std::vector<std::vector<std::size_t>> speciation_partition(const Population& pop, double radius,
                                                           std::size_t max_species_size);

/// Sampling weights 1 / (1 + d_ij / mean_d) over j != target (zero at the target),
/// uniform when all other points coincide with the target.
std::vector<double> similarity_weights(const Population& pop, std::size_t target);

/// rand/1 with the three donors drawn without replacement by similarity weight.
Vector similarity_mutation(const Population& pop, std::size_t target, double f, Rng& rng);

/// Search distribution of the differential covariance-adaptation variant.
struct DcmaeaState {
  Eigen::VectorXd mean;
  double sigma = 0.3;
  double de_scale = 0.7;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd basis;      // eigenvectors of cov
  Eigen::VectorXd axis;       // sqrt of eigenvalues
  Eigen::VectorXd path_c;
  Eigen::VectorXd path_sigma;
  Eigen::VectorXd weights;    // recombination weights, mu entries
  double mu_eff = 1.0;
  double c_c = 0.0, c_sigma = 0.0, c_1 = 0.0, c_mu = 0.0, d_sigma = 1.0, chi_n = 1.0;
  int generation = 0;
  int eigen_repairs = 0;      // eigenvalue floorings applied so far

  static DcmaeaState create(const Eigen::VectorXd& mean, double sigma, double de_scale, int lambda);

  /// Re-derives basis/axis from cov, flooring eigenvalues that are not safely positive.
  void decompose();
};

/// v_i = mean + sigma * B D z_i + de_scale * (x_r1 - x_r2), z_i ~ N(0, I).
std::vector<Vector> dcmaea_sample(const DcmaeaState& state, const Population& pop, Rng& rng);

/// Mean, evolution paths, covariance and step size from the ranked offspring.
void dcmaea_update(DcmaeaState& state, const Population& offspring);

/// One generation: sample, clamp, evaluate, greedy replacement of each target,
/// then the distribution update. Returns the evaluated offspring.
Population dcmaea_step(DcmaeaState& state, Population& pop, BudgetedEvaluator& evaluator, Rng& rng);

/// Runs one variant until exactly cfg.max_evals evaluations have been charged.
RunTrace run(VariantId variant, objective::Objective& objective, const DEConfig& cfg);

}  // namespace surropt::de
