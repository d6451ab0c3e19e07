#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "surropt/de_suite.hpp"
#include "surropt/error.hpp"

using namespace surropt;
using namespace surropt::de;

namespace {

Population make_pop(const std::vector<Vector>& xs, std::vector<double> fit = {}) {
  Population pop;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    pop.push_back({xs[k], fit.empty() ? static_cast<double>(k) : fit[k], true});
  }
  return pop;
}

Population random_pop(std::size_t n, std::size_t dim, Rng& rng) {
  Population pop;
  for (std::size_t k = 0; k < n; ++k) {
    Vector x(dim);
    for (auto& v : x) v = uniform01(rng);
    pop.push_back({x, uniform01(rng), true});
  }
  return pop;
}

bool close(const Vector& a, const Vector& b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (std::abs(a[j] - b[j]) > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (auto v : kAllVariants) CHECK(variant_from_name(variant_name(v)) == v);
  CHECK(variant_name(VariantId::DCMAEA) == "DCMAEA");
  CHECK_THROWS_AS(variant_from_name("NOPE"), ConfigError);
}

TEST_CASE("config validation") {
  DEConfig cfg;
  CHECK(cfg.pop_size == 10);
  CHECK(cfg.crossover_prob == 0.5);
  CHECK(cfg.scale_factor == 0.7);
  CHECK_NOTHROW(cfg.validate());
  cfg.pop_size = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_evals = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.crossover_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.variant_params["JADE.q"] = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.variant_params["JADE.p"] = 0.2;
  CHECK(cfg.param("JADE.p") == 0.2);
  CHECK(cfg.param("SHADE.memory_size") == 10);
  CHECK(cfg.param("DEGL.k") == 2);
}

TEST_CASE("init_population") {
  DEConfig cfg;
  const auto space = objective::SearchSpace::unit_box(36);
  auto obj = objective::FunctionObjective(space, [](std::span<const double> x) { return x[0]; });
  Rng rng(1);
  BudgetedEvaluator ev(obj, 100);
  const auto pop = init_population(cfg, space, rng, ev);
  CHECK(pop.size() == 10);
  for (const auto& ind : pop) {
    CHECK(space.contains(ind.x));
    CHECK(ind.evaluated);
  }
  CHECK(ev.used() == 10);
  CHECK(obj.eval_count() == 10);

  Rng again(1);
  BudgetedEvaluator ev2(obj, 100);
  const auto pop2 = init_population(cfg, space, again, ev2);
  for (std::size_t k = 0; k < pop.size(); ++k) CHECK(pop[k].x == pop2[k].x);

  cfg.pop_size = 3;
  BudgetedEvaluator ev3(obj, 100);
  CHECK_THROWS_AS(init_population(cfg, space, rng, ev3), ConfigError);
}

TEST_CASE("rand/1 examples") {
  Rng rng(5);
  // r1, r2, r3 are the three non-target members in some order; with two equal
  // points the only possible results are the listed ones.
  const auto pop = make_pop({{9, 9}, {0, 0}, {1, 1}, {0, 0}});
  std::set<std::pair<double, double>> seen;
  for (int t = 0; t < 200; ++t) {
    const auto v = mutate_rand1(pop, 0, 0.7, rng);
    seen.insert({v[0], v[1]});
  }
  const std::set<std::pair<double, double>> expected = {{0.7, 0.7}, {-0.7, -0.7}, {0, 0}, {1, 1}};
  for (const auto& s : seen) CHECK(expected.count(s) == 1);
  CHECK(seen.count({0.7, 0.7}) == 1);

  const auto flat = make_pop({{9, 9}, {2, 3}, {1, 1}, {1, 1}});
  for (int t = 0; t < 50; ++t) {
    const auto v = mutate_rand1(flat, 0, 0.0, rng);
    CHECK((close(v, {2, 3}) || close(v, {1, 1})));
  }
  CHECK_THROWS_AS(mutate_rand1(make_pop({{0}, {1}, {2}}), 0, 0.5, rng), ConfigError);
}

TEST_CASE("rand/1 never uses the target") {
  Rng rng(6);
  Population pop;
  for (int k = 0; k < 5; ++k) pop.push_back({{static_cast<double>(1 << k)}, 0.0, true});
  for (int t = 0; t < 300; ++t) {
    const auto target = static_cast<std::size_t>(t % 5);
    const auto r = pick_distinct(5, target, 3, rng);
    CHECK(std::set<std::size_t>(r.begin(), r.end()).size() == 3);
    CHECK(std::find(r.begin(), r.end(), target) == r.end());
  }
}

TEST_CASE("best/1 examples") {
  Rng rng(7);
  const auto pop = make_pop({{1, 1}, {4, 4}, {2, 2}, {2, 2}}, {0.0, 5.0, 3.0, 3.0});
  for (int t = 0; t < 20; ++t) {
    CHECK(close(mutate_best1(pop, 1, 0.0, rng), {1, 1}));
  }
  const auto same = make_pop({{0.3, 0.3}, {0.3, 0.3}, {0.3, 0.3}, {0.3, 0.3}});
  CHECK(close(mutate_best1(same, 2, 0.7, rng), {0.3, 0.3}));
  const auto pair = make_pop({{1, 1}, {5, 5}, {2, 2}, {2, 2}}, {0.0, 9.0, 1.0, 1.0});
  // target 1 leaves {0,2,3}; any pair drawn from two equal points and the best is allowed
  for (int t = 0; t < 20; ++t) {
    const auto v = mutate_best1(pair, 1, 0.5, rng);
    CHECK((close(v, {1, 1}) || close(v, {0.5, 0.5}) || close(v, {1.5, 1.5})));
  }
}

TEST_CASE("binomial crossover") {
  Rng rng(8);
  const Vector target{0, 0, 0, 0, 0, 0};
  const Vector donor{1, 2, 3, 4, 5, 6};
  CHECK(crossover_binomial(target, donor, 1.0, rng) == donor);
  for (int t = 0; t < 100; ++t) {
    const auto trial = crossover_binomial(target, donor, 0.0, rng);
    int changed = 0;
    for (std::size_t j = 0; j < trial.size(); ++j) {
      CHECK((trial[j] == target[j] || trial[j] == donor[j]));
      changed += trial[j] != target[j];
    }
    CHECK(changed == 1);
  }
  for (int t = 0; t < 100; ++t) {
    const auto trial = crossover_binomial(donor, donor, uniform01(rng), rng);
    CHECK(trial == donor);
    const auto mixed = crossover_binomial(target, donor, uniform01(rng), rng);
    CHECK(mixed != target);
  }
  CHECK_THROWS_AS(crossover_binomial(target, Vector{1, 2}, 0.5, rng), DimensionError);
}

TEST_CASE("greedy selection") {
  const Individual target{{0.0}, 2.0, true};
  const Individual better{{1.0}, 1.0, true};
  const Individual tie{{2.0}, 2.0, true};
  const Individual worse{{3.0}, 3.0, true};
  CHECK(&select_greedy(target, better) == &better);
  CHECK(&select_greedy(target, tie) == &tie);
  CHECK(&select_greedy(target, worse) == &target);
  CHECK_THROWS(select_greedy(target, Individual{{4.0}, 0.0, false}));
}

TEST_CASE("opposition point") {
  const auto unit = objective::SearchSpace::unit_box(1);
  CHECK(opposition_point(unit, Vector{0.3})[0] == doctest::Approx(0.7).epsilon(1e-15));
  const auto box = objective::SearchSpace::uniform(3, -2.0, 6.0);
  CHECK(opposition_point(box, Vector{2, 2, 2}) == Vector{2, 2, 2});
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Vector x{-2 + 8 * uniform01(rng), -2 + 8 * uniform01(rng), -2 + 8 * uniform01(rng)};
    CHECK(close(opposition_point(box, opposition_point(box, x)), x, 1e-12));
  }
  CHECK_THROWS_AS(opposition_point(unit, Vector{1.2}), BoundsError);
}

TEST_CASE("SHADE parameter sampling") {
  ShadeMemory mem(10, 0.5, 0.5);
  Rng rng(10);
  CHECK(shade_sample_params(mem, rng, 0.0) == std::pair<double, double>{0.5, 0.5});
  Rng a(11), b(11);
  for (int t = 0; t < 2000; ++t) {
    const auto [f, cr] = shade_sample_params(mem, a);
    CHECK(f > 0.0);
    CHECK(f <= 1.0);
    CHECK(cr >= 0.0);
    CHECK(cr <= 1.0);
    CHECK(shade_sample_params(mem, b) == std::pair<double, double>{f, cr});
  }
}

TEST_CASE("SHADE memory update") {
  ShadeMemory mem(3, 0.5, 0.5);
  const std::vector<double> f1{0.5}, cr1{0.9}, w1{2.0};
  shade_update_memory(mem, f1, cr1, w1);
  CHECK(mem.f[0] == doctest::Approx(0.5));
  CHECK(mem.cr[0] == doctest::Approx(0.9));
  CHECK(mem.next == 1);

  const std::vector<double> f2{0.2, 0.8}, cr2{0.1, 0.3}, w2{1.0, 1.0};
  shade_update_memory(mem, f2, cr2, w2);
  CHECK(mem.f[1] == doctest::Approx((0.04 + 0.64) / (0.2 + 0.8)));
  CHECK(mem.f[1] == doctest::Approx(0.68));
  CHECK(mem.cr[1] == doctest::Approx(0.2));

  const auto before = mem.f;
  shade_update_memory(mem, {}, {}, {});
  CHECK(mem.f == before);
  CHECK(mem.next == 2);
  shade_update_memory(mem, f1, cr1, w1);
  CHECK(mem.next == 0);

  const std::vector<double> weights{3.0, 1.0};
  CHECK(lehmer_mean(f2, weights) == doctest::Approx((3 * 0.04 + 0.64) / (3 * 0.2 + 0.8)));
}

TEST_CASE("JADE current-to-pbest") {
  Rng rng(12);
  const auto pop = make_pop({{0, 0}, {1, 0}, {0, 1}, {1, 1}, {5, 5}}, {3.0, 0.5, 2.0, 4.0, 1.0});
  for (int t = 0; t < 50; ++t) {
    CHECK(close(jade_mutation(pop, {}, 2, 0.0, 0.2, rng), {0, 1}));
  }
  // p = 1/N: pbest is index 1; with F = 1 the donor is x_pbest + x_r1 - x_r2
  const auto same = make_pop({{0, 0}, {1, 0}, {2, 2}, {2, 2}, {2, 2}}, {3.0, 0.5, 2.0, 4.0, 1.0});
  for (int t = 0; t < 50; ++t) {
    const auto v = jade_mutation(same, {}, 0, 1.0, 0.2, rng);
    CHECK((close(v, {1, 0}) || close(v, {2, 2}) || close(v, {0, -2})));
  }
  // with an empty archive x~_r2 comes from the population, so it is never a far point
  const std::vector<Vector> archive{{100, 100}};
  bool used_archive = false;
  for (int t = 0; t < 200; ++t) {
    const auto v = jade_mutation(pop, archive, 0, 0.5, 0.2, rng);
    used_archive |= v[0] < -20;
    CHECK(jade_mutation(pop, {}, 0, 0.5, 0.2, rng)[0] > -20);
  }
  CHECK(used_archive);
  CHECK_THROWS_AS(jade_mutation(pop, {}, 0, 0.5, 0.0, rng), ConfigError);
}

TEST_CASE("DEGL neighborhood mutation") {
  Rng rng(13);
  Rng seq(13);
  const auto pop = random_pop(10, 3, rng);
  // weight 1 and weight 0 consume the same draws, so their convex combination is exact
  for (int t = 0; t < 20; ++t) {
    Rng r1(static_cast<std::uint64_t>(t)), r0(static_cast<std::uint64_t>(t)), rh(static_cast<std::uint64_t>(t));
    const auto g = degl_mutation(pop, 4, 0.7, 2, 1.0, r1);
    const auto l = degl_mutation(pop, 4, 0.7, 2, 0.0, r0);
    const auto h = degl_mutation(pop, 4, 0.7, 2, 0.25, rh);
    for (std::size_t j = 0; j < 3; ++j) CHECK(h[j] == doctest::Approx(0.25 * g[j] + 0.75 * l[j]).epsilon(1e-12));
  }
  // F = 0: global model is the target itself
  CHECK(close(degl_mutation(pop, 4, 0.0, 2, 1.0, seq), pop[4].x));
  // local model pulls towards the neighborhood best only
  auto fit = pop;
  for (std::size_t k = 0; k < fit.size(); ++k) fit[k].fitness = static_cast<double>(k);
  fit[9].fitness = -1.0;  // global best, outside the ring of 4
  fit[3].fitness = -0.5;  // best within indices 2..6
  Rng r(3);
  const auto local = degl_mutation(fit, 4, 1.0, 2, 0.0, r);
  (void)local;
  const auto same = make_pop(std::vector<Vector>(10, Vector{0.4, 0.6}));
  CHECK(close(degl_mutation(same, 3, 0.7, 2, 0.5, seq), {0.4, 0.6}));
  CHECK_THROWS_AS(degl_mutation(pop, 0, 0.7, 5, 0.5, seq), ConfigError);
  CHECK_THROWS_AS(degl_mutation(pop, 0, 0.7, 0, 0.5, seq), ConfigError);
}

TEST_CASE("rank selection probabilities") {
  const auto two = make_pop({{0}, {1}}, {1.0, 5.0});
  const auto p = rank_selection_probabilities(two);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0));
  const auto flat = make_pop({{0}, {1}, {2}, {3}}, {2.0, 2.0, 2.0, 2.0});
  for (double v : rank_selection_probabilities(flat)) CHECK(v == doctest::Approx(0.25));
  Rng rng(14);
  const auto pop = random_pop(10, 2, rng);
  const auto q = rank_selection_probabilities(pop);
  CHECK(std::abs(std::accumulate(q.begin(), q.end(), 0.0) - 1.0) <= 1e-12);
  for (std::size_t a = 0; a < pop.size(); ++a) {
    for (std::size_t b = 0; b < pop.size(); ++b) {
      if (pop[a].fitness < pop[b].fitness) CHECK(q[a] > q[b]);
    }
  }
}

TEST_CASE("speciation partition") {
  Rng rng(15);
  Population tight;
  for (int k = 0; k < 6; ++k) tight.push_back({{0.5 + 0.01 * uniform01(rng), 0.5}, uniform01(rng), true});
  CHECK(speciation_partition(tight, 0.5, 10).size() == 1);

  // two clusters of five, far apart compared with the radius
  Population two;
  std::vector<int> cluster;
  for (int k = 0; k < 10; ++k) {
    const bool right = (k % 2) == 1;
    two.push_back({{(right ? 10.0 : 0.0) + 0.1 * uniform01(rng), 0.1 * uniform01(rng)}, uniform01(rng), true});
    cluster.push_back(right);
  }
  const auto species = speciation_partition(two, 1.0, 10);
  REQUIRE(species.size() == 2);
  for (const auto& s : species) {
    // seed is the fittest member; every member belongs to the seed's cluster
    for (auto idx : s) {
      CHECK(cluster[idx] == cluster[s.front()]);
      CHECK(two[s.front()].fitness <= two[idx].fitness);
    }
    CHECK(s.size() == 5);
  }

  const auto pop = random_pop(20, 3, rng);
  for (double radius : {0.05, 0.3, 2.0}) {
    const auto parts = speciation_partition(pop, radius, 4);
    std::vector<int> count(pop.size(), 0);
    for (const auto& s : parts) {
      CHECK(s.size() <= 4);
      for (auto idx : s) ++count[idx];
    }
    for (int c : count) CHECK(c == 1);
  }
}

TEST_CASE("similarity weights decrease with distance") {
  const auto pop = make_pop({{0, 0}, {0.1, 0}, {0, 0.5}, {1, 1}, {3, 0}});
  const auto w = similarity_weights(pop, 0);
  CHECK(w[0] == 0.0);
  std::vector<std::pair<double, std::size_t>> by_distance;
  for (std::size_t k = 1; k < pop.size(); ++k) {
    by_distance.push_back({std::hypot(pop[k].x[0], pop[k].x[1]), k});
  }
  std::sort(by_distance.begin(), by_distance.end());
  for (std::size_t i = 0; i + 1 < by_distance.size(); ++i) {
    CHECK(w[by_distance[i].second] > w[by_distance[i + 1].second]);
  }

  Rng rng(16);
  const auto same = make_pop(std::vector<Vector>(5, Vector{0.2, 0.7}));
  CHECK(close(similarity_mutation(same, 1, 0.7, rng), {0.2, 0.7}));
  for (double v : similarity_weights(same, 1)) CHECK((v == 0.0 || v == 1.0));
  const auto spread = make_pop({{0, 0}, {1, 1}, {2, 2}, {2, 2}, {2, 2}});
  for (int t = 0; t < 30; ++t) {
    const auto v = similarity_mutation(spread, 0, 0.0, rng);
    CHECK((close(v, {1, 1}) || close(v, {2, 2})));
  }
  CHECK_THROWS_AS(similarity_mutation(make_pop({{0}, {1}, {2}}), 0, 0.5, rng), ConfigError);
}

TEST_CASE("DCMAEA sampling and update") {
  Rng rng(17);
  Eigen::VectorXd mean(2);
  mean << 0.3, -0.2;

  SUBCASE("zero step and zero difference sample the mean") {
    auto state = DcmaeaState::create(mean, 0.0, 0.7, 6);
    const auto same = make_pop(std::vector<Vector>(6, Vector{1.0, 1.0}));
    for (const auto& v : dcmaea_sample(state, same, rng)) CHECK(close(v, {0.3, -0.2}));
  }

  SUBCASE("covariance stays symmetric positive definite") {
    auto state = DcmaeaState::create(mean, 0.5, 0.7, 10);
    auto pop = random_pop(10, 2, rng);
    for (int g = 0; g < 30; ++g) {
      const auto cand = dcmaea_sample(state, pop, rng);
      Population off;
      for (const auto& v : cand) off.push_back({v, v[0] * v[0] + 10 * v[1] * v[1], true});
      dcmaea_update(state, off);
      CHECK((state.cov - state.cov.transpose()).norm() <= 1e-12);
      CHECK(state.axis.minCoeff() > 0.0);
    }
  }

  SUBCASE("eigenvalue flooring is counted") {
    auto state = DcmaeaState::create(mean, 0.5, 0.7, 10);
    state.cov << 1.0, 1.0, 1.0, 1.0;
    state.decompose();
    CHECK(state.eigen_repairs == 1);
    CHECK(state.axis.minCoeff() > 0.0);
  }

  SUBCASE("mean approaches the optimum of a 2-D sphere") {
    auto sphere = objective::make_sphere(2, -5.0, 5.0);
    BudgetedEvaluator ev(*sphere, 100000);
    Population pop;
    for (int k = 0; k < 10; ++k) {
      pop.push_back(ev.evaluate({3.0 + uniform01(rng), 3.0 + uniform01(rng)}));
    }
    Eigen::VectorXd m(2);
    m << 3.5, 3.5;
    auto state = DcmaeaState::create(m, 0.5, 0.7, 10);
    double first = 0.0;
    for (int it = 1; it <= 50; ++it) {
      dcmaea_step(state, pop, ev, rng);
      if (it == 1) first = state.mean.norm();
    }
    CHECK(state.mean.norm() < first);
    CHECK(state.mean.norm() < 0.1);
  }
}

TEST_CASE("budgeted evaluator") {
  auto sphere = objective::make_sphere(2, -1.0, 1.0);
  BudgetedEvaluator ev(*sphere, 3);
  const auto a = ev.evaluate({2.0, 0.5});
  CHECK(a.x == Vector{1.0, 0.5});
  ev.evaluate({0.0, 0.0});
  ev.evaluate({0.5, 0.5});
  CHECK(ev.trace() == std::vector<double>{1.25, 0.0, 0.0});
  CHECK(ev.best_x() == Vector{0.0, 0.0});
  CHECK(ev.exhausted());
  CHECK_THROWS(ev.evaluate({0.0, 0.0}));
  CHECK(sphere->eval_count() == 3);
}
