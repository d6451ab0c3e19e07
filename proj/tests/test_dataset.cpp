#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "surropt/dataset.hpp"
#include "surropt/error.hpp"
#include "surropt/io.hpp"

using namespace surropt;
using namespace surropt::dataset;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string header(int dim) {
  std::string h;
  for (int i = 1; i <= dim; ++i) h += "x" + std::to_string(i) + ",";
  return h + "f1,f2,f3\n";
}

std::string row(int dim, double v) {
  std::string r;
  for (int i = 0; i < dim; ++i) r += io::format_double(v) + ",";
  return r + "1,2,3\n";
}

std::vector<double> random_point(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (auto& v : x) v = u(rng);
  return x;
}

// Direct evaluation of an inductance form from its published structure.
double inductance_reference(const SyntheticOracle::Inductance& m, const std::vector<double>& x) {
  double acc = m.base;
  for (std::size_t i = 0; i < x.size(); ++i) acc += m.diag_weight[i] * std::pow(x[i] - m.diag_center[i], 2);
  for (const auto& c : m.couplings) {
    acc += c.weight * std::pow(x[static_cast<std::size_t>(c.a)] - x[static_cast<std::size_t>(c.b)] - c.offset, 2);
  }
  return m.scale * acc;
}

}  // namespace

TEST_CASE("oracle is deterministic and positive") {
  SyntheticOracleConfig cfg;
  cfg.seed = 5;
  const SyntheticOracle oracle(cfg);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_point(rng, kLayoutDim);
    const auto a = oracle.evaluate(x);
    CHECK(a == oracle.evaluate(x));
    CHECK(a == synthetic_oracle(x, cfg));
    CHECK(a[0] > 0.0);
    CHECK(a[1] > 0.0);
    CHECK(a[2] > SyntheticOracle::kAmbient);
    CHECK(a[0] == doctest::Approx(inductance_reference(oracle.inductance(0), x)).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(inductance_reference(oracle.inductance(1), x)).epsilon(1e-12));
  }
  std::vector<double> corner(kLayoutDim, 0.0);
  CHECK(oracle.evaluate(corner)[0] > 0.0);
  corner.assign(kLayoutDim, 1.0);
  CHECK(oracle.evaluate(corner)[1] > 0.0);
}

TEST_CASE("oracle structure depends on the seed and differs per metric") {
  SyntheticOracleConfig a;
  a.seed = 1;
  SyntheticOracleConfig b;
  b.seed = 2;
  const SyntheticOracle oa(a), ob(b);
  CHECK(oa.inductance(0).diag_center != ob.inductance(0).diag_center);
  CHECK(oa.inductance(0).diag_center != oa.inductance(1).diag_center);
  CHECK(oa.inductance(0).couplings.size() == static_cast<std::size_t>(a.coupling_count));
  for (const auto& c : oa.inductance(1).couplings) CHECK(c.a != c.b);
  a.coupling_count = 0;
  CHECK(SyntheticOracle(a).inductance(0).couplings.empty());
}

TEST_CASE("oracle rejects points outside the box") {
  const SyntheticOracle oracle(SyntheticOracleConfig{});
  std::vector<double> x(kLayoutDim, 0.5);
  x[7] = 1.0000001;
  CHECK_THROWS_AS(oracle.evaluate(x), BoundsError);
  x[7] = -0.1;
  CHECK_THROWS_AS(oracle.evaluate(x), BoundsError);
  x[7] = NAN;
  CHECK_THROWS_AS(oracle.evaluate(x), BoundsError);
  CHECK_THROWS_AS(oracle.evaluate(std::vector<double>(5, 0.5)), DimensionError);
  SyntheticOracleConfig bad;
  bad.coupling_count = -1;
  CHECK_THROWS_AS(SyntheticOracle{bad}, ConfigError);
  bad = {};
  bad.noise_stddev = -0.5;
  CHECK_THROWS_AS(SyntheticOracle{bad}, ConfigError);
}

TEST_CASE("oracle is smooth") {
  // Central-difference derivatives at step h and h/2 must agree to O(h^2);
  // a kink or jump between the probes would break this.
  const SyntheticOracle oracle(SyntheticOracleConfig{});
  std::mt19937_64 rng(3);
  const double h = 1e-3;
  for (int t = 0; t < 40; ++t) {
    auto x = random_point(rng, kLayoutDim);
    for (auto& v : x) v = 0.05 + 0.9 * v;
    const auto i = static_cast<std::size_t>(rng() % kLayoutDim);
    auto at = [&](double d) {
      auto y = x;
      y[i] += d;
      return oracle.evaluate(y);
    };
    const auto p1 = at(h), m1 = at(-h), p2 = at(h / 2), m2 = at(-h / 2);
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const double d1 = (p1[m] - m1[m]) / (2 * h);
      const double d2 = (p2[m] - m2[m]) / h;
      CHECK(std::abs(d1 - d2) <= 1e-3 * std::max(1.0, std::abs(d2)));
    }
  }
}

TEST_CASE("noise is deterministic per point") {
  SyntheticOracleConfig cfg;
  cfg.noise_stddev = 0.5;
  SyntheticOracleConfig clean = cfg;
  clean.noise_stddev = 0.0;
  std::vector<double> x(kLayoutDim, 0.25);
  const auto a = synthetic_oracle(x, cfg);
  CHECK(a == synthetic_oracle(x, cfg));
  CHECK(a != synthetic_oracle(x, clean));
  x[0] = 0.75;
  CHECK(synthetic_oracle(x, cfg) != a);
}

TEST_CASE("corner minimum matches exhaustive search at n = 8") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    SyntheticOracleConfig cfg;
    cfg.dim = 8;
    cfg.seed = seed;
    cfg.coupling_count = 10;
    const SyntheticOracle oracle(cfg);
    for (int metric = 0; metric < 2; ++metric) {
      double brute = INFINITY;
      std::vector<double> argmin;
      for (int mask = 0; mask < 256; ++mask) {
        std::vector<double> x(8);
        for (int j = 0; j < 8; ++j) x[static_cast<std::size_t>(j)] = (mask >> j) & 1;
        const double v = oracle.evaluate(x)[static_cast<std::size_t>(metric)];
        if (v < brute) {
          brute = v;
          argmin = x;
        }
      }
      const auto fast = inductance_corner_minimum(oracle, metric);
      CHECK(fast.value == doctest::Approx(brute).epsilon(1e-12));
      CHECK(oracle.evaluate(fast.corner)[static_cast<std::size_t>(metric)] == doctest::Approx(brute).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(inductance_corner_minimum(SyntheticOracle(SyntheticOracleConfig{}), 0), ConfigError);
}

TEST_CASE("gen_dataset") {
  SyntheticOracleConfig cfg;
  cfg.seed = 9;
  const auto a = gen_dataset(100, cfg);
  CHECK(a.size() == 100);
  CHECK(a == gen_dataset(100, cfg));
  for (const auto& r : a) {
    CHECK(r.x.size() == kLayoutDim);
    for (double v : r.x) CHECK((v >= 0.0 && v < 1.0));
    CHECK(r.f == synthetic_oracle(r.x, cfg));
  }
  CHECK_THROWS_AS(gen_dataset(0, cfg), ConfigError);
  cfg.seed = 10;
  CHECK(gen_dataset(5, cfg)[0].x != a[0].x);
}

TEST_CASE("csv round trip is lossless") {
  TempDir dir("surropt_test_csv");
  SyntheticOracleConfig cfg;
  auto records = gen_dataset(50, cfg);
  records[0].f[2] = 1e-300;
  records[1].x[0] = 0.1 + 0.2;
  write_csv(dir.path / "d.csv", records);
  CHECK(load_csv(dir.path / "d.csv") == records);

  const std::string text = io::read_file(dir.path / "d.csv");
  CHECK(text.rfind(header(kLayoutDim), 0) == 0);
  write_csv(dir.path / "again.csv", records);
  CHECK(io::read_file(dir.path / "again.csv") == text);
}

TEST_CASE("load_csv examples and errors") {
  TempDir dir("surropt_test_load");
  const auto p = dir.path / "d.csv";

  write_text(p, header(kLayoutDim) + row(kLayoutDim, 0.5));
  const auto one = load_csv(p);
  REQUIRE(one.size() == 1);
  CHECK(one[0].f == std::array<double, 3>{1, 2, 3});

  write_text(p, header(kLayoutDim) + row(kLayoutDim, 0.5) + "\r\n");
  CHECK(load_csv(p).size() == 1);

  std::string h = header(kLayoutDim);
  h.replace(h.find("x17,"), 4, "");
  write_text(p, h + row(kLayoutDim - 1, 0.5));
  try {
    load_csv(p);
    FAIL("expected schema error");
  } catch (const SchemaError& e) {
    CHECK(e.column() == "x17");
  }

  std::string bad = row(kLayoutDim, 0.5);
  bad.replace(bad.find("0.5"), 3, "abc");
  write_text(p, header(kLayoutDim) + row(kLayoutDim, 0.5) + bad);
  try {
    load_csv(p);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(e.column() == 1);
  }

  write_text(p, "");
  CHECK_THROWS_AS(load_csv(p), Error);
  CHECK_THROWS_AS(load_csv(dir.path / "missing.csv"), IoError);

  write_text(p, "x1,x2,x3,f1,f2,f3\n0.1,0.2,0.3,4,5,6\n");
  CHECK(load_csv(p, 3).size() == 1);
}

TEST_CASE("metadata sidecar") {
  TempDir dir("surropt_test_meta");
  SyntheticOracleConfig cfg;
  cfg.seed = 42;
  write_metadata(dir.path / "d.meta.json", 10, cfg);
  const auto j = nlohmann::json::parse(io::read_file(dir.path / "d.meta.json"));
  CHECK(j["count"] == 10);
  CHECK(j["oracle"]["seed"] == 42);
}

TEST_CASE("split is a seeded partition") {
  SyntheticOracleConfig cfg;
  const auto records = gen_dataset(101, cfg);
  const auto s = split(records, 0.8, 5);
  CHECK(s.train.size() == 81);
  CHECK(s.test.size() == 20);
  const auto again = split(records, 0.8, 5);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split(records, 0.8, 6).train != s.train);

  std::multiset<double> all, parts;
  for (const auto& r : records) all.insert(r.x[0]);
  for (const auto& r : s.train) parts.insert(r.x[0]);
  for (const auto& r : s.test) parts.insert(r.x[0]);
  CHECK(all == parts);

  const auto tiny = split(std::span(records).first(2), 0.99, 1);
  CHECK(tiny.train.size() == 1);
  CHECK(tiny.test.size() == 1);
  CHECK_THROWS(split(std::span(records).first(1), 0.5, 1));
  CHECK_THROWS_AS(split(records, 1.0, 1), ConfigError);
}

TEST_CASE("normalization stats and labeled sets") {
  std::vector<SampleRecord> recs(3);
  recs[0] = {{0.0, 2.0, 5.0}, {1.0, 4.0, 7.0}};
  recs[1] = {{1.0, 4.0, 5.0}, {2.0, 4.0, 7.0}};
  recs[2] = {{0.5, 3.0, 5.0}, {3.0, 4.0, 7.0}};
  const auto st = compute_stats(recs);
  CHECK(st.x_min == std::vector<double>{0.0, 2.0, 5.0});
  CHECK(st.x_max == std::vector<double>{1.0, 4.0, 5.0});
  CHECK(st.f_mean[0] == doctest::Approx(2.0));
  CHECK(st.f_stddev[0] == doctest::Approx(1.0));
  CHECK(st.f_constant[1]);
  CHECK(st.f_stddev[1] == 1.0);

  const auto set = labeled_set(recs, 0, st);
  CHECK(set.inputs(1, 2) == doctest::Approx(0.5));
  CHECK(set.inputs(2, 0) == 0.0);
  CHECK(set.targets.mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(set.targets.squaredNorm() / 2.0 == doctest::Approx(1.0));
  CHECK_THROWS_AS(labeled_set(recs, 3, st), ConfigError);
  CHECK_THROWS(compute_stats({}));
}
