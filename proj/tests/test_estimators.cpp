#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>

#include "ufl/estimators.hpp"
#include "ufl/harness.hpp"
#include "ufl/oracle.hpp"

using namespace ufl;

namespace {

EstimatorOptions grid_opt() {
  EstimatorOptions o;
  o.hash = HashKind::grid;
  return o;
}

} // namespace

TEST_CASE("level sampler on a singleton at level 0 reports probability 1") {
  Stream s{Instance{2, 1024, 100.0}, {{+1, {7, 9}}}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = level_sample(s, 0, seed);
    REQUIRE(r.status == QueryStatus::ok);
    CHECK(r.point == GridPoint{7, 9});
    CHECK(r.prob_estimate == 1.0);
  }
}

TEST_CASE("two points sharing a bucket are each reported with probability one half") {
  Stream s{Instance{1, 1024, 1000.0}, {{+1, {10}}, {+1, {11}}}};
  int shared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto r = level_sample(s, 0, seed, grid_opt());
    REQUIRE(r.status == QueryStatus::ok);
    if (r.bucket_size != 2) continue;
    ++shared;
    CHECK(r.prob_estimate == 0.5);
  }
  CHECK(shared >= 15);
}

TEST_CASE("empty streams give NIL samples and zero estimates") {
  Stream s{Instance{2, 64, 1.0}, {{+1, {3, 3}}, {-1, {3, 3}}}};
  CHECK(level_sample(s, 0, 1).nil());
  CHECK(importance_sample(s, 1).nil());
  CHECK(two_pass_estimate(s, 8, 1).estimate == 0);
  CHECK_THROWS_AS(random_order_estimate(s, 8, 1), std::invalid_argument);
  CHECK(random_order_estimate(Stream{s.inst, {}}, 8, 1).estimate == 0);
  EstimatorOptions o;
  o.m = 4;
  o.K = 0;
  CHECK(one_pass_estimate(s, 1, o).estimate == 0);
  CHECK(offline_estimate(s).estimate == 0);
}

TEST_CASE("two-pass on a singleton") {
  const double f = 16;
  Stream s{Instance{2, 64, f}, {{+1, {5, 5}}}};
  auto rep = two_pass_estimate(s, 2000, 3);
  std::size_t hits = 0;
  for (const auto& rec : rep.sample_records) {
    if (rec.nil) continue;
    ++hits;
    // one level in the mixture; rhat = 2f, probability 1/2
    CHECK(rec.level == 1);
    CHECK(rec.rhat == 2 * f);
    CHECK(rec.term == 4 * f);
  }
  CHECK(std::abs(static_cast<double>(hits) - 1000) <= 3 * std::sqrt(500.0));
  CHECK(rep.estimate == doctest::Approx(2 * f).epsilon(0.1));
}

TEST_CASE("random order on two far points") {
  Stream s{Instance{2, 1024, 10.0}, {{+1, {1, 1}}, {+1, {1000, 1000}}}};
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) sum += random_order_estimate(s, 512, seed).estimate;
  const double ratio = sum / 5 / sum_rp({{1, 1}, {1000, 1000}}, 10.0);
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 4.0);
}

TEST_CASE("one-pass on a singleton counts f at every accepting level") {
  const double f = 64;
  Stream s{Instance{2, 1024, f}, {{+1, {300, 400}}}};
  EstimatorOptions o;
  o.m = 8;
  o.T = 8;
  o.K = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rep = one_pass_estimate(s, seed, o);
    REQUIRE_FALSE(rep.levels.empty());
    CHECK(rep.levels[0].z == f);
    for (const auto& l : rep.levels) CHECK((l.z == 0 || l.z == f));
    CHECK_FALSE(rep.fallback);
  }
  o.K = 16;
  auto fb = one_pass_estimate(s, 1, o);
  CHECK(fb.fallback);
  CHECK(fb.estimate == f);
}

TEST_CASE("enumerate_enlarged_buckets examples") {
  auto h = make_grid_hash(1, 10.0);
  auto one = enumerate_enlarged_buckets({5}, *h, 1.0);
  CHECK(one.size() == 1);
  CHECK(one[0] == h->bucket(GridPoint{5}));
  auto two = enumerate_enlarged_buckets({10}, *h, 1.0);
  CHECK(two.size() == 2);
}

TEST_CASE("replay and materialized estimators agree") {
  std::mt19937_64 rng(17);
  for (std::uint64_t t = 0; t < 6; ++t) {
    Stream s = with_deletions(gen_clustered(20 + 5 * t, 2, 256, 40.0, 3, 20, t), 0.2, t);
    EstimatorOptions rep, mat;
    mat.replay = false;
    rep.m = mat.m = 4;
    rep.T = mat.T = 4;
    rep.K = mat.K = 0;
    for (int i = 0; i < 4; ++i) {
      auto a = level_sample(s, i, t * 10 + i, rep), b = level_sample(s, i, t * 10 + i, mat);
      CHECK(a.status == b.status);
      CHECK(a.point == b.point);
      CHECK(a.prob_estimate == b.prob_estimate);
    }
    CHECK(two_pass_estimate(s, 6, t, rep).estimate == two_pass_estimate(s, 6, t, mat).estimate);
    Stream ins{s.inst, insertions(live_points(s.updates))};
    CHECK(random_order_estimate(ins, 6, t, rep).estimate == random_order_estimate(ins, 6, t, mat).estimate);
    CHECK(one_pass_estimate(s, t, rep).estimate == one_pass_estimate(s, t, mat).estimate);
  }
}

TEST_CASE("two-pass sidecar round trip") {
  Stream s = gen_uniform(40, 2, 128, 20.0, 5);
  auto st = two_pass_first(s, 16, 9);
  auto path = (std::filesystem::temp_directory_path() / "ufl_sidecar_test.json").string();
  save_two_pass_state(path, st);
  auto back = load_two_pass_state(path);
  std::filesystem::remove(path);
  CHECK(back.seed == st.seed);
  CHECK(back.m == st.m);
  REQUIRE(back.samples.size() == st.samples.size());
  CHECK(two_pass_second(s, back).estimate == two_pass_second(s, st).estimate);
  CHECK(two_pass_second(s, st).estimate == two_pass_estimate(s, 16, 9).estimate);
}

TEST_CASE("reported probabilities match empirical sampling frequencies") {
  // level 0, grid hash, three points in one cell and one alone
  Stream s{Instance{1, 1024, 1000.0}, {{+1, {10}}, {+1, {12}}, {+1, {14}}, {+1, {900}}}};
  std::map<GridPoint, int> count;
  std::map<GridPoint, double> reported;
  const int n = 4000;
  for (int seed = 0; seed < n; ++seed) {
    auto r = level_sample(s, 0, static_cast<std::uint64_t>(seed), grid_opt());
    REQUIRE(r.status == QueryStatus::ok);
    ++count[r.point];
    reported[r.point] += r.prob_estimate;
  }
  for (const auto& [p, c] : count) {
    const double freq = static_cast<double>(c) / n, mean = reported[p] / c;
    CHECK(std::abs(freq - mean) <= 0.05);
  }
}
