#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ufl/harness.hpp"
#include "ufl/oracle.hpp"

using namespace ufl;

TEST_CASE("generators produce valid streams") {
  for (GenKind k : {GenKind::uniform, GenKind::clustered}) {
    GeneratorSpec spec;
    spec.kind = k;
    spec.n = 200;
    spec.d = 3;
    spec.delta = 256;
    spec.f = 5;
    spec.seed = 4;
    Stream s = generate(spec);
    CHECK(validate_stream(s.updates).ok);
    CHECK(live_points(s.updates).size() == 200);
    for (const auto& u : s.updates) CHECK(s.inst.contains(u.point));
    CHECK(generate(spec).updates == s.updates);

    spec.shuffled = true;
    spec.deletion_rate = 0.25;
    Stream t = generate(spec);
    CHECK(validate_stream(t.updates).ok);
    CHECK(live_points(t.updates) == live_points(s.updates));
    std::size_t ins = 0, del = 0;
    for (const auto& u : t.updates) (u.sign > 0 ? ins : del)++;
    CHECK(static_cast<double>(del) / static_cast<double>(ins) == doctest::Approx(0.25).epsilon(0.02));
  }
  CHECK(parse_gen_kind(to_string(GenKind::bhm)) == GenKind::bhm);
  CHECK_THROWS(parse_gen_kind("nope"));
}

TEST_CASE("hard instance classes match their radii") {
  const std::size_t n = 400;
  HardInstance h = gen_example_hard(n, 2);
  CHECK(validate_stream(h.stream.updates).ok);
  CHECK(h.p1 == 20);
  CHECK(h.p1 + h.p2 == n);
  auto pts = live_points(h.stream.updates);
  REQUIRE(pts.size() == n);
  std::map<GridPoint, int> cls;
  for (std::size_t i = 0; i < h.stream.updates.size(); ++i) cls[h.stream.updates[i].point] = h.r_class[i];
  const double f = h.stream.inst.f;
  auto rp = compute_rp(pts, f);
  std::size_t good = 0;
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += rp[i] / f;
    if (cls[pts[i]] == 1) good += rp[i] >= 0.9 * f && rp[i] <= f;
    else good += rp[i] <= 10 * f / static_cast<double>(n);
  }
  CHECK(static_cast<double>(good) >= 0.99 * n);
  const double root = std::sqrt(static_cast<double>(n));
  CHECK(sum >= 0.5 * root);
  CHECK(sum <= 3 * root);
}

TEST_CASE("hard instance rejects a grid that is too small") {
  CHECK_THROWS_AS(gen_example_hard(400, 1, 64), std::invalid_argument);
}

TEST_CASE("bhm instance geometry") {
  BhmInstance b = gen_bhm_instance(2, true, 3);
  CHECK(b.bob.size() == 4);
  CHECK(b.x.size() == 4);
  CHECK(b.matching.size() == 2);
  CHECK(validate_stream(b.stream.updates).ok);
  for (int i = 0; i < 4; ++i) {
    CHECK(distance(b.s_point(i, 0), b.s_point(i, 1)) == doctest::Approx(2.0));
    CHECK(distance(b.s_point(i, 0), b.s_point((i + 1) % 4, 0)) == doctest::Approx(2.0));
  }
  for (const auto& q : b.bob) CHECK(b.stream.inst.contains(q));
}

TEST_CASE("bhm optima: dynamic program equals exhaustive search") {
  for (int n = 1; n <= 2; ++n)
    for (bool yes : {true, false}) {
      BhmInstance b = gen_bhm_instance(n, yes, 10u + static_cast<std::uint64_t>(n));
      CHECK(bhm_candidate_optimum(b) == doctest::Approx(bhm_exhaustive_optimum(b)).epsilon(1e-9));
    }
}

TEST_CASE("offline estimate has ratio 1") {
  auto tab = run_experiment({GeneratorSpec{GenKind::uniform, 50, 2, 128, 10.0}}, {"offline"}, 2, 1);
  REQUIRE(tab.rows.size() == 2);
  for (const auto& r : tab.rows) CHECK(r.ratio == doctest::Approx(1.0));
  REQUIRE(tab.summary.size() == 1);
  CHECK(tab.summary[0].q50 == doctest::Approx(1.0));
}

TEST_CASE("quantile examples") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2);
  CHECK(quantile({1}, 0.9) == 1);
}
