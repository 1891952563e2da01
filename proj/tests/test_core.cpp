#include <doctest.h>

#include <random>
#include <sstream>

#include "ufl/core.hpp"

using namespace ufl;

TEST_CASE("distance examples") {
  CHECK(distance(GridPoint{0, 0}, GridPoint{3, 4}) == 5.0);
  CHECK(distance(GridPoint{7, 7}, GridPoint{7, 7}) == 0.0);
  CHECK(distance(GridPoint{1, 1, 1, 1}, GridPoint{2, 2, 2, 2}) == 2.0);
  CHECK(distance(RealPoint{0.5, 0.5}, GridPoint{1, 1}) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(distance(GridPoint{1, 2}, GridPoint{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("distance is symmetric and satisfies the triangle inequality") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> c(1, 1 << 20);
  std::uniform_int_distribution<int> dim(1, 16);
  for (int t = 0; t < 100000; ++t) {
    const int d = dim(rng);
    GridPoint a(d), b(d), e(d);
    for (int k = 0; k < d; ++k) a[k] = c(rng), b[k] = c(rng), e[k] = c(rng);
    const double ab = distance(a, b), be = distance(b, e), ae = distance(a, e);
    REQUIRE(ab == distance(b, a));
    REQUIRE(ae <= ab + be + 1e-9 * (ab + be));
  }
}

TEST_CASE("instance validation") {
  Instance ok{2, 8, 1.0};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.L() == 6);
  CHECK_THROWS_AS((Instance{2, 12, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((Instance{0, 8, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((Instance{2, 8, 0.0}).validate(), std::invalid_argument);
  CHECK(ok.contains({1, 8}));
  CHECK_FALSE(ok.contains({0, 8}));
  CHECK_FALSE(ok.contains({1, 9}));
}

TEST_CASE("parse_update examples") {
  Instance inst{2, 8, 1.0};
  auto u = parse_update("+ 3 7", inst);
  CHECK(u.sign == +1);
  CHECK(u.point == GridPoint{3, 7});
  auto v = parse_update("- 3 7", inst);
  CHECK(v.sign == -1);
  CHECK_THROWS_AS(parse_update("+ 9 1", inst), ParseError);
  CHECK_THROWS_AS(parse_update("+ 1", inst), ParseError);
  CHECK_THROWS_AS(parse_update("* 1 1", inst), ParseError);
  try {
    parse_update("+ 1 x", inst, 42);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 42);
  }
}

TEST_CASE("format then parse is the identity") {
  std::mt19937_64 rng(3);
  Instance inst{5, 1024, 2.5};
  for (int t = 0; t < 1000; ++t) {
    StreamUpdate u{(rng() & 1) ? 1 : -1, GridPoint(5)};
    for (auto& c : u.point) c = 1 + static_cast<std::int64_t>(rng() % 1024);
    CHECK(parse_update(format_update(u), inst) == u);
  }
}

TEST_CASE("stream file round trip") {
  Stream s{Instance{3, 16, 0.75}, {{+1, {1, 2, 3}}, {+1, {4, 5, 6}}, {-1, {1, 2, 3}}}};
  std::stringstream io;
  write_stream(io, s);
  Stream r = read_stream(io);
  CHECK(r.inst.d == 3);
  CHECK(r.inst.delta == 16);
  CHECK(r.inst.f == 0.75);
  CHECK(r.updates == s.updates);
  CHECK(parse_header(format_header(s.inst)).f == 0.75);
}

TEST_CASE("validate_stream examples") {
  GridPoint p{1, 1};
  CHECK(validate_stream({{+1, p}, {-1, p}, {+1, p}}).ok);
  auto twice = validate_stream({{+1, p}, {+1, p}});
  CHECK_FALSE(twice.ok);
  CHECK(twice.index == 2);
  auto early = validate_stream({{-1, p}});
  CHECK_FALSE(early.ok);
  CHECK(early.index == 1);
}

TEST_CASE("live_points nets out deletions") {
  std::vector<StreamUpdate> ups{{+1, {3, 3}}, {+1, {1, 2}}, {-1, {3, 3}}, {+1, {2, 2}}};
  auto live = live_points(ups);
  REQUIRE(live.size() == 2);
  CHECK(live[0] == GridPoint{1, 2});
  CHECK(live[1] == GridPoint{2, 2});
  CHECK_THROWS(live_points({{+1, {1, 1}}, {+1, {1, 1}}}));
}
