#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "ufl/hashing.hpp"

using namespace ufl;

namespace {

std::set<BucketId> sample_ball(const ConsistentHash& h, const RealPoint& x, double radius, std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  std::set<BucketId> out;
  const int d = static_cast<int>(x.size());
  for (int t = 0; t < n; ++t) {
    RealPoint y = x, dir(d);
    double norm = 0;
    for (auto& v : dir) norm += (v = g(rng), v * v);
    norm = std::sqrt(norm);
    double r = radius * std::pow(u(rng), 1.0 / d);
    for (int k = 0; k < d; ++k) y[k] += r * dir[k] / norm;
    out.insert(h.bucket(y));
  }
  return out;
}

} // namespace

TEST_CASE("grid hash examples") {
  auto h = make_grid_hash(2, std::sqrt(2.0));
  CHECK(h->bucket(RealPoint{0.5, 0.5}) == h->bucket(RealPoint{0.0, 0.99}));
  CHECK(h->bucket(RealPoint{1.0, 1.0}) == h->bucket(RealPoint{1.5, 1.5}));
  CHECK_FALSE(h->bucket(RealPoint{1.0, 1.0}) == h->bucket(RealPoint{0.99, 0.99}));
  CHECK(h->params().lambda == 4);
  auto r = verify_hash(*make_grid_hash(3, 1.0), 2000, 1);
  CHECK(r.max_consistency <= 8);
  CHECK(r.max_diameter <= 1.0 + 1e-9);
}

TEST_CASE("face hash in one dimension") {
  auto h = make_face_hash(1, 1.0, 10); // cube side 1, eps 0.1
  const BucketId vertex = h->bucket(RealPoint{0.95});
  CHECK(vertex.group == 0);
  CHECK(h->bucket(RealPoint{1.05}) == vertex);
  CHECK(h->bucket(RealPoint{0.5}).group == 1);
  CHECK(h->bucket(RealPoint{0.5}) == h->bucket(RealPoint{0.2}));
  CHECK_FALSE(h->bucket(RealPoint{0.5}) == h->bucket(RealPoint{1.5}));
}

TEST_CASE("face hash corner neighborhoods win over edges in two dimensions") {
  auto h = make_face_hash(2, 2 * std::sqrt(2.0)); // cube side 2, eps = 0.1
  CHECK(h->params().eps() == doctest::Approx(0.1));
  auto corner = h->bucket(RealPoint{0.05, 0.15});
  CHECK(corner.group == 0);
  CHECK(h->bucket(RealPoint{-0.19, 0.19}) == corner);
  CHECK(h->bucket(RealPoint{1.0, 0.05}).group == 1);
  CHECK(h->bucket(RealPoint{1.0, 1.0}).group == 2);
}

TEST_CASE("face hash rejects a gap below the cube side bound") {
  CHECK_THROWS_AS(make_face_hash(4, 1.0, face_min_gamma(4, 1.0) * 0.9), std::invalid_argument);
  CHECK_NOTHROW(make_face_hash(4, 1.0, face_min_gamma(4, 1.0)));
  CHECK(face_cube_side(3, 1.0) == 0.5);
}

TEST_CASE("face hash enumeration examples") {
  auto h = make_face_hash(2, 2 * std::sqrt(2.0));
  const double eps = h->params().eps();
  CHECK(h->enlarged(RealPoint{1.0, 1.0}, eps / 2).size() == 1);
  // interior point 0.03 beyond the edge neighborhood
  auto two = h->enlarged(RealPoint{1.0, 0.13}, eps / 2);
  CHECK(two.size() == 2);
  CHECK_THROWS_AS(h->enlarged(RealPoint{1.0, 1.0}, eps), std::invalid_argument);
  CHECK_THROWS_AS(make_ball_carving_hash(2, 1.0, 8, 1)->enlarged(RealPoint{0.0, 0.0}, 0.01), std::logic_error);
}

TEST_CASE("face hash enumeration covers sampled ball images") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int d = 1; d <= 6; ++d) {
    auto h = make_face_hash(d, 1.0);
    const double eps = h->params().eps();
    const double T = face_cube_side(d, 1.0);
    for (int t = 0; t < 200; ++t) {
      RealPoint x(d);
      // land near face planes most of the time
      for (auto& v : x) v = (u(rng) < 0.7 ? (u(rng) < 0.5 ? 0 : T) + (u(rng) - 0.5) * 4 * d * eps : u(rng) * T);
      auto listed = h->enlarged(x, eps / 2);
      std::set<BucketId> set(listed.begin(), listed.end());
      CHECK(set.size() == listed.size());
      CHECK(listed.size() <= static_cast<std::size_t>(d + 1));
      for (const auto& b : sample_ball(*h, x, eps / 2, rng, 50)) CHECK(set.count(b) == 1);
    }
  }
}

TEST_CASE("face hash separation within a group") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g;
  for (int d = 2; d <= 6; ++d) {
    auto h = make_face_hash(d, 1.0);
    const double eps = h->params().eps();
    const double T = face_cube_side(d, 1.0);
    for (int t = 0; t < 4000; ++t) {
      RealPoint x(d), y(d);
      for (auto& v : x) v = u(rng) < 0.6 ? (u(rng) - 0.5) * 3 * d * eps : u(rng) * T;
      double norm = 0;
      RealPoint dir(d);
      for (auto& v : dir) norm += (v = g(rng), v * v);
      const double r = eps * u(rng);
      for (int k = 0; k < d; ++k) y[k] = x[k] + r * dir[k] / std::sqrt(norm);
      const BucketId a = h->bucket(x), b = h->bucket(y);
      if (a.group == b.group) CHECK(a == b);
    }
  }
}

TEST_CASE("verify_hash on the face hash") {
  for (int d = 2; d <= 6; ++d) {
    auto r = verify_hash(*make_face_hash(d, 1.0), 1000, static_cast<std::uint64_t>(d));
    CHECK(r.max_diameter <= 1.0 + 1e-9);
    CHECK(r.max_consistency <= static_cast<std::size_t>(d + 1));
    CHECK(r.max_enumerated <= static_cast<std::size_t>(d + 1));
  }
}

TEST_CASE("ball carving diameter, consistency and determinism") {
  for (int d : {2, 3}) {
    auto h = make_ball_carving_hash(d, 1.0, 8, 99);
    auto r = verify_hash(*h, 500, 5);
    CHECK(r.max_diameter <= 1.0 + 1e-9);
    CHECK(static_cast<double>(r.max_consistency) <= h->params().lambda);
    auto h2 = make_ball_carving_hash(d, 1.0, 8, 99);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-10, 10);
    std::vector<RealPoint> xs;
    for (int t = 0; t < 100; ++t) {
      RealPoint x(d);
      for (auto& v : x) v = u(rng);
      xs.push_back(x);
      CHECK(h->bucket(x) == h2->bucket(x));
    }
    CHECK(h->bucket_all(xs) == h2->bucket_all(xs));
  }
  CHECK_THROWS_AS(make_ball_carving_hash(kCarveMaxDim + 1, 1.0, 8, 0), std::invalid_argument);
  CHECK(carve_lambda(2, 8) == std::ceil(std::exp(2.0) * 2 * std::log(2.0)));
}

TEST_CASE("bucket digests are stable") {
  auto h = make_face_hash(3, 1.0);
  BucketId b = h->bucket(RealPoint{0.3, 0.7, 0.1});
  CHECK(b.digest() == h->bucket(RealPoint{0.3, 0.7, 0.1}).digest());
  CHECK(b.key() < (std::uint64_t{1} << 61) - 1);
  CHECK(parse_hash_kind(to_string(HashKind::carve)) == HashKind::carve);
  CHECK_THROWS_AS(parse_hash_kind("cube"), std::invalid_argument);
}
