#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ufl/sketch.hpp"

using namespace ufl;

namespace {

Key k1(std::uint64_t v) { return Key{v}; }

} // namespace

TEST_CASE("point keys round trip") {
  GridPoint p{1, 17, 1 << 20};
  CHECK(key_point(point_key(p)) == p);
}

TEST_CASE("subsampling membership") {
  SubsampleFn zero{7, 0, 0};
  std::mt19937_64 rng(1);
  int hits = 0;
  const int n = 1000000, level = 3;
  for (int t = 0; t < n; ++t) {
    GridPoint p{static_cast<std::int64_t>(rng() >> 1), static_cast<std::int64_t>(rng() >> 1)};
    CHECK(zero.member(p));
    hits += SubsampleFn{7, 0, level}.member(p);
  }
  const double mean = n / 8.0, sd = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
  CHECK(std::abs(hits - mean) <= 3 * sd);
  GridPoint q{4, 5};
  CHECK(SubsampleFn{9, 2, 4}.member(q) == SubsampleFn{9, 2, 4}.member(q));
  // nested: surviving level i implies surviving every shallower level
  for (int t = 0; t < 1000; ++t) {
    GridPoint p{static_cast<std::int64_t>(t), 1};
    int depth = subsample_depth(3, 0, p, 20);
    for (int i = 0; i <= 20; ++i) CHECK(SubsampleFn{3, 0, i}.member(p) == (depth >= i));
  }
}

TEST_CASE("l0 basic answers") {
  L0Sketch sk(l0_config(1, 5));
  CHECK(sk.query().status == QueryStatus::empty);
  sk.update(k1(42), 3);
  auto r = sk.query();
  REQUIRE(r.status == QueryStatus::ok);
  CHECK(r.key == k1(42));
  CHECK(r.payload[0] == 3);
  sk.update(k1(42), -3);
  CHECK(sk.query().status == QueryStatus::empty);
  CHECK(sk.is_zero());
  CHECK_THROWS_AS(sk.update(k1(1), kMaxPayloadDelta + 1), std::overflow_error);
}

TEST_CASE("l0 insert then delete restores the state bit for bit") {
  L0Sketch a(l0_config(2, 11)), b(l0_config(2, 11));
  for (std::uint64_t i = 0; i < 50; ++i) {
    a.update(Key{i, i * 7}, 1);
    b.update(Key{i, i * 7}, 1);
  }
  const std::string before = a.serialize();
  a.update(Key{999, 3}, 1);
  a.update(Key{999, 3}, -1);
  CHECK(a.serialize() == before);
  CHECK(a == b);
}

TEST_CASE("l0 state is independent of update order and merges") {
  std::mt19937_64 rng(4);
  std::vector<std::pair<Key, std::int64_t>> ups;
  for (int i = 0; i < 300; ++i) ups.emplace_back(k1(rng() % 100), (rng() & 1) ? 1 : -1);
  L0Sketch fwd(l0_config(1, 8)), rev(l0_config(1, 8)), left(l0_config(1, 8)), right(l0_config(1, 8));
  for (const auto& [k, v] : ups) fwd.update(k, v);
  for (auto it = ups.rbegin(); it != ups.rend(); ++it) rev.update(it->first, it->second);
  for (std::size_t i = 0; i < ups.size(); ++i) (i < 150 ? left : right).update(ups[i].first, ups[i].second);
  left.merge(right);
  CHECK(fwd == rev);
  CHECK(fwd == left);
  L0Sketch other(l0_config(1, 9));
  CHECK_THROWS(fwd.merge(other));
}

TEST_CASE("l0 serialization round trip") {
  L0Sketch sk(l0_with_data_config(1, 3, 2));
  std::vector<std::int64_t> v{1, 0, 2, 5};
  sk.update(k1(10), v);
  L0Sketch back = L0Sketch::deserialize(sk.serialize());
  CHECK(back == sk);
  auto r = back.query();
  REQUIRE(r.status == QueryStatus::ok);
  CHECK(r.payload == Payload{1, 0, 2, 5});
  std::string bad = sk.serialize();
  bad[0] = 'X';
  CHECK_THROWS(L0Sketch::deserialize(bad));
  CHECK_THROWS(L0Sketch::deserialize(sk.serialize().substr(0, 20)));
}

TEST_CASE("l0 with data samples indices with zero frequency but nonzero data") {
  L0Sketch sk(l0_with_data_config(1, 3, 6));
  std::vector<std::int64_t> v{0, 3, 0, 0};
  sk.update(k1(5), v);
  auto r = sk.query();
  REQUIRE(r.status == QueryStatus::ok);
  CHECK(r.payload == Payload{0, 3, 0, 0});
  L0Sketch one(l0_with_data_config(1, 3, 6));
  std::vector<std::int64_t> w{2, 1, 0, 4};
  one.update(k1(8), w);
  CHECK(one.query().payload == Payload{2, 1, 0, 4});
}

TEST_CASE("l0 uniformity over two keys") {
  int first = 0;
  const int n = 2000;
  for (int s = 0; s < n; ++s) {
    L0Sketch sk(l0_config(1, static_cast<std::uint64_t>(s)));
    sk.update(k1(1), 1);
    sk.update(k1(2), 4);
    auto r = sk.query();
    REQUIRE(r.status == QueryStatus::ok);
    first += r.key == k1(1);
    CHECK(r.payload[0] == (r.key == k1(1) ? 1 : 4));
  }
  CHECK(std::abs(first - n / 2) <= 3 * std::sqrt(n / 4.0));
}

TEST_CASE("two-level sampler answers") {
  TwoLevelL0 t(l0_config(1, 1), l0_config(1, 2));
  CHECK(t.query().status == QueryStatus::empty);
  t.update(k1(7), k1(3), 5);
  auto r = t.query();
  REQUIRE(r.status == QueryStatus::ok);
  CHECK(r.row == k1(7));
  CHECK(r.col == k1(3));
  CHECK(r.row_sum == 5);
  t.update(k1(9), k1(1), 1);
  t.update(k1(9), k1(1), -1);
  for (int s = 0; s < 50; ++s) {
    TwoLevelL0 u(l0_config(1, static_cast<std::uint64_t>(s)), l0_config(1, 1000u + static_cast<std::uint64_t>(s)));
    u.update(k1(7), k1(3), 5);
    u.update(k1(9), k1(1), 1);
    u.update(k1(9), k1(1), -1);
    CHECK(u.query().row == k1(7));
  }
  TwoLevelL0 back = TwoLevelL0::deserialize(t.serialize());
  CHECK(back == t);
}

TEST_CASE("distinct counter small and mid range") {
  DistinctCounter empty(1, 3);
  CHECK(empty.estimate().value == 0);
  DistinctCounter one(1, 3);
  one.update(k1(77), 1);
  CHECK(one.estimate().value == 1);
  CHECK(one.estimate().exact);
  int inside = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    DistinctCounter dc(1, s);
    for (std::uint64_t i = 0; i < 1000; ++i) dc.update(k1(i * 2654435761ULL % 1000003), 1);
    double v = dc.estimate().value;
    inside += v >= 500 && v <= 1500;
  }
  CHECK(inside >= 45);
}

TEST_CASE("sparse recovery") {
  SparseRecovery sr(64, 2, 5);
  std::map<Key, std::int64_t> truth;
  for (std::uint64_t i = 0; i < 60; ++i) {
    sr.update(Key{i, i + 1}, 1);
    truth[Key{i, i + 1}] = 1;
  }
  for (std::uint64_t i = 0; i < 10; ++i) {
    sr.update(Key{i, i + 1}, -1);
    truth.erase(Key{i, i + 1});
  }
  auto got = sr.recover();
  REQUIRE(got.has_value());
  CHECK(got->size() == truth.size());
  for (const auto& [k, v] : *got) CHECK(truth.at(k) == v);
  SparseRecovery small(4, 1, 5);
  for (std::uint64_t i = 0; i < 200; ++i) small.update(k1(i), 1);
  CHECK_FALSE(small.recover().has_value());
}

TEST_CASE("replay agrees with the materialized sketches") {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<std::pair<Key, Payload>> sup;
    std::vector<Key> keys;
    L0Sketch sk(l0_config(1, seed));
    DistinctCounter dc(1, seed);
    for (int i = 0; i < n; ++i) {
      Key k = k1(rng() % 1000000);
      if (std::find(keys.begin(), keys.end(), k) != keys.end()) continue;
      keys.push_back(k);
      sup.emplace_back(k, Payload{1});
      sk.update(k, 1);
      dc.update(k, 1);
    }
    auto a = sk.query(), b = l0_replay(l0_config(1, seed), sup);
    CHECK(a.status == b.status);
    CHECK(a.key == b.key);
    auto pick = l0_replay_pick(l0_config(1, seed), keys);
    CHECK(keys[pick.second] == a.key);
    CHECK(dc.estimate().value == distinct_replay(1, seed, keys).value);

    TwoLevelL0 t(l0_config(1, seed), l0_config(1, seed + 77));
    std::vector<RowEntry> rows;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      Key row = k1(i % 3);
      auto it = std::find_if(rows.begin(), rows.end(), [&](const RowEntry& e) { return e.row == row; });
      if (it == rows.end()) it = rows.insert(rows.end(), RowEntry{row, {}});
      it->cols.emplace_back(keys[i], 1);
      t.update(row, keys[i], 1);
    }
    auto x = t.query(), y = two_level_replay(l0_config(1, seed), l0_config(1, seed + 77), rows);
    CHECK(x.status == y.status);
    CHECK(x.row == y.row);
    CHECK(x.col == y.col);
    CHECK(x.row_sum == y.row_sum);
  }
}
