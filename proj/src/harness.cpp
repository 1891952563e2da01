#include "ufl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "ufl/oracle.hpp"
#include "ufl/prf.hpp"

namespace ufl {

std::string to_string(GenKind k) {
  switch (k) {
  case GenKind::uniform: return "uniform";
  case GenKind::clustered: return "clustered";
  case GenKind::example_hard: return "example_hard";
  case GenKind::bhm: return "bhm";
  }
  return "?";
}

GenKind parse_gen_kind(const std::string& s) {
  if (s == "uniform") return GenKind::uniform;
  if (s == "clustered") return GenKind::clustered;
  if (s == "example_hard") return GenKind::example_hard;
  if (s == "bhm") return GenKind::bhm;
  throw std::invalid_argument("unknown generator kind '" + s + "'");
}

namespace {

std::int64_t uniform_coord(std::mt19937_64& rng, std::int64_t delta) {
  return 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(delta));
}

// compares n against delta^d in log space
bool grid_holds(std::size_t n, int d, std::int64_t delta) {
  return static_cast<double>(d) * std::log2(static_cast<double>(delta)) >= std::log2(static_cast<double>(std::max<std::size_t>(n, 1))) - 1e-9;
}

std::int64_t next_pow2(std::int64_t v) {
  std::int64_t p = 2;
  while (p < v) p *= 2;
  return p;
}

} // namespace

Stream gen_uniform(std::size_t n, int d, std::int64_t delta, double f, std::uint64_t seed) {
  Stream s{Instance{d, delta, f}, {}};
  s.inst.validate();
  if (!grid_holds(n, d, delta)) throw std::invalid_argument("cannot place " + std::to_string(n) + " distinct points in the grid");
  std::mt19937_64 rng(seed);
  std::set<GridPoint> seen;
  const std::size_t limit = 100 * n + 1000;
  for (std::size_t tries = 0; seen.size() < n; ++tries) {
    if (tries > limit) throw std::runtime_error("cannot place " + std::to_string(n) + " distinct uniform points");
    GridPoint p(static_cast<std::size_t>(d));
    for (auto& c : p) c = uniform_coord(rng, delta);
    if (seen.insert(p).second) s.updates.push_back({+1, std::move(p)});
  }
  return s;
}

Stream gen_clustered(std::size_t n, int d, std::int64_t delta, double f, int k, double radius, std::uint64_t seed) {
  Stream s{Instance{d, delta, f}, {}};
  s.inst.validate();
  if (n == 0) return s;
  if (k < 1) throw std::invalid_argument("clustered generator needs k >= 1");
  if (radius <= 0) radius = static_cast<double>(delta) / 100;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  std::vector<GridPoint> centers(static_cast<std::size_t>(k), GridPoint(static_cast<std::size_t>(d)));
  for (auto& c : centers)
    for (auto& x : c) x = uniform_coord(rng, delta);
  std::set<GridPoint> seen;
  const std::size_t limit = 100 * n + 1000;
  for (std::size_t tries = 0; seen.size() < n; ++tries) {
    if (tries > limit) throw std::runtime_error("cannot place " + std::to_string(n) + " distinct clustered points");
    const auto& c = centers[rng() % static_cast<std::uint64_t>(k)];
    RealPoint dir(static_cast<std::size_t>(d));
    double norm = 0;
    for (auto& x : dir) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    const double r = radius * std::pow(unit(rng), 1.0 / d);
    GridPoint p(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      double v = static_cast<double>(c[static_cast<std::size_t>(j)]) + (norm > 0 ? r * dir[static_cast<std::size_t>(j)] / norm : 0);
      p[static_cast<std::size_t>(j)] = std::clamp<std::int64_t>(std::llround(v), 1, delta);
    }
    if (seen.insert(p).second) s.updates.push_back({+1, std::move(p)});
  }
  return s;
}

HardInstance gen_example_hard(std::size_t n, std::uint64_t seed, std::int64_t delta) {
  const auto root = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (n < 4 || root * root != n) throw std::invalid_argument("example_hard needs n a perfect square >= 4");
  const int d = static_cast<int>(std::ceil(8 * std::log2(static_cast<double>(n))));
  const double per_unit = 10.0 * static_cast<double>(n) * std::sqrt(static_cast<double>(d)); // grid units per unit length
  std::mt19937_64 rng(seed);

  // P1: distinct random sign vectors, scaled so the closest pair is at distance >= 1
  std::set<std::vector<int>> codes;
  while (codes.size() < root) {
    std::vector<int> c(static_cast<std::size_t>(d));
    for (auto& x : c) x = (rng() & 1) ? 1 : -1;
    codes.insert(std::move(c));
  }
  std::vector<std::vector<int>> cw(codes.begin(), codes.end());
  std::shuffle(cw.begin(), cw.end(), rng);
  int hmin = d;
  for (std::size_t a = 0; a < cw.size(); ++a)
    for (std::size_t b = a + 1; b < cw.size(); ++b) {
      int h = 0;
      for (int j = 0; j < d; ++j) h += cw[a][static_cast<std::size_t>(j)] != cw[b][static_cast<std::size_t>(j)];
      hmin = std::min(hmin, h);
    }
  const auto S = static_cast<std::int64_t>(std::ceil(per_unit / (2 * std::sqrt(static_cast<double>(hmin)))));
  // P1 coordinates in {1, 2S+1}; P2 is a {-1,0,1}-cloud around 5S
  const std::int64_t top = 5 * S + 1;
  const std::int64_t need = next_pow2(top);
  if (delta == 0) delta = need;
  if (delta < need)
    throw std::invalid_argument("example_hard with n=" + std::to_string(n) + " needs delta >= " + std::to_string(need));

  HardInstance out;
  out.stream.inst = Instance{d, delta, per_unit};
  out.stream.inst.validate();
  out.unit = 1.0 / per_unit;
  for (const auto& c : cw) {
    GridPoint p(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) p[static_cast<std::size_t>(j)] = S + 1 + c[static_cast<std::size_t>(j)] * S;
    out.stream.updates.push_back({+1, std::move(p)});
    out.r_class.push_back(1);
  }
  std::set<GridPoint> cloud;
  while (cloud.size() < n - root) {
    GridPoint p(static_cast<std::size_t>(d));
    for (auto& x : p) x = 5 * S + static_cast<std::int64_t>(rng() % 3) - 1;
    if (cloud.insert(p).second) {
      out.stream.updates.push_back({+1, p});
      out.r_class.push_back(2);
    }
  }
  out.p1 = root;
  out.p2 = n - root;
  return out;
}

// ---------------------------------------------------------------- BHM

namespace {

constexpr std::int64_t kBhmScale = std::int64_t{1} << 23;
constexpr std::int64_t kBhmOffset = 9; // room for the -8..8 perturbation
constexpr int kBhmMaxShift = 8;

// grid point with ones (scaled) at the given coordinates
GridPoint bhm_point(int dims, std::initializer_list<int> ones) {
  GridPoint p(static_cast<std::size_t>(dims), kBhmOffset);
  for (int c : ones) p[static_cast<std::size_t>(c)] += kBhmScale;
  return p;
}

} // namespace

RealPoint BhmInstance::s_point(int i, int b) const {
  RealPoint p(static_cast<std::size_t>(8 * n), 0.0);
  p[static_cast<std::size_t>(4 * i + 2 * b)] = 1;
  p[static_cast<std::size_t>(4 * i + 2 * b + 1)] = 1;
  return p;
}

RealPoint BhmInstance::to_unit(const GridPoint& p) const {
  RealPoint r(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) r[j] = static_cast<double>(p[j] - offset) / static_cast<double>(scale);
  return r;
}

BhmInstance gen_bhm_instance(int n, bool yes, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("BHM instance needs n >= 1");
  BhmInstance b;
  b.n = n;
  b.yes = yes;
  b.scale = kBhmScale;
  b.offset = kBhmOffset;
  const int dims = 8 * n;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 2 * n; ++i) b.x.push_back(static_cast<int>(rng() & 1));
  std::vector<int> perm(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < 2 * n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int e = 0; e < n; ++e) {
    int i = perm[static_cast<std::size_t>(2 * e)], j = perm[static_cast<std::size_t>(2 * e + 1)];
    b.matching.emplace_back(i, j);
    int parity = b.x[static_cast<std::size_t>(i)] ^ b.x[static_cast<std::size_t>(j)];
    b.w.push_back(yes ? parity : 1 - parity);
  }
  b.stream.inst = Instance{dims, 2 * kBhmScale, 2.0 * static_cast<double>(kBhmScale)};

  // 100n distinct copies of s_i^{x_i}, shifted by 1..8 grid units along one axis
  std::vector<std::pair<int, int>> shifts; // (axis, signed amount)
  for (int a = 0; a < dims; ++a)
    for (int m = 1; m <= kBhmMaxShift; ++m) {
      shifts.emplace_back(a, m);
      shifts.emplace_back(a, -m);
    }
  const auto copies = static_cast<std::size_t>(100 * n);
  for (int i = 0; i < 2 * n; ++i) {
    const int xi = b.x[static_cast<std::size_t>(i)];
    GridPoint center = bhm_point(dims, {4 * i + 2 * xi, 4 * i + 2 * xi + 1});
    std::shuffle(shifts.begin(), shifts.end(), rng);
    for (std::size_t c = 0; c < copies; ++c) {
      GridPoint p = center;
      p[static_cast<std::size_t>(shifts[c].first)] += shifts[c].second;
      b.alice_slack += std::abs(shifts[c].second) / static_cast<double>(kBhmScale);
      b.stream.updates.push_back({+1, std::move(p)});
    }
  }
  for (int e = 0; e < n; ++e) {
    auto [i, j] = b.matching[static_cast<std::size_t>(e)];
    const int w = b.w[static_cast<std::size_t>(e)];
    GridPoint t0 = bhm_point(dims, {4 * i, 4 * i + 1, 4 * j + 2 - 2 * w, 4 * j + 3 - 2 * w});
    GridPoint t1 = bhm_point(dims, {4 * i + 2, 4 * i + 3, 4 * j + 2 * w, 4 * j + 2 * w + 1});
    b.bob.push_back(t0);
    b.bob.push_back(t1);
    b.stream.updates.push_back({+1, std::move(t0)});
    b.stream.updates.push_back({+1, std::move(t1)});
  }
  return b;
}

std::vector<RealPoint> bhm_candidates(const BhmInstance& b) {
  std::vector<RealPoint> out;
  // loaded centers first, then empty ones
  for (int i = 0; i < 2 * b.n; ++i) out.push_back(b.s_point(i, b.x[static_cast<std::size_t>(i)]));
  for (int i = 0; i < 2 * b.n; ++i) out.push_back(b.s_point(i, 1 - b.x[static_cast<std::size_t>(i)]));
  std::vector<RealPoint> bob;
  for (const auto& t : b.bob) bob.push_back(b.to_unit(t));
  for (const auto& t : bob) out.push_back(t);
  const auto k = static_cast<unsigned>(bob.size());
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    const int size = __builtin_popcount(mask);
    if (size < 2 || size > 4) continue;
    RealPoint avg(bob[0].size(), 0.0);
    for (unsigned t = 0; t < k; ++t)
      if (mask >> t & 1)
        for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += bob[t][j] / size;
    out.push_back(std::move(avg));
  }
  return out;
}

double bhm_candidate_optimum(const BhmInstance& b) {
  const double f = 2.0;
  const auto cand = bhm_candidates(b);
  const auto forced = static_cast<std::size_t>(2 * b.n);
  std::vector<RealPoint> bob;
  for (const auto& t : b.bob) bob.push_back(b.to_unit(t));
  const auto k = static_cast<unsigned>(bob.size());
  std::vector<double> d0(k, std::numeric_limits<double>::infinity());
  for (unsigned t = 0; t < k; ++t)
    for (std::size_t c = 0; c < forced; ++c) d0[t] = std::min(d0[t], distance(bob[t], cand[c]));
  // group[S]: one extra facility serving exactly the clients in S
  const unsigned full = (1u << k) - 1;
  std::vector<double> group(full + 1, std::numeric_limits<double>::infinity());
  for (unsigned S = 1; S <= full; ++S)
    for (std::size_t c = forced; c < cand.size(); ++c) {
      double cost = f;
      for (unsigned t = 0; t < k; ++t)
        if (S >> t & 1) cost += distance(bob[t], cand[c]);
      group[S] = std::min(group[S], cost);
    }
  std::vector<double> best(full + 1, 0);
  for (unsigned S = 1; S <= full; ++S) {
    const unsigned low = S & (~S + 1);
    const int lt = __builtin_ctz(S);
    double v = d0[static_cast<unsigned>(lt)] + best[S ^ low];
    for (unsigned G = S; G; G = (G - 1) & S)
      if (G & low) v = std::min(v, group[G] + best[S ^ G]);
    best[S] = v;
  }
  return static_cast<double>(forced) * f + b.alice_slack + best[full];
}

double bhm_exhaustive_optimum(const BhmInstance& b) {
  auto cand = bhm_candidates(b);
  // work in grid units, where the stream lives
  for (auto& c : cand)
    for (auto& x : c) x = x * static_cast<double>(b.scale) + static_cast<double>(b.offset);
  std::vector<GridPoint> pts;
  for (const auto& u : b.stream.updates) pts.push_back(u.point);
  return exact_opt_candidates(pts, b.stream.inst.f, cand) / static_cast<double>(b.scale);
}

// ---------------------------------------------------------------- stream transforms

Stream shuffle_order(const Stream& s, std::uint64_t seed) {
  for (const auto& u : s.updates)
    if (u.sign < 0) throw std::invalid_argument("shuffle_order expects an insertion-only stream");
  Stream out = s;
  std::mt19937_64 rng(seed);
  std::shuffle(out.updates.begin(), out.updates.end(), rng);
  return out;
}

Stream with_deletions(const Stream& s, double rate, std::uint64_t seed) {
  if (rate < 0 || rate >= 1) throw std::invalid_argument("deletion rate must be in [0, 1)");
  if (rate == 0) return s;
  const auto live = live_points(s.updates);
  std::set<GridPoint> taken(live.begin(), live.end());
  const std::size_t inserted = s.updates.size();
  const auto decoys = static_cast<std::size_t>(std::llround(rate / (1 - rate) * static_cast<double>(inserted)));
  if (!grid_holds(taken.size() + decoys, s.inst.d, s.inst.delta)) throw std::invalid_argument("grid too small for decoys");
  std::mt19937_64 rng(seed);
  std::vector<GridPoint> extra;
  for (std::size_t tries = 0; extra.size() < decoys; ++tries) {
    if (tries > 100 * decoys + 1000) throw std::runtime_error("cannot place decoy points");
    GridPoint p(static_cast<std::size_t>(s.inst.d));
    for (auto& c : p) c = uniform_coord(rng, s.inst.delta);
    if (taken.insert(p).second) extra.push_back(std::move(p));
  }
  // merge decoy insertions at random positions, each deletion at a random later one
  const std::size_t total = inserted + 2 * decoys;
  std::vector<int> tag(total, 0); // 0: original update, 1: decoy insert, 2: decoy delete
  std::vector<std::size_t> slots(total);
  for (std::size_t i = 0; i < total; ++i) slots[i] = i;
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t k = 0; k < decoys; ++k) {
    std::size_t a = slots[2 * k], b = slots[2 * k + 1];
    if (a > b) std::swap(a, b);
    tag[a] = 1;
    tag[b] = 2;
    pairs.emplace_back(a, b);
  }
  std::map<std::size_t, const GridPoint*> at;
  for (std::size_t k = 0; k < decoys; ++k) {
    at[pairs[k].first] = &extra[k];
    at[pairs[k].second] = &extra[k];
  }
  Stream out{s.inst, {}};
  out.updates.reserve(total);
  std::size_t orig = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (tag[i] == 0) out.updates.push_back(s.updates[orig++]);
    else out.updates.push_back({tag[i] == 1 ? +1 : -1, *at[i]});
  }
  return out;
}

Stream generate(const GeneratorSpec& spec) {
  Stream s;
  switch (spec.kind) {
  case GenKind::uniform: s = gen_uniform(spec.n, spec.d, spec.delta, spec.f, spec.seed); break;
  case GenKind::clustered: s = gen_clustered(spec.n, spec.d, spec.delta, spec.f, spec.k, spec.radius, spec.seed); break;
  case GenKind::example_hard: s = gen_example_hard(spec.n, spec.seed, spec.delta).stream; break;
  case GenKind::bhm: s = gen_bhm_instance(static_cast<int>(spec.n), spec.bhm_yes, spec.seed).stream; break;
  }
  if (spec.shuffled) s = shuffle_order(s, Prf(spec.seed)(0x73687566));
  if (spec.deletion_rate > 0) s = with_deletions(s, spec.deletion_rate, Prf(spec.seed)(0x64656c));
  return s;
}

// ---------------------------------------------------------------- experiments

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

EstimateReport run_algo(const std::string& algo, const Stream& s, std::uint64_t seed, const EstimatorOptions& opt) {
  if (algo == "two-pass") return two_pass_estimate(s, opt.m, seed, opt);
  if (algo == "random-order") return random_order_estimate(s, opt.m, seed, opt);
  if (algo == "one-pass") return one_pass_estimate(s, seed, opt);
  if (algo == "offline") return offline_estimate(s);
  throw std::invalid_argument("unknown algorithm '" + algo + "'");
}

ExperimentTable run_experiment(const std::vector<GeneratorSpec>& specs, const std::vector<std::string>& algos,
                               std::size_t repetitions, std::uint64_t seed, const EstimatorOptions& opt) {
  ExperimentTable table;
  for (std::size_t si = 0; si < specs.size(); ++si) {
    const GeneratorSpec& spec = specs[si];
    const Stream base = generate(spec);
    const auto live = live_points(base.updates);
    const double truth = sum_rp(live, base.inst.f);
    const double mp = live.empty() ? 0 : mp_solve(live, base.inst.f).cost;
    const std::string name = to_string(spec.kind) + "-n" + std::to_string(spec.n) + "-s" + std::to_string(spec.seed);
    for (const auto& algo : algos) {
      std::vector<double> ratios;
      ExperimentSummary sum{name, algo, 0, 0, 0, 0, 0};
      for (std::size_t r = 0; r < repetitions; ++r) {
        const std::uint64_t rs = Prf(seed)(si, r);
        Stream s = algo == "random-order" && spec.deletion_rate == 0 ? shuffle_order(base, Prf(rs)(0x6f72)) : base;
        auto t0 = std::chrono::steady_clock::now();
        EstimateReport rep = run_algo(algo, s, rs, opt);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ExperimentRow row{name, algo, rs, rep.estimate, truth, mp, truth > 0 ? rep.estimate / truth : (rep.estimate == 0 ? 1.0 : 0.0),
                          secs, rep.space_bytes, rep.unreliable, rep.fallback};
        ratios.push_back(row.ratio);
        sum.unreliable += row.unreliable;
        table.rows.push_back(std::move(row));
      }
      sum.runs = ratios.size();
      sum.q10 = quantile(ratios, 0.1);
      sum.q50 = quantile(ratios, 0.5);
      sum.q90 = quantile(ratios, 0.9);
      table.summary.push_back(std::move(sum));
    }
  }
  return table;
}

} // namespace ufl
