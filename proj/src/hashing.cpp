#include "ufl/hashing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "ufl/prf.hpp"

namespace ufl {

std::string to_string(HashKind k) {
  switch (k) {
  case HashKind::grid: return "grid";
  case HashKind::face: return "face";
  case HashKind::carve: return "carve";
  }
  return "?";
}

HashKind parse_hash_kind(const std::string& s) {
  if (s == "grid") return HashKind::grid;
  if (s == "face") return HashKind::face;
  if (s == "carve") return HashKind::carve;
  throw std::invalid_argument("unknown hash construction '" + s + "'");
}

std::uint64_t BucketId::digest() const {
  std::vector<std::uint64_t> w;
  w.reserve(words.size() + 2);
  w.push_back(static_cast<std::uint64_t>(kind));
  w.push_back(static_cast<std::uint64_t>(static_cast<std::uint32_t>(group)));
  w.insert(w.end(), words.begin(), words.end());
  static const Prf prf(0xb0c4e7d1ULL);
  return prf.hash_words(w);
}

std::uint64_t BucketId::key() const { return field::reduce(digest() >> 3); }

std::vector<BucketId> ConsistentHash::bucket_all(const std::vector<RealPoint>& xs) const {
  std::vector<BucketId> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(bucket(x));
  return out;
}

std::vector<BucketId> ConsistentHash::enlarged(const RealPoint&, double) const {
  throw std::logic_error(to_string(kind()) + " hash has no structured enumeration of enlarged buckets");
}

namespace {

std::uint64_t word_of(double v) { return std::bit_cast<std::uint64_t>(v + 0.0); }

void check_point(const RealPoint& x, int d) {
  if (static_cast<int>(x.size()) != d) throw std::invalid_argument("point dimension does not match the hash");
}

// ---------------------------------------------------------------- grid

class GridHash final : public ConsistentHash {
public:
  GridHash(int d, double ell)
      : ConsistentHash({d, ell, std::sqrt(static_cast<double>(d)), std::ldexp(1.0, std::min(d, 1000)), 0}),
        side_(ell / std::sqrt(static_cast<double>(d))) {}

  BucketId bucket(const RealPoint& x) const override {
    check_point(x, params_.d);
    BucketId b{HashKind::grid, 0, {}};
    b.words.reserve(x.size());
    for (double v : x) b.words.push_back(word_of(std::floor(v / side_)));
    return b;
  }

  bool has_enumeration() const override { return true; }

  std::vector<BucketId> enlarged(const RealPoint& x, double radius) const override {
    check_point(x, params_.d);
    const int d = params_.d;
    std::vector<double> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      lo[k] = std::floor((x[k] - radius) / side_);
      hi[k] = std::floor((x[k] + radius) / side_);
    }
    std::vector<BucketId> out;
    std::vector<double> cell(d);
    auto rec = [&](auto&& self, int k, double acc) -> void {
      if (k == d) {
        BucketId b{HashKind::grid, 0, {}};
        for (double c : cell) b.words.push_back(word_of(c));
        out.push_back(std::move(b));
        if (out.size() > (1u << 20)) throw std::runtime_error("grid enumeration exceeds 2^20 cells");
        return;
      }
      for (double c = lo[k]; c <= hi[k]; c += 1) {
        double a = c * side_, e = (c + 1) * side_;
        double gap = x[k] < a ? a - x[k] : (x[k] > e ? x[k] - e : 0);
        double t = acc + gap * gap;
        if (t > radius * radius) continue;
        cell[k] = c;
        self(self, k + 1, t);
      }
    };
    rec(rec, 0, 0);
    return out;
  }

  HashKind kind() const override { return HashKind::grid; }

private:
  double side_;
};

// ---------------------------------------------------------------- face

class FaceHash final : public ConsistentHash {
public:
  FaceHash(int d, double ell, double gamma)
      : ConsistentHash({d, ell, gamma, static_cast<double>(d + 1), 0}), T_(face_cube_side(d, ell)), eps_(ell / gamma) {
    // the separation arguments need T > (2d+1) eps and l_0 + eps/2 < T/2
    if (!(T_ > (2.0 * d + 2.0) * eps_))
      throw std::invalid_argument("face hash gap too small for the cube side (need T > (2d+2) eps)");
  }

  struct Local {
    std::vector<double> cube;  // cube index per coordinate
    std::vector<double> delta; // distance to the nearest face plane
    std::vector<int> side;     // 0: lower plane, 1: upper plane
    std::vector<int> order;    // coordinates sorted by delta
  };

  Local local(const RealPoint& x) const {
    const int d = params_.d;
    Local L;
    L.cube.resize(d);
    L.delta.resize(d);
    L.side.resize(d);
    L.order.resize(d);
    for (int k = 0; k < d; ++k) {
      double c = std::floor(x[k] / T_);
      double y = x[k] - c * T_;
      if (y >= T_) c += 1, y -= T_; // guard against rounding at the upper edge
      L.cube[k] = c;
      double up = T_ - y;
      L.side[k] = y <= up ? 0 : 1;
      L.delta[k] = std::min(y, up);
    }
    std::iota(L.order.begin(), L.order.end(), 0);
    std::stable_sort(L.order.begin(), L.order.end(), [&](int a, int b) { return L.delta[a] < L.delta[b]; });
    return L;
  }

  // m fixed coordinates taken from the front of `order`; m = 0 is the interior.
  BucketId make(const Local& L, int m) const {
    const int d = params_.d;
    BucketId b{HashKind::face, d - m, {}};
    const std::size_t mask_words = (static_cast<std::size_t>(d) + 63) / 64;
    b.words.assign(mask_words + static_cast<std::size_t>(d), 0);
    std::vector<char> fixed(d, 0);
    for (int r = 0; r < m; ++r) fixed[L.order[r]] = 1;
    for (int k = 0; k < d; ++k) {
      if (fixed[k]) {
        b.words[static_cast<std::size_t>(k) / 64] |= std::uint64_t{1} << (k % 64);
        b.words[mask_words + k] = word_of(L.cube[k] + L.side[k]);
      } else {
        b.words[mask_words + k] = word_of(L.cube[k]);
      }
    }
    return b;
  }

  BucketId bucket(const RealPoint& x) const override {
    check_point(x, params_.d);
    Local L = local(x);
    const int d = params_.d;
    for (int m = d; m >= 1; --m)
      if (L.delta[L.order[m - 1]] <= m * eps_) return make(L, m);
    return make(L, 0);
  }

  bool has_enumeration() const override { return true; }

  // A ball of radius r < eps/2... hits group d-m only through the face fixing
  // the m coordinates closest to a plane; feasibility is a separable
  // least-squares question per group.
  std::vector<BucketId> enlarged(const RealPoint& x, double radius) const override {
    check_point(x, params_.d);
    if (radius * 2 > eps_ * (1 + 1e-12))
      throw std::invalid_argument("face hash enumeration needs radius <= eps/2");
    Local L = local(x);
    const int d = params_.d;
    const double r2 = radius * radius;
    std::vector<BucketId> out;
    for (int m = d; m >= 0; --m) {
      // quick reject: the m-th closest plane must be reachable, the (m+1)-th avoidable
      if (m > 0 && L.delta[L.order[m - 1]] > m * eps_ + radius) continue;
      if (m < d && L.delta[L.order[m]] + radius <= (m + 1) * eps_) continue;
      double cost = 0;
      bool strict = false;
      for (int r = 0; r < m; ++r) {
        double a = L.delta[L.order[r]] - m * eps_;
        if (a > 0) cost += a * a;
      }
      for (int r = m; r < d; ++r) {
        double t = (r + 1) * eps_;
        double dl = L.delta[L.order[r]];
        if (dl <= t) {
          strict = true;
          cost += (t - dl) * (t - dl);
        }
      }
      if (cost < r2 || (!strict && cost <= r2)) out.push_back(make(L, m));
    }
    return out;
  }

  HashKind kind() const override { return HashKind::face; }
  double cube_side() const { return T_; }

private:
  double T_;
  double eps_;
};

// ---------------------------------------------------------------- ball carving

class CarveHash final : public ConsistentHash {
public:
  CarveHash(int d, double ell, double gamma, std::uint64_t seed)
      : ConsistentHash({d, ell, gamma, carve_lambda(d, gamma), seed}), w_(ell / 2), prf_(seed),
        budget_(carve_center_budget(d)) {
    if (d > kCarveMaxDim) throw std::invalid_argument("ball carving supports d <= " + std::to_string(kCarveMaxDim));
    if (!(gamma >= 1)) throw std::invalid_argument("ball carving needs gamma >= 1");
    // cache enough centers to cover almost every point without recomputation
    double p = cover_probability(d);
    std::uint64_t cached = std::min<std::uint64_t>(budget_, static_cast<std::uint64_t>(std::ceil(12.0 / p)));
    cached = std::min<std::uint64_t>(cached, std::uint64_t{1} << 17);
    centers_.resize(static_cast<std::size_t>(cached) * d);
    for (std::uint64_t i = 0; i < cached; ++i)
      for (int k = 0; k < d; ++k) centers_[i * d + k] = coord(i, k);
  }

  static double cover_probability(int d) {
    // vol(B(w)) / (4w)^d
    double vball = std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0 + 1);
    return vball / std::pow(4.0, d);
  }

  BucketId bucket(const RealPoint& x) const override { return bucket_all({x}).front(); }

  // One scan over the centers for the whole batch; a center is skipped for
  // every point at once when its nearest lattice copy misses the batch's
  // bounding ball.
  std::vector<BucketId> bucket_all(const std::vector<RealPoint>& xs) const override {
    const int d = params_.d;
    for (const auto& x : xs) check_point(x, d);
    std::vector<BucketId> out(xs.size());
    if (xs.empty()) return out;
    RealPoint mid(d, 0.0);
    for (const auto& x : xs)
      for (int k = 0; k < d; ++k) mid[k] += x[k] / static_cast<double>(xs.size());
    double rad = 0;
    for (const auto& x : xs) rad = std::max(rad, distance(x, mid));
    const double side = 4 * w_;
    const double reach = w_ + rad;
    const std::uint64_t cached = centers_.size() / d;
    std::vector<char> done(xs.size(), 0);
    std::size_t left = xs.size();
    std::vector<double> v(d);
    for (std::uint64_t i = 0; i < budget_ && left > 0; ++i) {
      const double* c;
      if (i < cached) {
        c = &centers_[i * d];
      } else {
        for (int k = 0; k < d; ++k) v[k] = coord(i, k);
        c = v.data();
      }
      double s = 0;
      for (int k = 0; k < d && s <= reach * reach; ++k) {
        double t = mid[k] - c[k] - side * std::nearbyint((mid[k] - c[k]) / side);
        s += t * t;
      }
      if (s > reach * reach) continue;
      for (std::size_t a = 0; a < xs.size(); ++a) {
        if (done[a]) continue;
        const RealPoint& x = xs[a];
        double q = 0;
        for (int k = 0; k < d && q <= w_ * w_; ++k) {
          double t = x[k] - c[k] - side * std::nearbyint((x[k] - c[k]) / side);
          q += t * t;
        }
        if (q > w_ * w_) continue;
        BucketId b{HashKind::carve, static_cast<std::int32_t>(i), {}};
        for (int k = 0; k < d; ++k) b.words.push_back(word_of(std::nearbyint((x[k] - c[k]) / side)));
        out[a] = std::move(b);
        done[a] = 1;
        --left;
      }
    }
    if (left > 0) throw std::runtime_error("uncovered point: ball carving exhausted its center budget");
    return out;
  }

  HashKind kind() const override { return HashKind::carve; }

private:
  double coord(std::uint64_t i, int k) const {
    return static_cast<double>(prf_(i, static_cast<std::uint64_t>(k)) >> 11) * 0x1.0p-53 * 4 * w_;
  }

  double w_;
  Prf prf_;
  std::uint64_t budget_;
  std::vector<double> centers_;
};

} // namespace

std::unique_ptr<ConsistentHash> make_grid_hash(int d, double ell) {
  if (d < 1 || !(ell > 0)) throw std::invalid_argument("grid hash needs d >= 1 and ell > 0");
  return std::make_unique<GridHash>(d, ell);
}

double face_gamma(int d) { return 10.0 * std::pow(static_cast<double>(d), 1.5); }

double face_min_gamma(int d, double ell) {
  return (2.0 * d + 2.0) * ell / face_cube_side(d, ell) * (1 + 1e-9);
}

double face_cube_side(int d, double ell) {
  double t = ell / std::sqrt(static_cast<double>(d));
  int e;
  std::frexp(t, &e); // t = m * 2^e with m in [0.5, 1)
  return std::ldexp(1.0, e - 1);
}

std::unique_ptr<ConsistentHash> make_face_hash(int d, double ell, double gamma) {
  if (d < 1 || !(ell > 0)) throw std::invalid_argument("face hash needs d >= 1 and ell > 0");
  return std::make_unique<FaceHash>(d, ell, gamma > 0 ? gamma : face_gamma(d));
}

double carve_lambda(int d, double gamma) {
  double dl = d <= 1 ? 1.0 : d * std::log(static_cast<double>(d));
  return std::ceil(std::exp(8.0 * d / gamma) * dl);
}

std::uint64_t carve_center_budget(int d) {
  // 64 / Pr[a single center covers a point], rounded up to a power of two
  double need = 64.0 / CarveHash::cover_probability(d);
  int e = static_cast<int>(std::ceil(std::log2(need)));
  return std::uint64_t{1} << std::clamp(e, 4, 20);
}

std::unique_ptr<ConsistentHash> make_ball_carving_hash(int d, double ell, double gamma, std::uint64_t seed) {
  if (d < 1 || !(ell > 0)) throw std::invalid_argument("ball carving needs d >= 1 and ell > 0");
  return std::make_unique<CarveHash>(d, ell, gamma, seed);
}

std::unique_ptr<ConsistentHash> make_hash(HashKind kind, int d, double ell, double gamma, std::uint64_t seed) {
  switch (kind) {
  case HashKind::grid: return make_grid_hash(d, ell);
  case HashKind::face: return make_face_hash(d, ell, gamma);
  case HashKind::carve: return make_ball_carving_hash(d, ell, gamma > 0 ? gamma : 8.0, seed);
  }
  throw std::invalid_argument("unknown hash kind");
}

HashVerifyReport verify_hash(const ConsistentHash& h, std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("verify_hash needs trials >= 1");
  const HashParams& hp = h.params();
  const int d = hp.d;
  const double ell = hp.ell, eps = hp.ell / hp.gamma;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  HashVerifyReport rep;
  rep.ell = ell;
  rep.gamma = hp.gamma;
  rep.lambda = hp.lambda;

  auto in_ball = [&](const RealPoint& c, double radius) {
    RealPoint dir(d);
    double nrm = 0;
    for (auto& v : dir) v = gauss(rng), nrm += v * v;
    nrm = std::sqrt(nrm);
    double s = radius * std::pow(unif(rng), 1.0 / d) / (nrm > 0 ? nrm : 1);
    RealPoint y(c);
    for (int k = 0; k < d; ++k) y[k] += dir[k] * s;
    return y;
  };
  // half the centers are drawn near lattice planes, where buckets meet
  auto center = [&](std::size_t t) {
    RealPoint x(d);
    double unit = h.kind() == HashKind::face ? face_cube_side(d, ell) : ell / std::sqrt(static_cast<double>(d));
    for (int k = 0; k < d; ++k) {
      double base = std::floor(unif(rng) * 16) * unit;
      if (t % 2 == 1 && unif(rng) < 0.6) x[k] = base + (unif(rng) - 0.5) * 2.5 * (d + 1) * eps;
      else x[k] = base + unif(rng) * unit;
    }
    return x;
  };

  const std::size_t set_size = static_cast<std::size_t>(std::max(4, 2 * d + 2));
  for (std::size_t t = 0; t < trials; ++t) {
    RealPoint x = center(t);
    // consistency: S inside a ball of diameter eps
    std::vector<RealPoint> S{x};
    for (std::size_t s = 1; s < set_size; ++s) S.push_back(in_ball(x, eps / 2));
    std::vector<BucketId> ids = h.bucket_all(S);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    rep.max_consistency = std::max(rep.max_consistency, ids.size());
    ++rep.sets_checked;
    if (h.has_enumeration())
      rep.max_enumerated = std::max(rep.max_enumerated, h.enlarged(x, eps / 2).size());

    // diameter: points around x at several scales, kept when they share x's bucket
    std::vector<RealPoint> probe{x};
    for (int s = 0; s < 8; ++s) probe.push_back(in_ball(x, std::ldexp(ell, -(s % 4))));
    std::vector<BucketId> pb = h.bucket_all(probe);
    std::vector<const RealPoint*> same;
    for (std::size_t a = 0; a < probe.size(); ++a)
      if (pb[a] == pb[0]) same.push_back(&probe[a]);
    for (std::size_t a = 0; a < same.size(); ++a)
      for (std::size_t b = a + 1; b < same.size(); ++b) {
        rep.max_diameter = std::max(rep.max_diameter, distance(*same[a], *same[b]));
        ++rep.pairs_checked;
      }
  }
  return rep;
}

} // namespace ufl
