#include "ufl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ufl {

namespace {

// Solves sum_{d_i <= r} (r - d_i) = f over sorted distances (d[0] = 0 for p itself).
double solve_rp(const std::vector<double>& d, double f) {
  double prefix = 0;
  const std::size_t n = d.size();
  double best = f;
  double best_violation = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= n; ++k) {
    prefix += d[k - 1];
    double r = (f + prefix) / static_cast<double>(k);
    double lo = d[k - 1];
    double hi = k < n ? d[k] : std::numeric_limits<double>::infinity();
    if (r >= lo && r <= hi) return r;
    double v = r < lo ? lo - r : r - hi;
    if (v < best_violation) best_violation = v, best = r;
  }
  return best;
}

} // namespace

std::vector<double> compute_rp(const std::vector<GridPoint>& P, double f) {
  if (P.empty()) throw std::invalid_argument("compute_rp needs a nonempty point set");
  if (!(f > 0)) throw std::invalid_argument("opening cost must be positive");
  std::vector<double> out(P.size());
  std::vector<double> d(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    for (std::size_t j = 0; j < P.size(); ++j) d[j] = distance(P[i], P[j]);
    std::sort(d.begin(), d.end());
    out[i] = solve_rp(d, f);
  }
  return out;
}

double sum_rp(const std::vector<GridPoint>& P, double f) {
  auto r = compute_rp(P, f);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

double rp_residual(const std::vector<GridPoint>& P, const GridPoint& p, double r, double f) {
  double s = 0;
  for (const auto& x : P) {
    double t = distance(p, x);
    if (t <= r) s += r - t;
  }
  return std::abs(s - f);
}

int rp_level(double r, double f) {
  int j = static_cast<int>(std::floor(std::log2(f / r))) + 1;
  while (r <= std::ldexp(f, -j)) ++j;
  while (j > -1100 && r > std::ldexp(f, -j + 1)) --j;
  return j;
}

BallCounter::BallCounter(GridPoint center, double f, int L)
    : center_(std::move(center)), f_(f), L_(std::min(L, 1000)), hist_(static_cast<std::size_t>(L_ + 1), 0) {}

void BallCounter::update(const GridPoint& x, int sign) {
  double dist = distance(center_, x);
  if (dist > f_) return;
  int j;
  if (dist == 0) {
    j = L_;
  } else {
    j = std::clamp(static_cast<int>(std::floor(std::log2(f_ / dist))), 0, L_);
    while (j < L_ && dist <= std::ldexp(f_, -(j + 1))) ++j;
    while (j > 0 && dist > std::ldexp(f_, -j)) --j;
  }
  hist_[static_cast<std::size_t>(j)] += sign;
}

std::int64_t BallCounter::count(int j) const {
  std::int64_t c = 0;
  for (int k = std::max(j, 0); k <= L_; ++k) c += hist_[static_cast<std::size_t>(k)];
  return c;
}

int BallCounter::j0() const {
  std::int64_t c = 0;
  int best = 0;
  // counts are suffix sums; scan from the top
  for (int j = L_; j >= 0; --j) {
    c += hist_[static_cast<std::size_t>(j)];
    if (j < 63 && c >= (std::int64_t{1} << j)) {
      best = j;
      break;
    }
  }
  return best;
}

double BallCounter::estimate() const { return std::ldexp(f_, -j0() + 1); }

BallEstimate estimate_rp_ball_counting(const Stream& s, const GridPoint& p) {
  auto rep = validate_stream(s.updates);
  if (!rep.ok) throw std::invalid_argument("invalid stream at update " + std::to_string(rep.index));
  BallCounter bc(p, s.inst.f, s.inst.L());
  for (const auto& u : s.updates) bc.update(u.point, u.sign);
  return {bc.j0(), bc.estimate()};
}

MpSolution mp_facilities(const std::vector<GridPoint>& P, double f, const std::vector<double>& rp) {
  if (rp.size() != P.size()) throw std::invalid_argument("r_p table does not match the point set");
  MpSolution sol;
  if (P.empty()) return sol;
  std::vector<std::size_t> order(P.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rp[a] != rp[b]) return rp[a] < rp[b];
    return P[a] < P[b];
  });
  for (std::size_t idx : order) {
    bool covered = false;
    for (const auto& q : sol.facilities)
      if (distance(P[idx], q) <= 2 * rp[idx]) {
        covered = true;
        break;
      }
    if (!covered) sol.facilities.push_back(P[idx]);
  }
  sol.assignment.resize(P.size());
  double conn = 0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sol.facilities.size(); ++k) {
      double t = distance(P[i], sol.facilities[k]);
      if (t < best) best = t, sol.assignment[i] = k;
    }
    conn += best;
  }
  sol.cost = conn + f * static_cast<double>(sol.facilities.size());
  return sol;
}

MpSolution mp_solve(const std::vector<GridPoint>& P, double f) {
  if (P.empty()) return {};
  return mp_facilities(P, f, compute_rp(P, f));
}

namespace {
template <class F>
double cost_impl(const std::vector<GridPoint>& P, const std::vector<F>& facilities, double f) {
  if (P.empty()) return f * static_cast<double>(facilities.size());
  if (facilities.empty()) throw std::invalid_argument("no facilities for a nonempty point set");
  double s = 0;
  for (const auto& p : P) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : facilities) best = std::min(best, distance(p, q));
    s += best;
  }
  return s + f * static_cast<double>(facilities.size());
}
} // namespace

double ufl_cost(const std::vector<GridPoint>& P, const std::vector<RealPoint>& F, double f) {
  return cost_impl(P, F, f);
}
double ufl_cost(const std::vector<GridPoint>& P, const std::vector<GridPoint>& F, double f) {
  return cost_impl(P, F, f);
}

MpClustering extended_mp_clustering(const std::vector<GridPoint>& P, double f, const std::vector<double>& rp,
                                    const MpSolution& mp) {
  MpClustering out;
  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < P.size(); ++i) groups[{mp.assignment.at(i), rp_level(rp[i], f)}].push_back(i);
  for (auto& [key, members] : groups) {
    auto [fac, j] = key;
    std::size_t chunk = j >= 62 ? std::numeric_limits<std::size_t>::max()
                                : static_cast<std::size_t>(std::int64_t{1} << std::max(j, 0));
    for (std::size_t s = 0; s < members.size(); s += chunk) {
      Cluster c;
      c.facility = fac;
      c.level = j;
      std::size_t e = members.size() - s < chunk ? members.size() : s + chunk;
      c.members.assign(members.begin() + static_cast<std::ptrdiff_t>(s), members.begin() + static_cast<std::ptrdiff_t>(e));
      for (std::size_t a = 0; a < c.members.size(); ++a)
        for (std::size_t b = a + 1; b < c.members.size(); ++b)
          c.diameter = std::max(c.diameter, distance(P[c.members[a]], P[c.members[b]]));
      if (c.diameter > 0) out.c_cl = std::max(out.c_cl, static_cast<double>(c.members.size()) * c.diameter / f);
      out.clusters.push_back(std::move(c));
    }
  }
  return out;
}

double exact_opt_candidates(const std::vector<GridPoint>& P, double f, const std::vector<RealPoint>& candidates) {
  if (candidates.size() > kMaxCandidates)
    throw std::invalid_argument("exact_opt_candidates refuses more than " + std::to_string(kMaxCandidates) +
                                " candidates");
  if (candidates.empty()) {
    if (P.empty()) return 0;
    throw std::invalid_argument("no candidates for a nonempty point set");
  }
  const std::size_t k = candidates.size(), n = P.size();
  std::vector<std::vector<double>> D(k, std::vector<double>(n));
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < n; ++i) D[c][i] = distance(P[i], candidates[c]);
  // best_rest[c][i]: min over candidates c.. of D[.][i], for the branch-and-bound lower bound
  std::vector<std::vector<double>> best_rest(k + 1, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  for (std::size_t c = k; c-- > 0;)
    for (std::size_t i = 0; i < n; ++i) best_rest[c][i] = std::min(best_rest[c + 1][i], D[c][i]);

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cur(k + 1, std::vector<double>(n, std::numeric_limits<double>::infinity()));
  // depth-first over include/exclude decisions
  auto rec = [&](auto&& self, std::size_t c, std::size_t opened) -> void {
    const auto& m = cur[c];
    double lb = f * static_cast<double>(std::max<std::size_t>(opened, 1));
    double conn = 0;
    bool complete = true;
    for (std::size_t i = 0; i < n; ++i) {
      double v = std::min(m[i], best_rest[c][i]);
      lb += v;
      if (!std::isfinite(m[i])) complete = false;
      else conn += m[i];
    }
    if (lb >= best) return;
    if (opened > 0 && complete) best = std::min(best, conn + f * static_cast<double>(opened));
    if (c == k) return;
    auto& next = cur[c + 1];
    for (std::size_t i = 0; i < n; ++i) next[i] = std::min(m[i], D[c][i]);
    self(self, c + 1, opened + 1);
    next = m;
    self(self, c + 1, opened);
  };
  rec(rec, 0, 0);
  return best;
}

} // namespace ufl
