#pragma once

#include <cstddef>
#include <vector>

#include "ufl/core.hpp"

namespace ufl {

// r_p for every point, in the order of the input set.
std::vector<double> compute_rp(const std::vector<GridPoint>& P, double f);
double sum_rp(const std::vector<GridPoint>& P, double f);

// |sum_{x in B(p,r)} (r - dist(p,x)) - f|
double rp_residual(const std::vector<GridPoint>& P, const GridPoint& p, double r, double f);

// Level j with r in (2^-j f, 2^-j+1 f]; j >= 1 whenever r <= f.
int rp_level(double r, double f);

// Streaming estimate of r_p from ball counts |P ∩ B(p, 2^-j f)|, j = 0..L.
class BallCounter {
public:
  BallCounter(GridPoint center, double f, int L);

  void update(const GridPoint& x, int sign);
  std::int64_t count(int j) const; // |P ∩ B(center, 2^-j f)|
  int j0() const;
  double estimate() const; // 2^(-j0+1) f
  const GridPoint& center() const { return center_; }

private:
  GridPoint center_;
  double f_;
  int L_;
  std::vector<std::int64_t> hist_; // hist_[j]: points whose tightest ball index is j
};

struct BallEstimate {
  int j0 = 0;
  double rhat = 0;
};

BallEstimate estimate_rp_ball_counting(const Stream& s, const GridPoint& p);

struct MpSolution {
  std::vector<GridPoint> facilities; // in opening order
  std::vector<std::size_t> assignment; // per input point, index into facilities
  double cost = 0;
};

MpSolution mp_facilities(const std::vector<GridPoint>& P, double f, const std::vector<double>& rp);
MpSolution mp_solve(const std::vector<GridPoint>& P, double f);

double ufl_cost(const std::vector<GridPoint>& P, const std::vector<RealPoint>& F, double f);
double ufl_cost(const std::vector<GridPoint>& P, const std::vector<GridPoint>& F, double f);

struct Cluster {
  std::vector<std::size_t> members; // indices into P
  std::size_t facility = 0;
  int level = 0;
  double diameter = 0;
};

struct MpClustering {
  std::vector<Cluster> clusters;
  double c_cl = 0; // max |C| * Diam(C) / f over clusters with positive diameter
};

MpClustering extended_mp_clustering(const std::vector<GridPoint>& P, double f, const std::vector<double>& rp,
                                    const MpSolution& mp);

inline constexpr std::size_t kMaxCandidates = 24;

// Minimum UFL cost over nonempty facility subsets of `candidates` (exhaustive).
double exact_opt_candidates(const std::vector<GridPoint>& P, double f, const std::vector<RealPoint>& candidates);

} // namespace ufl
