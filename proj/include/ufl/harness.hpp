#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ufl/core.hpp"
#include "ufl/estimators.hpp"

namespace ufl {

enum class GenKind { uniform, clustered, example_hard, bhm };
std::string to_string(GenKind k);
GenKind parse_gen_kind(const std::string& s);

struct GeneratorSpec {
  GenKind kind = GenKind::uniform;
  std::size_t n = 0;
  int d = 2;
  std::int64_t delta = 1024; // example_hard: 0 picks the smallest feasible grid
  double f = 1.0;
  int k = 5;                 // clustered: number of centers
  double radius = 0;         // clustered: 0 means delta / 100
  bool bhm_yes = true;
  std::uint64_t seed = 0;
  bool shuffled = false;
  double deletion_rate = 0;  // fraction of inserted points that are later deleted
};

// n distinct uniform grid points.
Stream gen_uniform(std::size_t n, int d, std::int64_t delta, double f, std::uint64_t seed);
// n distinct points within `radius` of k uniform centers.
Stream gen_clustered(std::size_t n, int d, std::int64_t delta, double f, int k, double radius, std::uint64_t seed);

// P1: sqrt(n) points pairwise at distance >= 1; P2: the rest, pairwise within
// about 1/n; one grid unit is 1/(10 n sqrt(d)) and f = 1 in real units.
struct HardInstance {
  Stream stream;
  std::vector<int> r_class; // per point of stream.updates: 1 for P1, 2 for P2
  double unit = 0;          // real length of one grid unit
  std::size_t p1 = 0, p2 = 0;
};
HardInstance gen_example_hard(std::size_t n, std::uint64_t seed, std::int64_t delta = 0);

struct BhmInstance {
  int n = 0;
  bool yes = true;
  std::vector<int> x;                          // Alice's 2n bits
  std::vector<std::pair<int, int>> matching;   // n edges on [2n]
  std::vector<int> w;                          // one parity bit per edge
  std::int64_t scale = 0;                      // grid units per unit length
  std::int64_t offset = 0;                     // grid coordinate of the real value 0
  Stream stream;                               // f = 2 in real units
  std::vector<GridPoint> bob;                  // Bob's 2n clients
  double alice_slack = 0;                      // Alice's clients' total distance to their centers (real units)

  // real-unit coordinates of s_i^b and of a grid point
  RealPoint s_point(int i, int b) const;
  RealPoint to_unit(const GridPoint& p) const;
};
BhmInstance gen_bhm_instance(int n, bool yes, std::uint64_t seed);

// s_i^b, t_{i,j}^b and the averages of 2..4 Bob clients, in real units.
std::vector<RealPoint> bhm_candidates(const BhmInstance& b);
// Optimum over the candidate set, in real units, with a facility at every
// loaded s_i^{x_i}; a dynamic program over subsets of Bob's clients.
double bhm_candidate_optimum(const BhmInstance& b);
// Same optimum by exhaustive search (candidate count must be <= kMaxCandidates).
double bhm_exhaustive_optimum(const BhmInstance& b);

Stream shuffle_order(const Stream& s, std::uint64_t seed);
// Adds decoy points that are inserted and later deleted, so that `rate` of
// all inserted points end up deleted; the live set is unchanged.
Stream with_deletions(const Stream& s, double rate, std::uint64_t seed);

Stream generate(const GeneratorSpec& spec);

struct ExperimentRow {
  std::string instance;
  std::string algo;
  std::uint64_t seed = 0;
  double estimate = 0;
  double sum_rp = 0;
  double mp_cost = 0;
  double ratio = 0; // estimate / sum_rp
  double seconds = 0;
  std::size_t space_bytes = 0;
  bool unreliable = false;
  bool fallback = false;
};

struct ExperimentSummary {
  std::string instance;
  std::string algo;
  std::size_t runs = 0;
  double q10 = 0, q50 = 0, q90 = 0; // ratio quantiles
  std::size_t unreliable = 0;
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentSummary> summary;
};

double quantile(std::vector<double> v, double q);

// Every (spec, algo, repetition) triple; random-order runs see a fresh
// shuffle per repetition.
ExperimentTable run_experiment(const std::vector<GeneratorSpec>& specs, const std::vector<std::string>& algos,
                               std::size_t repetitions, std::uint64_t seed, const EstimatorOptions& opt = {});

EstimateReport run_algo(const std::string& algo, const Stream& s, std::uint64_t seed, const EstimatorOptions& opt);

} // namespace ufl
