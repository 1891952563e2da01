#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ufl/core.hpp"
#include "ufl/hashing.hpp"
#include "ufl/sketch.hpp"

namespace ufl {

struct EstimatorOptions {
  HashKind hash = HashKind::face;
  double gamma = 0;     // 0: construction default
  std::size_t m = 0;    // samples (two-pass, random-order) or samplers per level (one-pass); 0: default
  int T = 0;            // one-pass counters per bucket; 0: default
  double c = 20;        // tester threshold
  std::size_t K = 4096; // one-pass sparse-recovery capacity; 0 disables the fallback
  int retries = 3;      // fresh attempts for a failed sampler
  bool replay = true;   // evaluate sketches from the aggregated frequency vector
  bool trace = false;   // record sampled buckets (one-pass)
};

std::size_t default_m_sampling(const Instance& inst);
std::size_t default_m_one_pass(double gamma, double lambda);
int default_T(const Instance& inst);

// Hash used at a level with diameter bound `ell`. A face-hash gap below the
// smallest valid one for the dimension is raised to that value.
std::unique_ptr<ConsistentHash> make_level_hash(const Instance& inst, double ell, const EstimatorOptions& opt,
                                                std::uint64_t seed);

struct SampleResult {
  QueryStatus status = QueryStatus::empty; // empty: NIL
  GridPoint point;
  double prob_estimate = 0;
  int level = 0;
  std::int64_t bucket_size = 0;
  double bucket_count = 0;
  bool bucket_count_exact = false;

  bool nil() const { return status != QueryStatus::ok; }
};

// Seeds of one level sampler; every component derives from `seed`.
struct LevelSeeds {
  std::uint64_t subsample, rows, cols, distinct;
  explicit LevelSeeds(std::uint64_t seed);
};

SketchConfig level_row_config(std::uint64_t seed);
SketchConfig level_col_config(const Instance& inst, std::uint64_t seed);

// Streaming sampler for one level: subsample at rate 2^-i, hash, then a
// two-level l0-sampler over (bucket, point) and a distinct counter over buckets.
class LevelSampler {
public:
  LevelSampler(const Instance& inst, int level, std::uint64_t seed, const EstimatorOptions& opt);

  void update(const StreamUpdate& u);
  SampleResult query() const;
  std::size_t space_bytes() const;

private:
  Instance inst_;
  int level_;
  LevelSeeds seeds_;
  SubsampleFn sub_;
  std::unique_ptr<ConsistentHash> hash_;
  TwoLevelL0 two_;
  DistinctCounter distinct_;
};

SampleResult level_sample(const Stream& s, int i, std::uint64_t seed, const EstimatorOptions& opt = {});

// Levels used by the mixture: 1..min(L, floor(log2 n) + 1).
int effective_levels(const Instance& inst, std::size_t n);
SampleResult importance_sample(const Stream& s, std::uint64_t seed, const EstimatorOptions& opt = {});

struct LevelReport {
  int level = 0;
  double z = 0;
  std::size_t samples = 0;
  std::size_t failures = 0;
  double support = 0; // estimated number of nonempty buckets
};

struct TraceEntry {
  int level = 0;
  std::uint64_t bucket = 0; // BucketId digest
  double c_hat = 0;
  std::int64_t n_a = 0;
  bool accepted = false;
};

struct SampleRecord {
  bool nil = true;
  GridPoint point;
  int level = 0;
  double prob = 0;
  double rhat = 0;
  double term = 0;
};

struct EstimateReport {
  std::string algo;
  double estimate = 0;
  double mp_cost = 0; // offline reference only
  std::uint64_t seed = 0;
  std::size_t m = 0;
  int T = 0;
  double c = 0;
  double gamma = 0;
  double lambda = 0;
  std::size_t K = 0;
  std::size_t samples = 0;
  std::size_t failures = 0;
  bool fallback = false;
  bool unreliable = false;
  std::size_t space_bytes = 0;
  std::vector<LevelReport> levels;
  std::vector<SampleRecord> sample_records;
  std::vector<TraceEntry> trace;
};

// ---- two-pass

struct TwoPassState {
  Instance inst;
  std::uint64_t seed = 0;
  std::size_t m = 0;
  std::size_t failures = 0;
  std::size_t space_bytes = 0;
  std::vector<SampleResult> samples;
};

TwoPassState two_pass_first(const Stream& s, std::size_t m, std::uint64_t seed, const EstimatorOptions& opt = {});
EstimateReport two_pass_second(const Stream& s, const TwoPassState& st);
EstimateReport two_pass_estimate(const Stream& s, std::size_t m, std::uint64_t seed, const EstimatorOptions& opt = {});

void save_two_pass_state(const std::string& path, const TwoPassState& st);
TwoPassState load_two_pass_state(const std::string& path);

// ---- random order

EstimateReport random_order_estimate(const Stream& s, std::size_t m, std::uint64_t seed, const EstimatorOptions& opt = {});

// ---- one pass

std::vector<BucketId> enumerate_enlarged_buckets(const GridPoint& p, const ConsistentHash& phi, double eps);

// Streaming state of the one-pass estimator with every sampler materialized.
class OnePassSketch {
public:
  OnePassSketch(const Instance& inst, std::uint64_t seed, const EstimatorOptions& opt);
  ~OnePassSketch();
  OnePassSketch(OnePassSketch&&) noexcept;

  void update(const StreamUpdate& u);
  EstimateReport query() const;
  std::size_t space_bytes() const;

private:
  struct Level;
  Level& level(int i);

  Instance inst_;
  std::uint64_t seed_;
  EstimatorOptions opt_;
  double gamma_ = 0, lambda_ = 0;
  std::size_t m_ = 0;
  int T_ = 0;
  std::vector<std::unique_ptr<Level>> levels_;
  std::optional<SparseRecovery> recovery_;
};

EstimateReport one_pass_estimate(const Stream& s, std::uint64_t seed, const EstimatorOptions& opt = {});
// The hash phi_i a one-pass run with this seed uses at level i (diameter 2^-i f / 10).
std::unique_ptr<ConsistentHash> one_pass_level_hash(const Instance& inst, std::uint64_t seed, int i,
                                                    const EstimatorOptions& opt = {});

// ---- offline reference

EstimateReport offline_estimate(const Stream& s);

} // namespace ufl
