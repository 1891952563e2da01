#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ufl/core.hpp"
#include "ufl/prf.hpp"

namespace ufl {

// Sketch indices are vectors of field elements (limbs below 2^61 - 1).
using Key = std::vector<std::uint64_t>;
using Payload = std::vector<std::int64_t>;

Key point_key(const GridPoint& p);
GridPoint key_point(const Key& k);

// Membership in sub-sampled sets. Levels are nested: depth(p) >= i iff p
// survives rate 2^-i, so one PRF evaluation serves every level.
int subsample_depth(std::uint64_t seed, std::uint64_t t, const GridPoint& p, int cap);

struct SubsampleFn {
  std::uint64_t seed = 0;
  std::uint64_t t = 0;
  int level = 0;

  bool member(const GridPoint& p) const { return level <= 0 || subsample_depth(seed, t, p, level) >= level; }
};

inline bool subsample_member(const GridPoint& p, const SubsampleFn& fn) { return fn.member(p); }

struct SketchConfig {
  int levels = 63;   // subsampling levels 0..levels-1
  int buckets = 16;  // 1-sparse cells per level
  int reps = 8;      // independent repetitions
  int key_width = 1; // limbs per key
  int payload_width = 1;
  std::uint64_t seed = 0;

  bool operator==(const SketchConfig&) const = default;
  // levels = ceil(log2 universe) + 2
  static int levels_for(int log2_universe) { return log2_universe + 2; }
};

// Largest magnitude of a single payload update; larger ones throw std::overflow_error.
inline constexpr std::int64_t kMaxPayloadDelta = std::int64_t{1} << 31;

enum class QueryStatus { ok, empty, fail };
std::string to_string(QueryStatus s);

struct L0Result {
  QueryStatus status = QueryStatus::empty;
  Key key;
  Payload payload; // exact; payload[0] is the frequency
};

// Shared hashing for one sketch seed: levels, cells, priorities and the
// random weights that make cells self-checking.
class SketchHasher {
public:
  explicit SketchHasher(const SketchConfig& cfg);

  std::uint64_t key_digest(const Key& k) const { return prf_.hash_words(k); }
  int level(int rep, std::uint64_t kd) const;
  int cell(int rep, int level, std::uint64_t kd) const;
  std::uint64_t priority(int rep, std::uint64_t kd) const { return reps_[rep](kd, 3); }
  std::uint64_t beta(std::uint64_t kd) const { return field::nonzero(prf_(kd, 4)); }
  std::uint64_t check(std::uint64_t kd) const { return field::nonzero(prf_(kd, 5)); }
  std::uint64_t rho(int j) const { return rho_[static_cast<std::size_t>(j)]; }
  // beta(k) * sum_j rho_j v_j, the weight an update adds to a cell
  std::uint64_t weight(std::uint64_t kd, std::span<const std::int64_t> v) const;
  const SketchConfig& config() const { return cfg_; }

private:
  SketchConfig cfg_;
  Prf prf_;
  std::vector<Prf> reps_;
  std::vector<std::uint64_t> rho_;
};

// Flat storage of the cells of one (rep, level) pair.
struct CellBlock {
  std::vector<std::uint64_t> f; // per cell: W, FP, KW[key_width]
  std::vector<std::int64_t> s;  // per cell: payload sums

  bool zero() const;
};

struct CellDecode {
  bool nonzero = false;
  bool ok = false;
  Key key;
  Payload payload;
};

// l0-sampler with vector payloads. Width 1 is the plain sampler; width 1+T
// carries T data counters next to the frequency. An index is present iff
// its payload is nonzero.
class L0Sketch {
public:
  explicit L0Sketch(const SketchConfig& cfg);

  void update(const Key& k, std::span<const std::int64_t> delta);
  void update(const Key& k, std::int64_t delta) { update(k, std::span<const std::int64_t>(&delta, 1)); }
  L0Result query() const;
  void merge(const L0Sketch& other);

  // number of nonzero cells at (rep, level) and whether all of them decode
  std::pair<int, bool> occupancy(int rep, int level) const;
  CellDecode decode(int rep, int level, int cell) const;
  int deepest_level(int rep) const; // -1 when the rep is empty

  bool is_zero() const;
  std::string serialize() const;
  static L0Sketch deserialize(const std::string& bytes);
  std::size_t space_bytes() const;
  const SketchConfig& config() const { return hasher_.config(); }

  bool operator==(const L0Sketch& o) const { return serialize() == o.serialize(); }

private:
  friend class TwoLevelL0;
  std::uint32_t slot(int rep, int level) const { return static_cast<std::uint32_t>(rep) << 8 | static_cast<std::uint32_t>(level); }
  CellBlock& block(int rep, int level);
  void apply(int rep, int level, int c, std::uint64_t kd, const Key& k, std::uint64_t w, std::span<const std::int64_t> v);

  SketchHasher hasher_;
  std::map<std::uint32_t, CellBlock> blocks_;
};

SketchConfig l0_config(int key_width, std::uint64_t seed);
SketchConfig l0_with_data_config(int key_width, int T, std::uint64_t seed);

struct TwoLevelResult {
  QueryStatus status = QueryStatus::empty;
  Key row;
  Key col;
  std::int64_t row_sum = 0;
};

// Row-level sampler whose per-row payload is (row count, column sampler of
// that row). All column samplers share one seed, so cells add linearly.
class TwoLevelL0 {
public:
  TwoLevelL0(const SketchConfig& rows, const SketchConfig& cols);

  void update(const Key& row, const Key& col, std::int64_t delta);
  TwoLevelResult query() const;
  void merge(const TwoLevelL0& other);

  bool is_zero() const;
  std::string serialize() const;
  static TwoLevelL0 deserialize(const std::string& bytes);
  std::size_t space_bytes() const;

  bool operator==(const TwoLevelL0& o) const { return serialize() == o.serialize(); }

private:
  L0Sketch rows_; // payload: row count
  SketchConfig col_cfg_;
  SketchHasher col_hasher_;
  std::map<std::uint64_t, L0Sketch> cols_; // (slot << 32 | cell) -> column sampler
};

struct DistinctEstimate {
  double value = 0;
  bool exact = false;
};

// Linear counting over nested levels, median over repetitions. Exact when a
// repetition's level 0 fully decodes.
class DistinctCounter {
public:
  static constexpr int kBuckets = 256;
  static constexpr int kReps = 5;
  // approximate answers are divided by this so they rarely exceed the truth
  static constexpr double kShrink = 1.25;

  // Counts keys whose payload vector (of the given width) is nonzero.
  DistinctCounter(int key_width, std::uint64_t seed, int payload_width = 1);
  static SketchConfig config(int key_width, std::uint64_t seed, int payload_width = 1);

  void update(const Key& k, std::int64_t delta) { sk_.update(k, delta); }
  void update(const Key& k, std::span<const std::int64_t> delta) { sk_.update(k, delta); }
  DistinctEstimate estimate() const;
  void merge(const DistinctCounter& o) { sk_.merge(o.sk_); }
  const L0Sketch& sketch() const { return sk_; }

private:
  L0Sketch sk_;
};

// Linear-counting estimate from occupancies per level (shared with replay).
DistinctEstimate distinct_from_occupancy(const std::vector<std::vector<std::pair<int, bool>>>& occ, int buckets);

// Invertible lookup table recovering up to about `capacity` nonzero entries.
class SparseRecovery {
public:
  SparseRecovery(std::size_t capacity, int key_width, std::uint64_t seed);

  void update(const Key& k, std::int64_t delta);
  // All (key, frequency) pairs, or nullopt when peeling gets stuck.
  std::optional<std::vector<std::pair<Key, std::int64_t>>> recover() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t space_bytes() const;

private:
  struct Cell {
    std::int64_t count = 0;
    std::uint64_t fp = 0;
    std::vector<std::uint64_t> ks;
  };
  std::size_t index(int h, std::uint64_t kd) const;

  std::size_t capacity_;
  int key_width_;
  Prf prf_;
  std::size_t per_table_;
  std::vector<Cell> cells_;
};

// Query answers computed from the aggregated frequency vector rather than
// from cells. A sketch is a linear function of that vector, so these agree
// with the streaming sketches except when a checksum falsely accepts a
// collided cell (probability about 2^-61 per cell).
L0Result l0_replay(const SketchConfig& cfg, const std::vector<std::pair<Key, Payload>>& support);
// Same rule over keys already known to be nonzero; returns the index of the pick.
std::pair<QueryStatus, std::size_t> l0_replay_pick(const SketchConfig& cfg, const std::vector<Key>& keys);

struct RowEntry {
  Key row;
  std::vector<std::pair<Key, std::int64_t>> cols;
};
TwoLevelResult two_level_replay(const SketchConfig& rows, const SketchConfig& cols, const std::vector<RowEntry>& support);

DistinctEstimate distinct_replay(int key_width, std::uint64_t seed, const std::vector<Key>& support);

} // namespace ufl
