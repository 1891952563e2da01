#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ufl/core.hpp"

namespace ufl {

enum class HashKind : std::uint8_t { grid = 1, face = 2, carve = 3 };

std::string to_string(HashKind k);
HashKind parse_hash_kind(const std::string& s);

struct HashParams {
  int d = 1;
  double ell = 1;
  double gamma = 1;
  double lambda = 1;
  std::uint64_t seed = 0;

  double eps() const { return ell / gamma; }
};

struct BucketId {
  HashKind kind = HashKind::grid;
  std::int32_t group = 0;
  std::vector<std::uint64_t> words;

  bool operator==(const BucketId&) const = default;
  auto operator<=>(const BucketId&) const = default;

  std::uint64_t digest() const;
  // digest reduced below 2^61 - 1, used as a sketch index
  std::uint64_t key() const;
};

struct BucketIdHash {
  std::size_t operator()(const BucketId& b) const { return static_cast<std::size_t>(b.digest()); }
};

class ConsistentHash {
public:
  virtual ~ConsistentHash() = default;

  virtual BucketId bucket(const RealPoint& x) const = 0;
  BucketId bucket(const GridPoint& x) const { return bucket(to_real(x)); }
  // Buckets of several points at once; constructions may share work across them.
  virtual std::vector<BucketId> bucket_all(const std::vector<RealPoint>& xs) const;

  // Exact image of the closed ball B(x, radius). Throws std::logic_error when
  // the construction has no structured enumeration.
  virtual std::vector<BucketId> enlarged(const RealPoint& x, double radius) const;
  virtual bool has_enumeration() const { return false; }

  virtual HashKind kind() const = 0;
  const HashParams& params() const { return params_; }

protected:
  explicit ConsistentHash(HashParams p) : params_(p) {}
  HashParams params_;
};

// Cubes of side ell/sqrt(d), half-open and lower-inclusive. Lambda = 2^d.
std::unique_ptr<ConsistentHash> make_grid_hash(int d, double ell);

double face_gamma(int d);
// Smallest gap for which the face construction's separation holds at this ell.
double face_min_gamma(int d, double ell);
// Face decomposition with gap Gamma (default 10 d^1.5) and consistency d+1.
std::unique_ptr<ConsistentHash> make_face_hash(int d, double ell, double gamma = 0);

inline constexpr int kCarveMaxDim = 10;
double carve_lambda(int d, double gamma);
std::uint64_t carve_center_budget(int d);
// Ball carving over shifted lattices 4w Z^d + v_i, w = ell/2.
std::unique_ptr<ConsistentHash> make_ball_carving_hash(int d, double ell, double gamma, std::uint64_t seed);

// gamma 0 selects the construction default (ball carving: 8).
std::unique_ptr<ConsistentHash> make_hash(HashKind kind, int d, double ell, double gamma, std::uint64_t seed);

// Cube side used by the face hash: the largest power of two <= ell/sqrt(d).
double face_cube_side(int d, double ell);

struct HashVerifyReport {
  double max_diameter = 0;        // over same-bucket sampled pairs
  std::size_t max_consistency = 0; // max |phi(S)| over sampled S with Diam(S) <= ell/Gamma
  std::size_t max_enumerated = 0;  // max |phi(B(x, ell/(2 Gamma)))| when enumeration exists
  std::size_t pairs_checked = 0;
  std::size_t sets_checked = 0;
  double ell = 0;
  double gamma = 0;
  double lambda = 0;
};

HashVerifyReport verify_hash(const ConsistentHash& h, std::size_t trials, std::uint64_t seed);

} // namespace ufl
