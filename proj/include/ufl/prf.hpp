#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

namespace ufl {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Keyed pseudorandom function on tuples of 64-bit words.
class Prf {
public:
  constexpr explicit Prf(std::uint64_t key = 0) : key_(mix64(key ^ 0x5851f42d4c957f2dULL)) {}

  constexpr std::uint64_t operator()(std::uint64_t a) const { return mix64(key_ ^ mix64(a)); }
  constexpr std::uint64_t operator()(std::uint64_t a, std::uint64_t b) const {
    return mix64(mix64(key_ ^ mix64(a)) ^ b);
  }
  constexpr std::uint64_t operator()(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return mix64(mix64(mix64(key_ ^ mix64(a)) ^ b) ^ c);
  }
  std::uint64_t hash_words(std::span<const std::uint64_t> w) const {
    std::uint64_t h = mix64(key_ ^ w.size());
    for (std::uint64_t x : w) h = mix64(h ^ x);
    return h;
  }

  // Keyed sub-stream: a new PRF whose outputs are independent of this one's.
  constexpr Prf derive(std::uint64_t tag) const { return Prf((*this)(tag, 0x6a09e667f3bcc909ULL)); }
  constexpr std::uint64_t key() const { return key_; }

private:
  std::uint64_t key_;
};

// 64-bit digest of an integer vector (fixed public key).
inline std::uint64_t digest(std::span<const std::int64_t> v) {
  std::uint64_t h = mix64(0x243f6a8885a308d3ULL ^ v.size());
  for (std::int64_t x : v) h = mix64(h ^ static_cast<std::uint64_t>(x));
  return h;
}

// Geometric level of `x` under `prf`: the number of leading zero bits of the
// PRF output stream (seeded by `x`), capped at `cap`. Pr[level >= i] = 2^-i.
inline int geometric_level(const Prf& prf, std::uint64_t x, std::uint64_t tag, int cap) {
  int z = 0;
  for (std::uint64_t word = 0; z < cap; ++word) {
    std::uint64_t h = prf(x, tag, word);
    if (h != 0) {
      z += std::countl_zero(h);
      break;
    }
    z += 64;
  }
  return z < cap ? z : cap;
}

// Arithmetic modulo the Mersenne prime 2^61 - 1.
namespace field {

inline constexpr std::uint64_t P = (std::uint64_t{1} << 61) - 1;

constexpr std::uint64_t reduce(std::uint64_t x) {
  x = (x & P) + (x >> 61);
  return x >= P ? x - P : x;
}
constexpr std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a + b;
  return s >= P ? s - P : s;
}
constexpr std::uint64_t sub(std::uint64_t a, std::uint64_t b) { return a >= b ? a - b : a + P - b; }
constexpr std::uint64_t neg(std::uint64_t a) { return a == 0 ? 0 : P - a; }
constexpr std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 t = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(t) & P;
  std::uint64_t hi = static_cast<std::uint64_t>(t >> 61);
  return reduce(lo + hi);
}
constexpr std::uint64_t from_signed(std::int64_t v) {
  return v >= 0 ? reduce(static_cast<std::uint64_t>(v)) : neg(reduce(static_cast<std::uint64_t>(-(v + 1)) + 1));
}
inline std::uint64_t pow(std::uint64_t a, std::uint64_t e) {
  std::uint64_t r = 1;
  while (e) {
    if (e & 1) r = mul(r, a);
    a = mul(a, a);
    e >>= 1;
  }
  return r;
}
inline std::uint64_t inv(std::uint64_t a) { return pow(a, P - 2); }

// Nonzero field element derived from a hash.
constexpr std::uint64_t nonzero(std::uint64_t h) {
  std::uint64_t r = reduce(h >> 3);
  return r == 0 ? 1 : r;
}

} // namespace field

} // namespace ufl
