#pragma once

#include <cmath>
#include <cstdint>

namespace colactc {

// Deterministic PRNG used everywhere in this project: SplitMix64
// (Vigna, 2015; public domain). One 64-bit state word advanced by the
// golden-ratio increment, output scrambled by two xor-multiply rounds:
//
//   state += 0x9E3779B97F4A7C15
//   z  = state
//   z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   out = z ^ (z >> 31)
//
// Derived quantities are fixed conventions so that any implementation
// language reproduces identical streams:
//   below(n):  (next_u64() * n) >> 64 in 128-bit arithmetic (Lemire).
//   real():    (next_u64() >> 11) * 2^-53, uniform in [0, 1).
//   normal():  Box-Muller cosine branch, u1 in (0, 1], u2 in [0, 1):
//              sqrt(-2 ln u1) * cos(2 pi u2). One draw per call, the
//              sine branch is never used.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal draw.
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = real();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

// Stable substream derivation: one SplitMix64 output round applied to
// seed + (tag + 1) * golden increment. Used to give independent seeds to
// the generator's prototype table, sentence stream, shuffles, etc.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + (tag + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace colactc
