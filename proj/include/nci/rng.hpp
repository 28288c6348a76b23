#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace nci {

// Counter-based deterministic random stream. Every draw is a pure function of
// (seed, counter), so a stream is identified by two integers and can be
// replayed or forked without hidden state. The standard <random>
// distributions are implementation-defined, so all shaping (uniform, normal,
// shuffle) is done here explicitly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // splitmix64 finalizer over seed + counter * golden ratio.
  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n). Modulo bias is negligible for the small n used
  // here (n << 2^64).
  std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller; consumes two draws.
  double normal() {
    double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Deterministic substream: mixes the tag into a fresh seed. Used to give
  // recursive/parallel work units independent streams that do not depend on
  // traversal order.
  RngStream derive(std::uint64_t tag) const {
    std::uint64_t z = seed_ ^ (0x9e3779b97f4a7c15ULL + tag * 0xc2b2ae3d27d4eb4fULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return RngStream(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

// 64-bit FNV-1a over bytes, optionally seeded. Used wherever a deterministic
// string hash is needed (std::hash is implementation-defined).
inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace nci
