#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace dipsmc {

// Stream tags keep the forward, backward and subsampling streams disjoint.
enum class StreamTag : std::uint64_t {
  forward_propose = 1,
  forward_resample = 2,
  backward_propose = 3,
  backward_resample = 4,
  subsample_forward = 5,
  subsample_backward = 6,
  simulation = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// xoshiro256** (Blackman and Vigna). A Mersenne twister costs a 312-word
/// state refresh on first use, which dominated runs that create one stream
/// per particle and time step; this one seeds in four splitmix64 steps.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0) noexcept {
    for (auto& w : s_) {
      seed += 0x9e3779b97f4a7c15ULL;
      w = splitmix64(seed);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t out = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

  bool operator==(const Xoshiro256&) const = default;

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
};

using Rng = Xoshiro256;

/// Independent engine for (seed, tag, time, index). Results never depend on
/// the order in which streams are created, so particle loops may run in any order.
inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t time = 0,
                       std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ time);
  h = splitmix64(h ^ index);
  return Rng(h);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace dipsmc
