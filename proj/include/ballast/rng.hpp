#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace ballast {

// Deterministic, platform-independent random streams.
//
// Trial k's stream is a pure function of (base_seed, k): no trial ever
// consumes another trial's draws, so adding trials or reordering workers
// never perturbs existing results. Doubles are built from the top 53 bits
// of the raw output, never through std::uniform_* (whose algorithms are
// implementation-defined).

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

// xoshiro256++ with splitmix64 state expansion.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t base_seed, std::uint64_t trial_index) {
    std::uint64_t h = detail::mix64(base_seed);
    std::uint64_t s = detail::mix64(h ^ (0x9e3779b97f4a7c15ULL * (trial_index + 1)));
    for (auto& w : state_) {
      s = detail::mix64(s);
      w = s;
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) {
      state_[0] = 0x9e3779b97f4a7c15ULL;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n), exactly unbiased (Lemire with rejection).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    std::uint64_t l = static_cast<std::uint64_t>(m);
    if (l < n) {
      const std::uint64_t floor = (0 - n) % n;
      while (l < floor) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        l = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

inline RngStream make_trial_rng(std::uint64_t base_seed, std::uint64_t trial_index) {
  return RngStream(base_seed, trial_index);
}

}  // namespace ballast
