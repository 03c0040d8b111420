#pragma once

#include <concepts>
#include <cstdint>
#include <random>

namespace sdewms {

/// Anything that hands out standard uniforms on [0,1) and standard normals.
/// Tests substitute scripted streams; production code uses Stream.
template <class S>
concept RandomStream = requires(S& s) {
  { s.uniform() } -> std::convertible_to<double>;
  { s.normal() } -> std::convertible_to<double>;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Mersenne-twister stream keyed by (seed, sub-stream index). Distinct indices
/// give statistically independent streams, so Monte Carlo path p can be
/// regenerated on any thread from (seed, p) alone.
class Stream {
 public:
  explicit Stream(std::uint64_t seed, std::uint64_t index = 0) {
    std::uint64_t state = seed ^ (0xD1B54A32D192ED03ULL * (index + 1));
    std::seed_seq seq{static_cast<std::uint32_t>(detail::splitmix64(state)),
                      static_cast<std::uint32_t>(detail::splitmix64(state)),
                      static_cast<std::uint32_t>(detail::splitmix64(state)),
                      static_cast<std::uint32_t>(detail::splitmix64(state)),
                      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sdewms
