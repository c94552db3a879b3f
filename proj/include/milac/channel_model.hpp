#pragma once

// Seedable i.i.d. Rayleigh channel generation. Every draw is a pure function
// of (master_seed, trial_index, counter), so trials can be produced in any
// order or on any thread and still be bit-identical.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "milac/core.hpp"

namespace milac {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Key for an independent substream; changing any argument yields an
/// unrelated stream.
constexpr std::uint64_t derive_stream_key(std::uint64_t master_seed, std::uint64_t index,
                                          std::uint64_t domain = 0) noexcept {
  std::uint64_t k = mix64(master_seed + 0x9e3779b97f4a7c15ULL);
  k = mix64(k ^ (index * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
  return mix64(k ^ (domain * 0x8cb92ba72f3d8dd7ULL + 0x2545f4914f6cdd1dULL));
}

/// Counter-based generator: output i is mix64(key + (i + 1) * golden).
/// Equivalent to SplitMix64 started at `key`, but addressable by counter.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  constexpr std::uint64_t at(std::uint64_t index) const noexcept {
    return mix64(key_ + (index + 1) * 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t next_u64() noexcept { return at(counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Pair of independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

struct ChannelEnsembleSpec {
  std::size_t n_rx = 0;
  std::size_t n_tx = 0;
  std::size_t n_trials = 1;
  std::uint64_t master_seed = 0;
};

/// N_R x N_T matrix with entries (a + jb)/sqrt(2), a and b standard normal,
/// so E|h|^2 = 1. Entry (i, k) consumes the (i * N_T + k)-th normal pair of
/// the trial's substream, filled row by row.
inline ComplexMatrix rayleigh_channel(const ChannelEnsembleSpec& spec, std::size_t trial_index) {
  if (spec.n_rx == 0 || spec.n_tx == 0) {
    throw error(errc::invalid_argument, "channel dimensions must be positive");
  }
  if (trial_index >= spec.n_trials) {
    throw error(errc::index_out_of_range, "trial index " + std::to_string(trial_index) +
                                              " outside [0, " + std::to_string(spec.n_trials) + ")");
  }
  CounterRng rng(derive_stream_key(spec.master_seed, trial_index));
  const auto rows = static_cast<Eigen::Index>(spec.n_rx);
  const auto cols = static_cast<Eigen::Index>(spec.n_tx);
  ComplexMatrix h(rows, cols);
  const double scale = std::sqrt(0.5);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto [a, b] = rng.normal_pair();
      h(i, k) = complex(scale * a, scale * b);
    }
  }
  return h;
}

}  // namespace milac
