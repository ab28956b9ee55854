#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace surveymech {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for run `run` under `master`; independent of how runs are scheduled.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run) noexcept;

/// mt19937_64 with hand-rolled draws so streams match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 bits.
  double uniform01() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, bound), rejection sampled. bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;
  bool bernoulli(double p) noexcept { return uniform01() < p; }
  /// Standard normal by Box-Muller.
  double normal() noexcept;

  std::uint64_t next() noexcept { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle of the identity permutation of size n.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace surveymech
