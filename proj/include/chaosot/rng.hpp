#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace chaosot {

/// Counter-based generator: the k-th draw is a pure function of (seed, k),
/// so streams are reproducible bit-for-bit on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Fisher-Yates shuffle with a CounterRng (std::shuffle is not portable).
void shuffle(std::vector<std::size_t>& items, CounterRng& rng);

/// k distinct indices from [0, n), uniformly at random, in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, CounterRng& rng);

}  // namespace chaosot
