#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace flowsentinel {

// Seeded generator with platform-independent output.
//
// The standard engines are fully specified, but the standard distributions
// and std::shuffle are not, so every derived quantity here is computed from
// raw 64-bit draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound). bound must be positive.
  std::size_t below(std::size_t bound);
  // Standard normal via Box-Muller (one draw per call, second value discarded).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace flowsentinel
