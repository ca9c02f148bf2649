#pragma once

// Portable, seedable randomness.
//
// All sampling in the library draws from Rng, a thin wrapper over
// std::mt19937_64 (whose output sequence is fixed by the C++ standard).
// Integer draws use rejection sampling instead of the implementation-defined
// std::uniform_int_distribution, so results are identical across standard
// libraries and platforms. Each consumer derives its own child seed from the
// run seed and a purpose tag with derive_seed().

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace ordprobe {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Child seed for (seed, purpose, index):
/// splitmix64(splitmix64(splitmix64(seed) ^ fnv1a64(purpose)) ^ index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index = 0) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform real in [0, 1) with 53 bits of precision.
  double uniform();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ordprobe
