#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spnn {

// File or stream content that cannot be parsed. Carries the byte offset of
// the first offending byte when known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset >= 0
                               ? what + " (at byte " + std::to_string(offset) + ")"
                               : what),
        offset_(offset) {}

  std::int64_t offset() const noexcept { return offset_; }

 private:
  std::int64_t offset_;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based PRNG: rand_at(key, i) is a pure function of (key, i), so
// independent streams never share state and evaluation order is free.
inline std::uint64_t rand_at(std::uint64_t key, std::uint64_t counter) noexcept {
  return mix64(key + counter * 0x9e3779b97f4a7c15ull);
}

template <typename T>
T uniform01(std::uint64_t bits) noexcept;

// [0,1) with 24 random mantissa bits.
template <>
inline float uniform01<float>(std::uint64_t bits) noexcept {
  return static_cast<float>(bits >> 40) * (1.0f / 16777216.0f);
}

// [0,1) with 53 random mantissa bits.
template <>
inline double uniform01<double>(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
}

// Sequential view over a counter stream.
struct CounterRng {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  explicit CounterRng(std::uint64_t k, std::uint64_t start = 0)
      : key(k), counter(start) {}

  std::uint64_t next() noexcept { return rand_at(key, counter++); }

  template <typename T = double>
  T next01() noexcept {
    return uniform01<T>(next());
  }

  // Uniform integer in [0, bound). Modulo bias is irrelevant at our scales.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    return next() % bound;
  }
};

}  // namespace spnn
