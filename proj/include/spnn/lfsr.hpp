#pragma once

#include <cstdint>

namespace spnn {

// maximal: period 2^nb - 1, the zero state is unreachable.
// debruijn: the zero state is spliced into the cycle, period 2^nb.
enum class LfsrMode : std::uint8_t { maximal = 0, debruijn = 1 };

// Smallest and largest register width with a shipped maximal tap set.
inline constexpr int kMinLfsrWidth = 2;
inline constexpr int kMaxLfsrWidth = 24;

// Maximal-period tap set for the given width, as a bitmask with bit (t-1)
// set for a tap at 1-indexed position t. Throws for widths outside
// [kMinLfsrWidth, kMaxLfsrWidth].
std::uint32_t standard_taps(int width_bits);

// Fibonacci shift register: the feedback bit is the XOR of the tapped state
// bits and shifts in at the low end. In debruijn mode the all-zero state is
// part of the cycle, spliced immediately before the minimal nonzero state.
struct LfsrConfig {
  int width_bits = 0;      // nb
  std::uint32_t taps = 0;  // bit (t-1) set for tap position t
  std::uint32_t seed = 1;  // in [1, 2^nb - 1]
  LfsrMode mode = LfsrMode::debruijn;

  LfsrConfig() = default;

  // Standard taps for the width.
  LfsrConfig(int width_bits, std::uint32_t seed, LfsrMode mode);

  // Explicit taps; rejected unless they are the verified maximal set for
  // the width.
  LfsrConfig(int width_bits, std::uint32_t seed, LfsrMode mode,
             std::uint32_t taps);

  std::uint32_t state_count() const noexcept { return 1u << width_bits; }

  std::uint32_t period() const noexcept {
    return mode == LfsrMode::debruijn ? state_count() : state_count() - 1;
  }
};

// Successor state. The zero state is only valid in debruijn mode.
std::uint32_t lfsr_next(std::uint32_t state, const LfsrConfig& cfg);

}  // namespace spnn
