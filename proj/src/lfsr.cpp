#include "spnn/lfsr.hpp"

#include <bit>
#include <stdexcept>
#include <string>

namespace spnn {

namespace {

// One maximal-period tap set per width, 1-indexed positions (xapp052-style
// XOR taps). The period/uniqueness tests exercise every entry.
constexpr std::uint32_t taps_mask(std::initializer_list<int> positions) {
  std::uint32_t mask = 0;
  for (int t : positions) mask |= 1u << (t - 1);
  return mask;
}

constexpr std::uint32_t kStandardTaps[] = {
    taps_mask({2, 1}),            // 2
    taps_mask({3, 2}),            // 3
    taps_mask({4, 3}),            // 4
    taps_mask({5, 3}),            // 5
    taps_mask({6, 5}),            // 6
    taps_mask({7, 6}),            // 7
    taps_mask({8, 6, 5, 4}),      // 8
    taps_mask({9, 5}),            // 9
    taps_mask({10, 7}),           // 10
    taps_mask({11, 9}),           // 11
    taps_mask({12, 6, 4, 1}),     // 12
    taps_mask({13, 4, 3, 1}),     // 13
    taps_mask({14, 5, 3, 1}),     // 14
    taps_mask({15, 14}),          // 15
    taps_mask({16, 15, 13, 4}),   // 16
    taps_mask({17, 14}),          // 17
    taps_mask({18, 11}),          // 18
    taps_mask({19, 6, 2, 1}),     // 19
    taps_mask({20, 17}),          // 20
    taps_mask({21, 19}),          // 21
    taps_mask({22, 21}),          // 22
    taps_mask({23, 18}),          // 23
    taps_mask({24, 23, 22, 17}),  // 24
};

}  // namespace

std::uint32_t standard_taps(int width_bits) {
  if (width_bits < kMinLfsrWidth || width_bits > kMaxLfsrWidth)
    throw std::invalid_argument("standard_taps: width " +
                                std::to_string(width_bits) +
                                " outside [" + std::to_string(kMinLfsrWidth) +
                                ", " + std::to_string(kMaxLfsrWidth) + "]");
  return kStandardTaps[width_bits - kMinLfsrWidth];
}

LfsrConfig::LfsrConfig(int width_bits, std::uint32_t seed, LfsrMode mode)
    : LfsrConfig(width_bits, seed, mode, standard_taps(width_bits)) {}

LfsrConfig::LfsrConfig(int width_bits_, std::uint32_t seed_, LfsrMode mode_,
                       std::uint32_t taps_)
    : width_bits(width_bits_), taps(taps_), seed(seed_), mode(mode_) {
  if (taps != standard_taps(width_bits))
    throw std::invalid_argument(
        "LfsrConfig: taps are not the verified maximal-period set for width " +
        std::to_string(width_bits));
  if (seed == 0 || seed >= state_count())
    throw std::invalid_argument("LfsrConfig: seed must lie in [1, 2^nb - 1]");
}

std::uint32_t lfsr_next(std::uint32_t state, const LfsrConfig& cfg) {
  const std::uint32_t mask = cfg.state_count() - 1;
  if (state > mask)
    throw std::invalid_argument("lfsr_next: state wider than the register");
  if (state == 0 && cfg.mode == LfsrMode::maximal)
    throw std::invalid_argument("lfsr_next: zero state in maximal mode");
  std::uint32_t fb = static_cast<std::uint32_t>(std::popcount(state & cfg.taps)) & 1u;
  // Zero-state splice: invert feedback when every bit that survives the
  // shift is zero, which routes 2^(nb-1) -> 0 -> 1.
  if (cfg.mode == LfsrMode::debruijn && (state & (mask >> 1)) == 0) fb ^= 1u;
  return ((state << 1) | fb) & mask;
}

}  // namespace spnn
