#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spnn/lfsr.hpp"
#include "spnn/matrix.hpp"

namespace spnn {

// LFSR + comparator. Emits 1 whenever the current state is below the
// threshold, so over a full debruijn period the ones count is exactly the
// threshold.
struct SngConfig {
  LfsrConfig lfsr;
  double keep_density = 1.0;   // fraction of connections kept, 1 - sparsity
  std::uint32_t threshold = 0; // floor(keep_density * 2^nb), cached

  SngConfig() = default;
  SngConfig(LfsrConfig lfsr, double keep_density);

  // Rebuild from a stored comparator constant (model files record the
  // threshold, not the density).
  static SngConfig from_threshold(LfsrConfig lfsr, std::uint32_t threshold);

  double sparsity() const noexcept { return 1.0 - keep_density; }
};

// Comparator stream starting at the given seed (or cfg.lfsr.seed). The
// register wraps when length exceeds its period.
std::vector<std::uint8_t> sng_stream(const SngConfig& cfg, std::size_t length);
std::vector<std::uint8_t> sng_stream(const SngConfig& cfg, std::uint32_t seed,
                                     std::size_t length);

// Binary connection mask, same shape as the weight matrix it gates. Columns
// are independent streams; the bits are a pure function of (sng,
// column_seeds) and can always be regenerated from them.
struct MaskMatrix {
  std::size_t rows = 0;  // n, layer inputs
  std::size_t cols = 0;  // m, layer outputs
  std::vector<std::uint8_t> bits;          // row-major n×m, values 0/1
  std::vector<std::uint32_t> column_seeds; // m seeds
  SngConfig sng;
  bool wrapped = false;  // maximal mode only: columns longer than the period

  std::uint8_t at(std::size_t i, std::size_t j) const {
    return bits[i * cols + j];
  }
};

// Column j runs from seed ((base_seed - 1 + j) mod (2^nb - 1)) + 1, so seeds
// stay in [1, 2^nb - 1] and are pairwise distinct while m <= 2^nb - 1.
MaskMatrix generate_mask(std::size_t n, std::size_t m, const SngConfig& sng,
                         std::uint32_t base_seed);

// Ones in column j; this is the compressed weight-memory depth of neuron j.
std::size_t mask_column_popcount(const MaskMatrix& mask, std::size_t j);

// Register width used for an n-input layer: smallest width whose full
// debruijn period covers the column.
int suggested_lfsr_width(std::size_t n);

template <typename T>
Mat<T> mask_values(const MaskMatrix& mask) {
  Mat<T> m(mask.rows, mask.cols);
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    m.data()[i] = static_cast<T>(mask.bits[i]);
  return m;
}

}  // namespace spnn
