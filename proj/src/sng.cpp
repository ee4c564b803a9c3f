#include "spnn/sng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spnn {

SngConfig::SngConfig(LfsrConfig lfsr_, double keep_density_)
    : lfsr(lfsr_), keep_density(keep_density_) {
  if (!(keep_density >= 0.0 && keep_density <= 1.0))
    throw std::invalid_argument("SngConfig: keep_density outside [0, 1]");
  threshold = static_cast<std::uint32_t>(
      std::floor(keep_density * static_cast<double>(lfsr.state_count())));
}

SngConfig SngConfig::from_threshold(LfsrConfig lfsr_, std::uint32_t threshold_) {
  if (threshold_ > lfsr_.state_count())
    throw std::invalid_argument("SngConfig: threshold above 2^nb");
  SngConfig cfg;
  cfg.lfsr = lfsr_;
  cfg.threshold = threshold_;
  cfg.keep_density = static_cast<double>(threshold_) /
                     static_cast<double>(lfsr_.state_count());
  return cfg;
}

std::vector<std::uint8_t> sng_stream(const SngConfig& cfg, std::size_t length) {
  return sng_stream(cfg, cfg.lfsr.seed, length);
}

std::vector<std::uint8_t> sng_stream(const SngConfig& cfg, std::uint32_t seed,
                                     std::size_t length) {
  if (length < 1) throw std::invalid_argument("sng_stream: length must be >= 1");
  LfsrConfig lfsr = cfg.lfsr;
  lfsr.seed = seed;  // revalidated below via lfsr_next's range check
  if (seed == 0 || seed >= lfsr.state_count())
    throw std::invalid_argument("sng_stream: seed must lie in [1, 2^nb - 1]");
  std::vector<std::uint8_t> bits(length);
  std::uint32_t state = seed;
  for (std::size_t i = 0; i < length; ++i) {
    bits[i] = state < cfg.threshold ? 1 : 0;
    state = lfsr_next(state, lfsr);
  }
  return bits;
}

MaskMatrix generate_mask(std::size_t n, std::size_t m, const SngConfig& sng,
                         std::uint32_t base_seed) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("generate_mask: dimensions must be >= 1");
  if (base_seed == 0)
    throw std::invalid_argument("generate_mask: base seed must be nonzero");
  const std::uint32_t states = sng.lfsr.state_count();
  if (sng.lfsr.mode == LfsrMode::debruijn && n > states)
    throw std::invalid_argument(
        "generate_mask: debruijn period 2^" +
        std::to_string(sng.lfsr.width_bits) + " shorter than column length " +
        std::to_string(n));

  MaskMatrix mask;
  mask.rows = n;
  mask.cols = m;
  mask.bits.assign(n * m, 0);
  mask.column_seeds.resize(m);
  mask.sng = sng;
  mask.wrapped = sng.lfsr.mode == LfsrMode::maximal && n > states - 1;

  const std::uint64_t nonzero = states - 1;
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t seed = static_cast<std::uint32_t>(
        (static_cast<std::uint64_t>(base_seed) - 1 + j) % nonzero + 1);
    mask.column_seeds[j] = seed;
    const std::vector<std::uint8_t> column = sng_stream(sng, seed, n);
    for (std::size_t i = 0; i < n; ++i) mask.bits[i * m + j] = column[i];
  }
  mask.sng.lfsr.seed = mask.column_seeds[0];  // normalized base seed
  return mask;
}

std::size_t mask_column_popcount(const MaskMatrix& mask, std::size_t j) {
  if (j >= mask.cols)
    throw std::out_of_range("mask_column_popcount: column index out of range");
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.rows; ++i) count += mask.at(i, j);
  return count;
}

int suggested_lfsr_width(std::size_t n) {
  int nb = kMinLfsrWidth + 1;  // keep a usable minimum even for tiny layers
  while (nb < kMaxLfsrWidth && (std::size_t{1} << nb) < n) ++nb;
  if ((std::size_t{1} << nb) < n)
    throw std::invalid_argument("suggested_lfsr_width: layer too wide");
  return nb;
}

}  // namespace spnn
