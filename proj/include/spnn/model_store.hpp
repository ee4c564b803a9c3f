#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spnn/network.hpp"
#include "spnn/quantize.hpp"
#include "spnn/sng.hpp"

namespace spnn {

// Kept-weights-only storage for one layer. Mask positions are never stored;
// replaying the column SNG from its seed regenerates them, so the kept
// weights (ascending row order per column) scatter back exactly.
struct CompressedLayer {
  std::uint32_t n = 0;  // inputs
  std::uint32_t m = 0;  // outputs
  QuantMode quant = QuantMode::none;
  std::uint8_t lfsr_width = 0;
  LfsrMode lfsr_mode = LfsrMode::debruijn;
  std::uint32_t taps = 0;
  std::uint32_t base_seed = 0;
  std::uint32_t threshold = 0;                // SNG comparator constant
  std::vector<std::uint32_t> column_seeds;    // m
  std::vector<std::uint32_t> kept_counts;     // m
  std::vector<std::vector<float>> columns;    // kept weights per column
  std::vector<float> bias;                    // m
  std::vector<float> bn;                      // 4m: gamma, beta, mean, var

  // 32 for real weights, 1 for binary, 2 for ternary.
  int weight_width_bits() const noexcept {
    return quant == QuantMode::none ? 32 : (quant == QuantMode::binary ? 1 : 2);
  }

  SngConfig sng() const {
    return SngConfig::from_threshold(
        LfsrConfig(lfsr_width, base_seed, lfsr_mode, taps), threshold);
  }
};

struct Model {
  std::uint16_t version = 1;
  std::uint64_t config_hash = 0;
  std::uint32_t epochs_trained = 0;
  std::vector<CompressedLayer> layers;
};

// Quantize-then-mask, then keep only the surviving entries column by column.
// bn must hold 4m values (gamma, beta, mean, var) or be empty for identity.
CompressedLayer compress_layer(const Matrix& weights, const MaskMatrix& mask,
                               QuantMode quant, const std::vector<float>& bias,
                               const std::vector<float>& bn);

// Regenerates every mask column from its seed and scatters the kept weights
// back; zero elsewhere. Throws FormatError when a regenerated popcount does
// not match the stored kept count.
Matrix decompress_layer(const CompressedLayer& layer);

MaskMatrix regenerate_mask(const CompressedLayer& layer);

// Per-neuron depth times the stored weight width.
std::uint64_t neuron_footprint_bits(const CompressedLayer& layer, std::size_t j);
std::uint64_t memory_footprint_bits(const CompressedLayer& layer);

std::vector<std::uint8_t> serialize(const Model& model);
Model deserialize(const std::vector<std::uint8_t>& bytes);

// Atomic write (temp file + rename).
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t length);

// Network <-> storage. Loading rebuilds masks from seeds; weights at masked
// positions come back as zero, which leaves every effective weight intact.
Model to_model(const Network<float>& net, std::uint64_t config_hash,
               std::uint32_t epochs_trained);
Network<float> to_network(const Model& model);

std::uint64_t stored_weight_count(const Model& model);

}  // namespace spnn
