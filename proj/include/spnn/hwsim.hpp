#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spnn/model_store.hpp"
#include "spnn/sng.hpp"

namespace spnn {

// fully_connected: one weight read and MAC every cycle, depth = N.
// sparse: the SNG gates the address counter and the accumulator; on a zero
// bit both hold their previous values and no memory read happens.
enum class DatapathMode { fully_connected, sparse };

struct ActivityReport {
  std::uint64_t cycles = 0;
  std::uint64_t memory_reads = 0;
  std::uint64_t mac_operations = 0;
  std::uint64_t accumulator_loads = 0;
  std::uint64_t memory_bits = 0;  // depth × weight width
};

struct TraceRecord {
  std::uint32_t cycle = 0;  // 1-based
  std::uint8_t sng_bit = 0;
  std::uint32_t address = 0;  // read address, or the held counter value
  float weight = 0.0f;        // 0 when the cycle read nothing
  float input = 0.0f;
  double accumulator = 0.0;   // register value at the end of the cycle
};

struct NeuronRun {
  double output = 0.0;
  ActivityReport report;
  std::vector<TraceRecord> trace;  // empty unless requested
};

// Streams N inputs through one neuron. In sparse mode the weight memory must
// hold exactly as many entries as the SNG (seeded with `seed`) emits ones
// over N cycles; a mismatch raises FormatError. The output equals the masked
// dot product in stream order.
NeuronRun simulate_neuron(std::span<const float> inputs,
                          std::span<const float> weight_memory,
                          const SngConfig& sng, std::uint32_t seed,
                          DatapathMode mode, int weight_width_bits,
                          bool record_trace = false);

// Fixed-point variant: inputs quantized to Q(int_bits).(frac_bits) signed
// values, MACs in 64-bit integer arithmetic. Quantized weight memories are
// taken as exact integer levels; real memories are quantized to the same
// format.
struct QFormat {
  int int_bits = 8;   // includes the sign
  int frac_bits = 8;
};

struct FixedNeuronRun {
  std::int64_t raw = 0;
  double output = 0.0;
  ActivityReport report;
};

FixedNeuronRun simulate_neuron_fixed(std::span<const float> inputs,
                                     std::span<const float> weight_memory,
                                     const SngConfig& sng, std::uint32_t seed,
                                     DatapathMode mode, int weight_width_bits,
                                     QFormat format);

struct LayerRun {
  std::vector<double> outputs;  // m pre-bias accumulators
  ActivityReport total;        // cycles = N; other counters summed over neurons
  std::vector<std::vector<TraceRecord>> traces;
};

// All m neurons share the sequential input stream, so layer latency is the
// cycle count of a single neuron. FC mode runs on the decompressed columns.
LayerRun simulate_layer(std::span<const float> inputs, const CompressedLayer& layer,
                        DatapathMode mode, bool record_trace = false);

struct ModeComparison {
  ActivityReport fc;
  ActivityReport sparse;
  double memory_bits_ratio = 0.0;   // sparse / fc
  double memory_reads_ratio = 0.0;  // sparse / fc
};

// Activity of a dense layer in FC mode against a sparse layer in sparse mode
// on the same input stream.
ModeComparison compare_modes(const CompressedLayer& dense,
                             const CompressedLayer& sparse,
                             std::span<const float> inputs);

}  // namespace spnn
