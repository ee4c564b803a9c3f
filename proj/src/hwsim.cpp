#include "spnn/hwsim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "spnn/common.hpp"

namespace spnn {

namespace {

void check_depth(std::size_t inputs, std::size_t depth, DatapathMode mode,
                 const SngConfig& sng, std::uint32_t seed) {
  if (mode == DatapathMode::fully_connected) {
    if (depth != inputs)
      throw FormatError("simulate_neuron: fully-connected memory depth " +
                        std::to_string(depth) + " differs from input count " +
                        std::to_string(inputs));
    return;
  }
  const std::vector<std::uint8_t> stream = sng_stream(sng, seed, inputs);
  std::size_t ones = 0;
  for (std::uint8_t b : stream) ones += b;
  if (ones != depth)
    throw FormatError("simulate_neuron: stream popcount " + std::to_string(ones) +
                      " differs from memory depth " + std::to_string(depth));
}

}  // namespace

NeuronRun simulate_neuron(std::span<const float> inputs,
                          std::span<const float> weight_memory,
                          const SngConfig& sng, std::uint32_t seed,
                          DatapathMode mode, int weight_width_bits,
                          bool record_trace) {
  if (inputs.empty())
    throw std::invalid_argument("simulate_neuron: empty input stream");
  check_depth(inputs.size(), weight_memory.size(), mode, sng, seed);

  NeuronRun run;
  run.report.memory_bits =
      static_cast<std::uint64_t>(weight_memory.size()) *
      static_cast<std::uint64_t>(weight_width_bits);
  if (record_trace) run.trace.reserve(inputs.size());

  LfsrConfig lfsr = sng.lfsr;
  std::uint32_t state = seed;
  std::uint32_t counter = 0;
  double accumulator = 0.0;  // the register is modeled wider than the operands
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    std::uint8_t bit = 1;
    if (mode == DatapathMode::sparse) {
      bit = state < sng.threshold ? 1 : 0;
      state = lfsr_next(state, lfsr);
    }
    float weight = 0.0f;
    const std::uint32_t address = counter;  // read address, or held value
    if (bit) {
      weight = weight_memory[counter];
      accumulator += static_cast<double>(inputs[t]) * static_cast<double>(weight);
      ++counter;
      ++run.report.memory_reads;
      ++run.report.mac_operations;
      ++run.report.accumulator_loads;
    }
    ++run.report.cycles;
    if (record_trace)
      run.trace.push_back({static_cast<std::uint32_t>(t + 1), bit, address, weight,
                           inputs[t], accumulator});
  }
  run.output = accumulator;
  return run;
}

FixedNeuronRun simulate_neuron_fixed(std::span<const float> inputs,
                                     std::span<const float> weight_memory,
                                     const SngConfig& sng, std::uint32_t seed,
                                     DatapathMode mode, int weight_width_bits,
                                     QFormat format) {
  if (inputs.empty())
    throw std::invalid_argument("simulate_neuron_fixed: empty input stream");
  if (format.int_bits < 1 || format.frac_bits < 0 ||
      format.int_bits + format.frac_bits > 31)
    throw std::invalid_argument("simulate_neuron_fixed: bad Q format");
  check_depth(inputs.size(), weight_memory.size(), mode, sng, seed);

  const int total_bits = format.int_bits + format.frac_bits;
  const std::int64_t lo = -(std::int64_t{1} << (total_bits - 1));
  const std::int64_t hi = (std::int64_t{1} << (total_bits - 1)) - 1;
  const double scale = static_cast<double>(std::int64_t{1} << format.frac_bits);
  auto to_fixed = [&](float v) {
    std::int64_t q = std::llround(static_cast<double>(v) * scale);
    return q < lo ? lo : (q > hi ? hi : q);
  };
  // Quantized memories already hold integer levels; real memories get the
  // same Q treatment as the inputs.
  const bool integer_weights = weight_width_bits <= 2;

  FixedNeuronRun run;
  run.report.memory_bits =
      static_cast<std::uint64_t>(weight_memory.size()) *
      static_cast<std::uint64_t>(weight_width_bits);

  LfsrConfig lfsr = sng.lfsr;
  std::uint32_t state = seed;
  std::uint32_t counter = 0;
  std::int64_t accumulator = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    std::uint8_t bit = 1;
    if (mode == DatapathMode::sparse) {
      bit = state < sng.threshold ? 1 : 0;
      state = lfsr_next(state, lfsr);
    }
    if (bit) {
      const std::int64_t w = integer_weights
                                 ? static_cast<std::int64_t>(weight_memory[counter])
                                 : to_fixed(weight_memory[counter]);
      accumulator += to_fixed(inputs[t]) * w;
      ++counter;
      ++run.report.memory_reads;
      ++run.report.mac_operations;
      ++run.report.accumulator_loads;
    }
    ++run.report.cycles;
  }
  run.raw = accumulator;
  run.output = static_cast<double>(accumulator) /
               (integer_weights ? scale : scale * scale);
  return run;
}

LayerRun simulate_layer(std::span<const float> inputs, const CompressedLayer& layer,
                        DatapathMode mode, bool record_trace) {
  if (inputs.size() != layer.n)
    throw std::invalid_argument("simulate_layer: input count differs from layer inputs");
  const SngConfig sng = layer.sng();

  LayerRun run;
  run.outputs.resize(layer.m);
  if (record_trace) run.traces.resize(layer.m);

  // FC mode reads a dense memory, so scatter the kept weights back first.
  Matrix dense;
  if (mode == DatapathMode::fully_connected) dense = decompress_layer(layer);

  for (std::uint32_t j = 0; j < layer.m; ++j) {
    std::vector<float> dense_column;
    std::span<const float> memory;
    if (mode == DatapathMode::fully_connected) {
      dense_column.resize(layer.n);
      for (std::uint32_t i = 0; i < layer.n; ++i) dense_column[i] = dense(i, j);
      memory = dense_column;
    } else {
      memory = layer.columns[j];
    }
    NeuronRun neuron = simulate_neuron(inputs, memory, sng, layer.column_seeds[j],
                                       mode, layer.weight_width_bits(), record_trace);
    run.outputs[j] = neuron.output;
    run.total.memory_reads += neuron.report.memory_reads;
    run.total.mac_operations += neuron.report.mac_operations;
    run.total.accumulator_loads += neuron.report.accumulator_loads;
    run.total.memory_bits += neuron.report.memory_bits;
    run.total.cycles = neuron.report.cycles;  // shared input stream
    if (record_trace) run.traces[j] = std::move(neuron.trace);
  }
  return run;
}

ModeComparison compare_modes(const CompressedLayer& dense,
                             const CompressedLayer& sparse,
                             std::span<const float> inputs) {
  if (dense.n != sparse.n || dense.m != sparse.m)
    throw std::invalid_argument("compare_modes: layer shapes differ");
  ModeComparison cmp;
  cmp.fc = simulate_layer(inputs, dense, DatapathMode::fully_connected).total;
  cmp.sparse = simulate_layer(inputs, sparse, DatapathMode::sparse).total;
  cmp.memory_bits_ratio = static_cast<double>(cmp.sparse.memory_bits) /
                          static_cast<double>(cmp.fc.memory_bits);
  cmp.memory_reads_ratio = static_cast<double>(cmp.sparse.memory_reads) /
                           static_cast<double>(cmp.fc.memory_reads);
  return cmp;
}

}  // namespace spnn
