#include <cstdio>

#include "doctest.h"
#include "spnn/common.hpp"
#include "spnn/model_store.hpp"
#include "spnn/train.hpp"

using namespace spnn;

namespace {

// Mask with the 4-of-7 column [0,1,1,1,0,1,0]: width 3, threshold 4, seed 4.
MaskMatrix four_of_seven_mask() {
  const SngConfig sng(LfsrConfig(3, 4, LfsrMode::debruijn), 0.5);
  return generate_mask(7, 1, sng, 4);
}

Matrix random_weights(std::size_t n, std::size_t m, std::uint64_t key) {
  CounterRng rng(key);
  Matrix w(n, m);
  for (auto& v : w.data()) v = 2.0f * rng.next01<float>() - 1.0f;
  return w;
}

CompressedLayer random_compressed(std::size_t n, std::size_t m, double p,
                                  QuantMode quant, std::uint64_t key) {
  const int nb = suggested_lfsr_width(n);
  const std::uint32_t seed =
      1 + static_cast<std::uint32_t>(key % ((1u << nb) - 1));
  const SngConfig sng(LfsrConfig(nb, seed, LfsrMode::debruijn), 1.0 - p);
  const MaskMatrix mask = generate_mask(n, m, sng, seed);
  CounterRng rng(key);
  std::vector<float> bias(m);
  for (auto& b : bias) b = rng.next01<float>() - 0.5f;
  return compress_layer(random_weights(n, m, key ^ 0xA5A5), mask, quant, bias, {});
}

Model small_model(std::uint64_t key) {
  Model model;
  model.config_hash = key;
  model.epochs_trained = 5;
  model.layers.push_back(random_compressed(32, 6, 0.5, QuantMode::ternary, key));
  model.layers.push_back(random_compressed(6, 4, 0.0, QuantMode::ternary, key + 1));
  return model;
}

}  // namespace

TEST_CASE("compression keeps exactly the masked-in weights, in row order") {
  const MaskMatrix mask = four_of_seven_mask();
  REQUIRE(mask.bits == std::vector<std::uint8_t>{0, 1, 1, 1, 0, 1, 0});
  Matrix w(7, 1);
  for (int i = 0; i < 7; ++i) w(i, 0) = static_cast<float>(10 * (i + 1));
  const CompressedLayer layer = compress_layer(w, mask, QuantMode::none, {0.0f}, {});
  CHECK(layer.kept_counts == std::vector<std::uint32_t>{4});
  CHECK(layer.columns[0] == std::vector<float>{20.0f, 30.0f, 40.0f, 60.0f});
  CHECK(layer.columns[0].size() == mask_column_popcount(mask, 0));

  const Matrix back = decompress_layer(layer);
  CHECK(back == hadamard(w, mask_values<float>(mask)));
}

TEST_CASE("an all-ones mask compresses to the full columns") {
  const SngConfig sng(LfsrConfig(3, 1, LfsrMode::debruijn), 1.0);
  const MaskMatrix mask = generate_mask(8, 3, sng, 1);
  const Matrix w = random_weights(8, 3, 5);
  const CompressedLayer layer = compress_layer(w, mask, QuantMode::none,
                                               std::vector<float>(3, 0.0f), {});
  for (std::uint32_t c : layer.kept_counts) CHECK(c == 8);
  CHECK(decompress_layer(layer) == w);
}

TEST_CASE("an all-zeros mask compresses to empty columns") {
  const SngConfig sng(LfsrConfig(3, 1, LfsrMode::debruijn), 0.0);
  const MaskMatrix mask = generate_mask(8, 3, sng, 1);
  const CompressedLayer layer = compress_layer(random_weights(8, 3, 6), mask,
                                               QuantMode::none,
                                               std::vector<float>(3, 0.0f), {});
  for (const auto& column : layer.columns) CHECK(column.empty());
  CHECK(decompress_layer(layer) == Matrix(8, 3, 0.0f));
}

TEST_CASE("roundtrip equals quantize-then-mask for every mode") {
  CounterRng rng(0x5EED);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 4 + rng.next_below(60);
    const std::size_t m = 1 + rng.next_below(12);
    const double presets[] = {0.5, 0.75, 0.875, 0.9375};
    const double p = presets[rng.next_below(4)];
    const QuantMode quant = static_cast<QuantMode>(rng.next_below(3));

    const int nb = suggested_lfsr_width(n);
    const std::uint32_t seed =
        1 + static_cast<std::uint32_t>(rng.next_below((1u << nb) - 1));
    const SngConfig sng(LfsrConfig(nb, seed, LfsrMode::debruijn), 1.0 - p);
    const MaskMatrix mask = generate_mask(n, m, sng, seed);
    const Matrix w = random_weights(n, m, rng.next());

    const CompressedLayer layer =
        compress_layer(w, mask, quant, std::vector<float>(m, 0.0f), {});
    const Matrix expected = hadamard(apply_quant(quant, w), mask_values<float>(mask));
    CHECK(decompress_layer(layer) == expected);
  }
}

TEST_CASE("memory footprint reproduces the per-neuron depth table") {
  const double sparsities[] = {0.0, 0.5, 0.75, 0.875, 0.9375};
  const std::uint64_t expected_bits[] = {1024, 512, 256, 128, 64};
  for (int c = 0; c < 5; ++c) {
    const SngConfig sng(LfsrConfig(10, 1, LfsrMode::debruijn), 1.0 - sparsities[c]);
    const MaskMatrix mask = generate_mask(1024, 1, sng, 1);
    const CompressedLayer layer = compress_layer(
        random_weights(1024, 1, 99 + c), mask, QuantMode::binary, {0.0f}, {});
    CHECK(neuron_footprint_bits(layer, 0) == expected_bits[c]);
    CHECK(memory_footprint_bits(layer) == expected_bits[c]);
  }
}

TEST_CASE("footprint scales with the stored weight width") {
  const SngConfig sng(LfsrConfig(10, 1, LfsrMode::debruijn), 0.5);
  const MaskMatrix mask = generate_mask(1024, 2, sng, 1);
  const Matrix w = random_weights(1024, 2, 3);
  const std::vector<float> bias(2, 0.0f);
  CHECK(memory_footprint_bits(compress_layer(w, mask, QuantMode::binary, bias, {})) ==
        2 * 512 * 1);
  CHECK(memory_footprint_bits(compress_layer(w, mask, QuantMode::ternary, bias, {})) ==
        2 * 512 * 2);
  CHECK(memory_footprint_bits(compress_layer(w, mask, QuantMode::none, bias, {})) ==
        2 * 512 * 32);
}

TEST_CASE("serialize/deserialize is a faithful roundtrip") {
  const Model model = small_model(123);
  const std::vector<std::uint8_t> bytes = serialize(model);
  const Model loaded = deserialize(bytes);
  CHECK(loaded.version == model.version);
  CHECK(loaded.config_hash == model.config_hash);
  CHECK(loaded.epochs_trained == model.epochs_trained);
  REQUIRE(loaded.layers.size() == model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    CHECK(loaded.layers[l].column_seeds == model.layers[l].column_seeds);
    CHECK(loaded.layers[l].kept_counts == model.layers[l].kept_counts);
    CHECK(loaded.layers[l].columns == model.layers[l].columns);
    CHECK(loaded.layers[l].bias == model.layers[l].bias);
    CHECK(loaded.layers[l].bn == model.layers[l].bn);
  }
  // byte-level idempotence
  CHECK(serialize(loaded) == bytes);
}

TEST_CASE("real weights roundtrip bit-for-bit through the file") {
  Model model;
  model.layers.push_back(random_compressed(40, 5, 0.5, QuantMode::none, 9));
  const Model loaded = deserialize(serialize(model));
  CHECK(loaded.layers[0].columns == model.layers[0].columns);
}

TEST_CASE("format violations are rejected with positions") {
  const Model model = small_model(7);
  std::vector<std::uint8_t> bytes = serialize(model);

  SUBCASE("models must hold at least one layer") {
    CHECK_THROWS_AS(serialize(Model{}), std::invalid_argument);
    std::vector<std::uint8_t> empty = bytes;
    empty[6] = 0;  // layer count low byte
    empty[7] = 0;
    CHECK_THROWS_WITH_AS(deserialize(empty),
                         doctest::Contains("layer count"), FormatError);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_WITH_AS(deserialize(bytes), doctest::Contains("magic"), FormatError);
  }
  SUBCASE("unsupported version") {
    bytes[4] = 9;
    CHECK_THROWS_WITH_AS(deserialize(bytes), doctest::Contains("version"), FormatError);
  }
  SUBCASE("truncation") {
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(deserialize(bytes), FormatError);
  }
  SUBCASE("every single-byte payload flip trips the checksum") {
    CounterRng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint8_t> corrupt = bytes;
      const std::size_t at = 24 + rng.next_below(corrupt.size() - 24);
      corrupt[at] ^= static_cast<std::uint8_t>(1 + rng.next_below(255));
      CHECK_THROWS_WITH_AS(deserialize(corrupt), doctest::Contains("checksum"),
                           FormatError);
    }
  }
  SUBCASE("trailing garbage lands in the checksummed region") {
    bytes.push_back(0);
    CHECK_THROWS_WITH_AS(deserialize(bytes), doctest::Contains("checksum"), FormatError);
  }
}

TEST_CASE("save and load through a file, atomically named") {
  const Model model = small_model(55);
  const std::string path = "test_model_store_tmp.spnn";
  save_model(path, model);
  const Model loaded = load_model(path);
  CHECK(serialize(loaded) == serialize(model));
  std::remove(path.c_str());
}

TEST_CASE("network conversion preserves every effective weight") {
  NetworkSpec spec;
  spec.shape = {20, 10, 4};
  spec.sparsity = {0.5, 0.25};
  spec.quant = QuantMode::binary;
  spec.mask_seed = 3;
  Network<float> net = make_network<float>(spec, 11);
  const Model model = to_model(net, 0xC0FFEE, 2);
  Network<float> loaded = to_network(model);

  // Stored weights are the binarized levels, so quantized-mode effective
  // weights must match exactly; masked slots stay zero.
  const Matrix original = effective_weights(net.layers[0], WeightPhase::test_quantized);
  const Matrix restored = effective_weights(loaded.layers[0], WeightPhase::test_quantized);
  CHECK(original == restored);
  CHECK(loaded.layers[0].mask.bits == net.layers[0].mask.bits);
  CHECK(loaded.norms[0].gamma == net.norms[0].gamma);
  CHECK(loaded.layers[1].bias == net.layers[1].bias);
}

TEST_CASE("stored weight counts add up") {
  const Model model = small_model(1);
  std::uint64_t expected = 0;
  for (const auto& layer : model.layers)
    for (std::uint32_t c : layer.kept_counts) expected += c;
  CHECK(stored_weight_count(model) == expected);
  CHECK(expected > 0);
}
