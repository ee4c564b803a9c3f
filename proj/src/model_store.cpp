#include "spnn/model_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "spnn/common.hpp"

namespace spnn {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 24;

// --- little-endian primitives -------------------------------------------

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return at_; }
  std::size_t remaining() const noexcept { return bytes_.size() - at_; }

  void need(std::size_t count, const char* what) const {
    if (at_ + count > bytes_.size())
      throw FormatError(std::string("model: truncated while reading ") + what,
                        static_cast<std::int64_t>(at_));
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[at_++];
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[at_]) |
                      static_cast<std::uint16_t>(bytes_[at_ + 1]) << 8;
    at_ += 2;
    return v;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[at_ + i]} << (8 * i);
    at_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[at_ + i]} << (8 * i);
    at_ += 8;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  const std::uint8_t* raw(std::size_t count, const char* what) {
    need(count, what);
    const std::uint8_t* p = bytes_.data() + at_;
    at_ += count;
    return p;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t at_ = 0;
};

// --- CRC-32 (IEEE, reflected) --------------------------------------------

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

// --- packed weight payloads ----------------------------------------------

void pack_column(std::vector<std::uint8_t>& out, const std::vector<float>& column,
                 QuantMode quant) {
  switch (quant) {
    case QuantMode::none:
      for (float v : column) put_f32(out, v);
      return;
    case QuantMode::binary: {
      std::uint8_t byte = 0;
      int used = 0;
      for (float v : column) {
        if (v > 0) byte |= static_cast<std::uint8_t>(1u << used);
        if (++used == 8) {
          out.push_back(byte);
          byte = 0;
          used = 0;
        }
      }
      if (used) out.push_back(byte);
      return;
    }
    case QuantMode::ternary: {
      // 2-bit codes, low pair first: 00 = 0, 01 = +1, 11 = -1.
      std::uint8_t byte = 0;
      int used = 0;
      for (float v : column) {
        const std::uint8_t code = v > 0 ? 0x1 : (v < 0 ? 0x3 : 0x0);
        byte |= static_cast<std::uint8_t>(code << (2 * used));
        if (++used == 4) {
          out.push_back(byte);
          byte = 0;
          used = 0;
        }
      }
      if (used) out.push_back(byte);
      return;
    }
  }
}

std::vector<float> unpack_column(Reader& reader, std::uint32_t count,
                                 QuantMode quant) {
  std::vector<float> column(count);
  switch (quant) {
    case QuantMode::none:
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t at = reader.offset();
        column[i] = reader.f32("weight");
        if (!std::isfinite(column[i]))
          throw FormatError("model: non-finite weight", static_cast<std::int64_t>(at));
      }
      return column;
    case QuantMode::binary: {
      const std::size_t bytes = (count + 7) / 8;
      const std::uint8_t* p = reader.raw(bytes, "binary weights");
      for (std::uint32_t i = 0; i < count; ++i)
        column[i] = (p[i / 8] >> (i % 8)) & 1 ? 1.0f : -1.0f;
      return column;
    }
    case QuantMode::ternary: {
      const std::size_t start = reader.offset();
      const std::size_t bytes = (count + 3) / 4;
      const std::uint8_t* p = reader.raw(bytes, "ternary weights");
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint8_t code = (p[i / 4] >> (2 * (i % 4))) & 0x3;
        if (code == 0x2)
          throw FormatError("model: invalid ternary code",
                            static_cast<std::int64_t>(start + i / 4));
        column[i] = code == 0x1 ? 1.0f : (code == 0x3 ? -1.0f : 0.0f);
      }
      return column;
    }
  }
  throw FormatError("model: unknown quant mode");
}

void append_layer(std::vector<std::uint8_t>& out, const CompressedLayer& layer) {
  put_u32(out, layer.n);
  put_u32(out, layer.m);
  out.push_back(static_cast<std::uint8_t>(layer.quant));
  out.push_back(layer.lfsr_width);
  out.push_back(static_cast<std::uint8_t>(layer.lfsr_mode));
  put_u32(out, layer.taps);
  put_u32(out, layer.base_seed);
  put_u32(out, layer.threshold);
  for (std::uint32_t s : layer.column_seeds) put_u32(out, s);
  for (std::uint32_t c : layer.kept_counts) put_u32(out, c);
  for (const auto& column : layer.columns) pack_column(out, column, layer.quant);
  for (float b : layer.bias) put_f32(out, b);
  for (float v : layer.bn) put_f32(out, v);
}

CompressedLayer read_layer(Reader& reader) {
  CompressedLayer layer;
  layer.n = reader.u32("layer inputs");
  layer.m = reader.u32("layer outputs");
  if (layer.n == 0 || layer.m == 0)
    throw FormatError("model: zero layer dimension",
                      static_cast<std::int64_t>(reader.offset()) - 8);
  const std::size_t quant_at = reader.offset();
  const std::uint8_t quant = reader.u8("quant mode");
  if (quant > 2)
    throw FormatError("model: unknown quant mode", static_cast<std::int64_t>(quant_at));
  layer.quant = static_cast<QuantMode>(quant);
  layer.lfsr_width = reader.u8("lfsr width");
  const std::size_t mode_at = reader.offset();
  const std::uint8_t mode = reader.u8("lfsr mode");
  if (mode > 1)
    throw FormatError("model: unknown lfsr mode", static_cast<std::int64_t>(mode_at));
  layer.lfsr_mode = static_cast<LfsrMode>(mode);
  const std::size_t taps_at = reader.offset();
  layer.taps = reader.u32("taps");
  layer.base_seed = reader.u32("base seed");
  layer.threshold = reader.u32("threshold");
  try {
    (void)layer.sng();  // validates width, taps, seed, threshold together
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model: ") + e.what(),
                      static_cast<std::int64_t>(taps_at));
  }
  layer.column_seeds.resize(layer.m);
  for (std::uint32_t j = 0; j < layer.m; ++j)
    layer.column_seeds[j] = reader.u32("column seed");
  layer.kept_counts.resize(layer.m);
  for (std::uint32_t j = 0; j < layer.m; ++j) {
    const std::size_t at = reader.offset();
    layer.kept_counts[j] = reader.u32("kept count");
    if (layer.kept_counts[j] > layer.n)
      throw FormatError("model: kept count exceeds layer inputs",
                        static_cast<std::int64_t>(at));
  }
  layer.columns.resize(layer.m);
  for (std::uint32_t j = 0; j < layer.m; ++j)
    layer.columns[j] = unpack_column(reader, layer.kept_counts[j], layer.quant);
  layer.bias.resize(layer.m);
  for (std::uint32_t j = 0; j < layer.m; ++j) {
    const std::size_t at = reader.offset();
    layer.bias[j] = reader.f32("bias");
    if (!std::isfinite(layer.bias[j]))
      throw FormatError("model: non-finite bias", static_cast<std::int64_t>(at));
  }
  layer.bn.resize(4u * layer.m);
  for (std::size_t i = 0; i < layer.bn.size(); ++i) {
    const std::size_t at = reader.offset();
    layer.bn[i] = reader.f32("batch-norm parameter");
    if (!std::isfinite(layer.bn[i]))
      throw FormatError("model: non-finite batch-norm parameter",
                        static_cast<std::int64_t>(at));
  }
  return layer;
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t length) {
  static const std::array<std::uint32_t, 256> table = make_crc_table();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < length; ++i)
    crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

CompressedLayer compress_layer(const Matrix& weights, const MaskMatrix& mask,
                               QuantMode quant, const std::vector<float>& bias,
                               const std::vector<float>& bn) {
  if (mask.rows != weights.rows() || mask.cols != weights.cols())
    throw std::invalid_argument("compress_layer: mask shape differs from weights");
  if (bias.size() != weights.cols())
    throw std::invalid_argument("compress_layer: bias length differs from outputs");
  if (!bn.empty() && bn.size() != 4 * weights.cols())
    throw std::invalid_argument("compress_layer: batch-norm block must hold 4m values");

  CompressedLayer layer;
  layer.n = static_cast<std::uint32_t>(weights.rows());
  layer.m = static_cast<std::uint32_t>(weights.cols());
  layer.quant = quant;
  layer.lfsr_width = static_cast<std::uint8_t>(mask.sng.lfsr.width_bits);
  layer.lfsr_mode = mask.sng.lfsr.mode;
  layer.taps = mask.sng.lfsr.taps;
  layer.base_seed = mask.sng.lfsr.seed;
  layer.threshold = mask.sng.threshold;
  layer.column_seeds = mask.column_seeds;
  layer.bias = bias;
  if (bn.empty()) {
    layer.bn.assign(4u * layer.m, 0.0f);
    for (std::uint32_t j = 0; j < layer.m; ++j) {
      layer.bn[j] = 1.0f;                 // gamma
      layer.bn[3u * layer.m + j] = 1.0f;  // variance
    }
  } else {
    layer.bn = bn;
  }

  const Matrix quantized = apply_quant(quant, weights);
  layer.kept_counts.resize(layer.m);
  layer.columns.resize(layer.m);
  for (std::uint32_t j = 0; j < layer.m; ++j) {
    std::vector<float>& column = layer.columns[j];
    for (std::uint32_t i = 0; i < layer.n; ++i)
      if (mask.at(i, j)) column.push_back(quantized(i, j));
    layer.kept_counts[j] = static_cast<std::uint32_t>(column.size());
  }
  return layer;
}

// Rebuilt from the stored per-column seeds, which are authoritative; the
// base seed is informational.
MaskMatrix regenerate_mask(const CompressedLayer& layer) {
  const SngConfig sng = layer.sng();
  if (layer.column_seeds.size() != layer.m)
    throw FormatError("model: column seed count differs from layer outputs");
  MaskMatrix mask;
  mask.rows = layer.n;
  mask.cols = layer.m;
  mask.bits.assign(std::size_t{layer.n} * layer.m, 0);
  mask.column_seeds = layer.column_seeds;
  mask.sng = sng;
  mask.wrapped = sng.lfsr.mode == LfsrMode::maximal && layer.n > sng.lfsr.period();
  for (std::uint32_t j = 0; j < layer.m; ++j) {
    const std::vector<std::uint8_t> column =
        sng_stream(sng, layer.column_seeds[j], layer.n);
    for (std::uint32_t i = 0; i < layer.n; ++i)
      mask.bits[std::size_t{i} * layer.m + j] = column[i];
  }
  return mask;
}

Matrix decompress_layer(const CompressedLayer& layer) {
  const SngConfig sng = layer.sng();
  Matrix out(layer.n, layer.m, 0.0f);
  for (std::uint32_t j = 0; j < layer.m; ++j) {
    const std::vector<std::uint8_t> stream =
        sng_stream(sng, layer.column_seeds[j], layer.n);
    std::size_t next = 0;
    for (std::uint32_t i = 0; i < layer.n; ++i) {
      if (!stream[i]) continue;
      if (next >= layer.columns[j].size())
        throw FormatError("model: column " + std::to_string(j) +
                          " has fewer kept weights than the regenerated mask");
      out(i, j) = layer.columns[j][next++];
    }
    if (next != layer.columns[j].size())
      throw FormatError("model: column " + std::to_string(j) +
                        " has more kept weights than the regenerated mask");
  }
  return out;
}

std::uint64_t neuron_footprint_bits(const CompressedLayer& layer, std::size_t j) {
  if (j >= layer.kept_counts.size())
    throw std::out_of_range("neuron_footprint_bits: column index out of range");
  return static_cast<std::uint64_t>(layer.kept_counts[j]) *
         static_cast<std::uint64_t>(layer.weight_width_bits());
}

std::uint64_t memory_footprint_bits(const CompressedLayer& layer) {
  std::uint64_t total = 0;
  for (std::size_t j = 0; j < layer.kept_counts.size(); ++j)
    total += neuron_footprint_bits(layer, j);
  return total;
}

std::vector<std::uint8_t> serialize(const Model& model) {
  if (model.layers.empty())
    throw std::invalid_argument("serialize: a model must hold at least one layer");
  std::vector<std::uint8_t> payload;
  for (const CompressedLayer& layer : model.layers) append_layer(payload, layer);

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, model.version);
  put_u16(out, static_cast<std::uint16_t>(model.layers.size()));
  put_u64(out, model.config_hash);
  put_u32(out, model.epochs_trained);
  put_u32(out, crc32(payload.data(), payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Model deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader reader(bytes);
  const std::uint8_t* magic = reader.raw(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("model: bad magic", 0);
  Model model;
  const std::size_t version_at = reader.offset();
  model.version = reader.u16("version");
  if (model.version != kVersion)
    throw FormatError("model: unsupported version " + std::to_string(model.version),
                      static_cast<std::int64_t>(version_at));
  const std::size_t count_at = reader.offset();
  const std::uint16_t layer_count = reader.u16("layer count");
  if (layer_count == 0)
    throw FormatError("model: layer count must be >= 1",
                      static_cast<std::int64_t>(count_at));
  model.config_hash = reader.u64("config hash");
  model.epochs_trained = reader.u32("epochs");
  const std::uint32_t stored_crc = reader.u32("checksum");
  const std::uint32_t actual_crc =
      crc32(bytes.data() + kHeaderSize, bytes.size() - kHeaderSize);
  if (stored_crc != actual_crc)
    throw FormatError("model: checksum mismatch", 20);

  for (std::uint16_t l = 0; l < layer_count; ++l) model.layers.push_back(read_layer(reader));
  if (reader.remaining() != 0)
    throw FormatError("model: trailing bytes after last layer",
                      static_cast<std::int64_t>(reader.offset()));
  return model;
}

void save_model(const std::string& path, const Model& model) {
  const std::vector<std::uint8_t> bytes = serialize(model);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_model: cannot open " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("save_model: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("save_model: rename to " + path + " failed");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_model: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Model to_model(const Network<float>& net, std::uint64_t config_hash,
               std::uint32_t epochs_trained) {
  Model model;
  model.config_hash = config_hash;
  model.epochs_trained = epochs_trained;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const SparseAffine<float>& layer = net.layers[l];
    std::vector<float> bn;
    if (l < net.norms.size()) {
      const BatchNorm<float>& norm = net.norms[l];
      bn.insert(bn.end(), norm.gamma.begin(), norm.gamma.end());
      bn.insert(bn.end(), norm.beta.begin(), norm.beta.end());
      bn.insert(bn.end(), norm.running_mean.begin(), norm.running_mean.end());
      bn.insert(bn.end(), norm.running_var.begin(), norm.running_var.end());
    }
    model.layers.push_back(
        compress_layer(layer.weights, layer.mask, layer.quant, layer.bias, bn));
  }
  return model;
}

Network<float> to_network(const Model& model) {
  Network<float> net;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const CompressedLayer& stored = model.layers[l];
    MaskMatrix mask = regenerate_mask(stored);
    Matrix weights = decompress_layer(stored);
    net.layers.push_back(SparseAffine<float>::make(
        std::move(weights), stored.bias, std::move(mask), stored.quant));
    if (l + 1 < model.layers.size()) {
      BatchNorm<float> bn = BatchNorm<float>::make(stored.m);
      const std::size_t m = stored.m;
      bn.gamma.assign(stored.bn.begin(), stored.bn.begin() + m);
      bn.beta.assign(stored.bn.begin() + m, stored.bn.begin() + 2 * m);
      bn.running_mean.assign(stored.bn.begin() + 2 * m, stored.bn.begin() + 3 * m);
      bn.running_var.assign(stored.bn.begin() + 3 * m, stored.bn.begin() + 4 * m);
      net.norms.push_back(std::move(bn));
    }
  }
  return net;
}

std::uint64_t stored_weight_count(const Model& model) {
  std::uint64_t total = 0;
  for (const CompressedLayer& layer : model.layers)
    for (std::uint32_t c : layer.kept_counts) total += c;
  return total;
}

}  // namespace spnn
