#include "spnn/data_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "spnn/common.hpp"

namespace spnn {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  if (at + 4 > bytes.size())
    throw FormatError("idx: truncated header", static_cast<std::int64_t>(at));
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in) {
  z_stream strm{};
  if (inflateInit2(&strm, 15 + 16) != Z_OK)
    throw std::runtime_error("gunzip: inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::uint8_t buffer[1 << 16];
  strm.next_in = const_cast<Bytef*>(in.data());
  strm.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    strm.next_out = buffer;
    strm.avail_out = sizeof(buffer);
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw FormatError("gunzip: corrupt stream (zlib rc " + std::to_string(rc) + ")");
    }
    out.insert(out.end(), buffer, buffer + (sizeof(buffer) - strm.avail_out));
  } while (rc != Z_STREAM_END);
  inflateEnd(&strm);
  return out;
}

Dataset slice(const Mat<std::uint8_t>& images, const std::vector<int>& labels,
              std::size_t begin, std::size_t count) {
  Dataset out;
  out.images = Matrix(count, images.cols());
  out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
  const float scale = 1.0f / 255.0f;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* src = images.row(begin + i);
    float* dst = out.images.row(i);
    for (std::size_t j = 0; j < images.cols(); ++j) dst[j] = src[j] * scale;
  }
  return out;
}

bool file_exists(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return f.good();
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    return gunzip(bytes);
  return bytes;
}

Mat<std::uint8_t> parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic)
    throw FormatError("idx: bad image magic 0x" + std::to_string(magic), 0);
  const std::uint64_t count = read_be32(bytes, 4);
  const std::uint64_t rows = read_be32(bytes, 8);
  const std::uint64_t cols = read_be32(bytes, 12);
  const std::uint64_t pixels = count * rows * cols;
  if (rows > 4096 || cols > 4096 || pixels > (std::uint64_t{1} << 33))
    throw FormatError("idx: dimensions overflow sane limits", 4);
  if (bytes.size() < 16 + pixels)
    throw FormatError("idx: truncated image payload",
                      static_cast<std::int64_t>(bytes.size()));
  if (bytes.size() > 16 + pixels)
    throw FormatError("idx: trailing bytes after image payload",
                      static_cast<std::int64_t>(16 + pixels));
  Mat<std::uint8_t> images(static_cast<std::size_t>(count),
                           static_cast<std::size_t>(rows * cols));
  if (pixels > 0) std::memcpy(images.data().data(), bytes.data() + 16, pixels);
  return images;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kLabelMagic)
    throw FormatError("idx: bad label magic 0x" + std::to_string(magic), 0);
  const std::uint64_t count = read_be32(bytes, 4);
  if (bytes.size() < 8 + count)
    throw FormatError("idx: truncated label payload",
                      static_cast<std::int64_t>(bytes.size()));
  if (bytes.size() > 8 + count)
    throw FormatError("idx: trailing bytes after label payload",
                      static_cast<std::int64_t>(8 + count));
  std::vector<int> labels(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint8_t v = bytes[8 + i];
    if (v > 9)
      throw FormatError("idx: label value " + std::to_string(v) + " out of range",
                        static_cast<std::int64_t>(8 + i));
    labels[i] = v;
  }
  return labels;
}

MnistSplit make_split(const Mat<std::uint8_t>& train_images,
                      const std::vector<int>& train_labels,
                      const Mat<std::uint8_t>& test_images,
                      const std::vector<int>& test_labels) {
  if (train_images.rows() != train_labels.size())
    throw FormatError("split: training image/label counts differ");
  if (test_images.rows() != test_labels.size())
    throw FormatError("split: test image/label counts differ");
  if (train_images.rows() != 60000)
    throw FormatError("split: expected 60000 training images, got " +
                      std::to_string(train_images.rows()));
  if (test_images.rows() != 10000)
    throw FormatError("split: expected 10000 test images, got " +
                      std::to_string(test_images.rows()));
  if (train_images.cols() != test_images.cols())
    throw FormatError("split: image sizes differ between files");

  MnistSplit split;
  split.train = slice(train_images, train_labels, 0, 40000);
  split.validation = slice(train_images, train_labels, 40000, 10000);
  split.test_carved = slice(train_images, train_labels, 50000, 10000);
  split.test_official = slice(test_images, test_labels, 0, 10000);
  return split;
}

MnistSplit load_mnist(const std::string& data_dir) {
  auto resolve = [&data_dir](const std::string& name) {
    const std::string base = data_dir + "/" + name;
    for (const std::string& candidate : {base, base + ".gz"})
      if (file_exists(candidate)) return candidate;
    throw FormatError("mnist: missing " + base + "[.gz]");
  };
  const auto train_images = parse_idx_images(read_file(resolve("train-images-idx3-ubyte")));
  const auto train_labels = parse_idx_labels(read_file(resolve("train-labels-idx1-ubyte")));
  const auto test_images = parse_idx_images(read_file(resolve("t10k-images-idx3-ubyte")));
  const auto test_labels = parse_idx_labels(read_file(resolve("t10k-labels-idx1-ubyte")));
  return make_split(train_images, train_labels, test_images, test_labels);
}

}  // namespace spnn
