#include <zlib.h>

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "spnn/common.hpp"
#include "spnn/data_io.hpp"

using namespace spnn;

namespace {

// Independent fixture writer: bytes assembled by hand, big-endian fields.
void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> image_fixture(std::uint32_t count, std::uint32_t rows,
                                        std::uint32_t cols,
                                        const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, 0x00000803);
  put_be32(bytes, count);
  put_be32(bytes, rows);
  put_be32(bytes, cols);
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  return bytes;
}

std::vector<std::uint8_t> label_fixture(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> bytes;
  put_be32(bytes, 0x00000801);
  put_be32(bytes, static_cast<std::uint32_t>(labels.size()));
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  return bytes;
}

std::vector<std::uint8_t> gzip_bytes(const std::vector<std::uint8_t>& in) {
  z_stream strm{};
  REQUIRE(deflateInit2(&strm, Z_BEST_SPEED, Z_DEFLATED, 15 + 16, 8,
                       Z_DEFAULT_STRATEGY) == Z_OK);
  std::vector<std::uint8_t> out(deflateBound(&strm, in.size()) + 32);
  strm.next_in = const_cast<Bytef*>(in.data());
  strm.avail_in = static_cast<uInt>(in.size());
  strm.next_out = out.data();
  strm.avail_out = static_cast<uInt>(out.size());
  REQUIRE(deflate(&strm, Z_FINISH) == Z_STREAM_END);
  out.resize(out.size() - strm.avail_out);
  deflateEnd(&strm);
  return out;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("a 4-image fixture parses to the exact tensor") {
  std::vector<std::uint8_t> pixels(4 * 2 * 3);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<std::uint8_t>(7 * i + 3);
  const auto images = parse_idx_images(image_fixture(4, 2, 3, pixels));
  CHECK(images.rows() == 4);
  CHECK(images.cols() == 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(images(i, j) == pixels[i * 6 + j]);
}

TEST_CASE("an empty image file is fine, malformed ones are not") {
  SUBCASE("zero images") {
    const auto images = parse_idx_images(image_fixture(0, 28, 28, {}));
    CHECK(images.rows() == 0);
  }
  SUBCASE("wrong magic") {
    auto bytes = image_fixture(1, 2, 2, {1, 2, 3, 4});
    bytes[3] = 0x01;
    CHECK_THROWS_WITH_AS(parse_idx_images(bytes), doctest::Contains("magic"),
                         FormatError);
  }
  SUBCASE("truncated payload") {
    auto bytes = image_fixture(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
    bytes.resize(bytes.size() - 2);
    CHECK_THROWS_WITH_AS(parse_idx_images(bytes), doctest::Contains("truncated"),
                         FormatError);
  }
  SUBCASE("trailing bytes") {
    auto bytes = image_fixture(1, 2, 2, {1, 2, 3, 4});
    bytes.push_back(0);
    CHECK_THROWS_WITH_AS(parse_idx_images(bytes), doctest::Contains("trailing"),
                         FormatError);
  }
  SUBCASE("absurd dimensions") {
    std::vector<std::uint8_t> bytes;
    put_be32(bytes, 0x00000803);
    put_be32(bytes, 0xFFFFFFFF);
    put_be32(bytes, 0xFFFF);
    put_be32(bytes, 0xFFFF);
    CHECK_THROWS_AS(parse_idx_images(bytes), FormatError);
  }
}

TEST_CASE("labels parse, range-checked") {
  const auto labels = parse_idx_labels(label_fixture({0, 5, 9, 3}));
  CHECK(labels == std::vector<int>{0, 5, 9, 3});
  CHECK_THROWS_WITH_AS(parse_idx_labels(label_fixture({0, 10})),
                       doctest::Contains("out of range"), FormatError);
  auto bad_magic = label_fixture({1});
  bad_magic[3] = 0x03;
  CHECK_THROWS_AS(parse_idx_labels(bad_magic), FormatError);
}

TEST_CASE("gzip-compressed files load transparently") {
  std::vector<std::uint8_t> pixels(2 * 2 * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<std::uint8_t>(31 * i);
  const auto plain = image_fixture(2, 2, 2, pixels);
  const std::string path = "test_data_io_tmp.idx.gz";
  write_file(path, gzip_bytes(plain));
  CHECK(read_file(path) == plain);
  const auto images = parse_idx_images(read_file(path));
  CHECK(images(1, 3) == pixels[7]);
  std::remove(path.c_str());
}

TEST_CASE("the split is 40000/10000/10000, contiguous and scaled") {
  // 2x2 images keep the synthetic 60000-image file small; the split logic
  // only cares about counts.
  std::vector<std::uint8_t> train_pixels(60000 * 4);
  std::vector<std::uint8_t> train_labels(60000);
  CounterRng rng(0xDA7A);
  for (std::size_t i = 0; i < 60000; ++i) {
    train_labels[i] = static_cast<std::uint8_t>(rng.next_below(10));
    for (int j = 0; j < 4; ++j)
      train_pixels[i * 4 + j] = static_cast<std::uint8_t>(rng.next_below(256));
  }
  train_pixels[0] = 255;  // pin the scaling check
  std::vector<std::uint8_t> test_pixels(10000 * 4, 17);
  std::vector<std::uint8_t> test_labels(10000, 1);

  const auto train_images = parse_idx_images(image_fixture(60000, 2, 2, train_pixels));
  const auto parsed_train_labels = parse_idx_labels(label_fixture(train_labels));
  const auto test_images = parse_idx_images(image_fixture(10000, 2, 2, test_pixels));
  const auto parsed_test_labels = parse_idx_labels(label_fixture(test_labels));

  const MnistSplit split =
      make_split(train_images, parsed_train_labels, test_images, parsed_test_labels);
  CHECK(split.train.size() == 40000);
  CHECK(split.validation.size() == 10000);
  CHECK(split.test_carved.size() == 10000);
  CHECK(split.test_official.size() == 10000);

  // no shuffle at split time; partitions are contiguous and disjoint
  CHECK(split.train.images(0, 0) == 1.0f);  // pixel 255 scales to exactly 1
  CHECK(split.train.labels[0] == train_labels[0]);
  CHECK(split.validation.labels[0] == train_labels[40000]);
  CHECK(split.test_carved.labels[9999] == train_labels[59999]);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(split.train.images(i, 1) ==
          doctest::Approx(train_pixels[i * 4 + 1] / 255.0f));
    CHECK(split.validation.images(i, 2) ==
          doctest::Approx(train_pixels[(40000 + i) * 4 + 2] / 255.0f));
    CHECK(split.test_carved.images(i, 3) ==
          doctest::Approx(train_pixels[(50000 + i) * 4 + 3] / 255.0f));
  }
}

TEST_CASE("count mismatches are rejected") {
  const auto images = parse_idx_images(image_fixture(3, 1, 1, {1, 2, 3}));
  const std::vector<int> labels{0, 1, 2};
  CHECK_THROWS_AS(make_split(images, labels, images, labels), FormatError);
  const auto two_labels = parse_idx_labels(label_fixture({0, 1}));
  CHECK_THROWS_AS(make_split(images, two_labels, images, labels), FormatError);
}
