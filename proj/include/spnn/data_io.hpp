#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spnn/matrix.hpp"

namespace spnn {

struct Dataset {
  Matrix images;            // count×dim, pixel values scaled to [0, 1]
  std::vector<int> labels;  // count entries in [0, 9]

  std::size_t size() const noexcept { return labels.size(); }
};

// The 60000-image training file carved into 40000/10000/10000; the official
// 10000-image test file is kept alongside so both test sets can be reported.
struct MnistSplit {
  Dataset train;
  Dataset validation;
  Dataset test_carved;
  Dataset test_official;
};

// Whole file contents; transparently gunzips when the gzip magic is present.
std::vector<std::uint8_t> read_file(const std::string& path);

// IDX image file: big-endian magic 0x00000803, then count/rows/cols and raw
// bytes. Returns count×(rows·cols) bytes.
Mat<std::uint8_t> parse_idx_images(const std::vector<std::uint8_t>& bytes);

// IDX label file: big-endian magic 0x00000801, then count and raw bytes,
// each in [0, 9].
std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes);

MnistSplit make_split(const Mat<std::uint8_t>& train_images,
                      const std::vector<int>& train_labels,
                      const Mat<std::uint8_t>& test_images,
                      const std::vector<int>& test_labels);

// Loads the four standard MNIST files (plain or .gz) from a directory.
MnistSplit load_mnist(const std::string& data_dir);

}  // namespace spnn
