#pragma once

#include <cstdint>

#include "spnn/matrix.hpp"

namespace spnn {

enum class QuantMode : std::uint8_t { none = 0, binary = 1, ternary = 2 };

// Which weights a pass sees: quantized levels while learning, and either the
// retained real weights or the quantized levels at test time.
enum class WeightPhase { train, test_real, test_quantized };

inline const char* to_string(QuantMode q) {
  switch (q) {
    case QuantMode::none: return "none";
    case QuantMode::binary: return "binary";
    case QuantMode::ternary: return "ternary";
  }
  return "?";
}

// Entrywise +1 / -1; zero lands on the +1 side.
template <typename T>
Mat<T> binarize(const Mat<T>& w) {
  Mat<T> out(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.size(); ++i)
    out.data()[i] = w.data()[i] >= T(0) ? T(1) : T(-1);
  return out;
}

// Entrywise +1 at or above 1/3, -1 at or below -1/3, 0 between.
template <typename T>
Mat<T> ternarize(const Mat<T>& w) {
  const T third = static_cast<T>(1.0 / 3.0);
  Mat<T> out(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const T v = w.data()[i];
    out.data()[i] = v >= third ? T(1) : (v <= -third ? T(-1) : T(0));
  }
  return out;
}

template <typename T>
Mat<T> apply_quant(QuantMode mode, const Mat<T>& w) {
  switch (mode) {
    case QuantMode::binary: return binarize(w);
    case QuantMode::ternary: return ternarize(w);
    case QuantMode::none: break;
  }
  return w;
}

template <typename T>
void clip_inplace(Mat<T>& w, T lo, T hi) {
  for (T& v : w.data()) v = v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace spnn
