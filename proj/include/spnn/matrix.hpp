#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <thread>
#include <vector>

namespace spnn {

// Dense row-major matrix. Training state is single-precision; the double
// instantiation exists for the gradient-check harnesses.
template <typename T>
class Mat {
 public:
  Mat() = default;

  Mat(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Mat(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("Mat: data length does not match shape");
  }

  static Mat from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    Mat m;
    m.rows_ = rows.size();
    m.cols_ = rows.size() ? rows.begin()->size() : 0;
    m.data_.reserve(m.rows_ * m.cols_);
    for (const auto& r : rows) {
      if (r.size() != m.cols_)
        throw std::invalid_argument("Mat: ragged initializer");
      m.data_.insert(m.data_.end(), r.begin(), r.end());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  T operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  T* row(std::size_t i) { return data_.data() + i * cols_; }
  const T* row(std::size_t i) const { return data_.data() + i * cols_; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Mat<float>;
using MatrixD = Mat<double>;

namespace detail {
inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{0};  // 0 = pick from hardware
  return cap;
}
}  // namespace detail

inline void set_max_threads(int n) { detail::thread_cap().store(n); }

inline int max_threads() {
  int cap = detail::thread_cap().load();
  if (cap > 0) return cap;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

// ikj loop: for each output element the k-terms accumulate left to right, so
// results do not depend on blocking or on the row partition used by threads.
template <typename T>
void matmul_rows(const Mat<T>& a, const Mat<T>& b, Mat<T>& out,
                 std::size_t row_begin, std::size_t row_end) {
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  for (std::size_t i = row_begin; i < row_end; ++i) {
    T* out_row = out.row(i);
    const T* a_row = a.row(i);
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = a_row[k];
      const T* b_row = b.row(k);
      for (std::size_t j = 0; j < cols; ++j) out_row[j] += aik * b_row[j];
    }
  }
}

}  // namespace detail

template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  Mat<T> out(a.rows(), b.cols(), T{});
  const int want = max_threads();
  const std::size_t work = a.rows() * a.cols() * b.cols();
  if (want <= 1 || work < (1u << 18) || a.rows() < 2) {
    detail::matmul_rows(a, b, out, 0, a.rows());
    return out;
  }
  const std::size_t nthreads =
      std::min<std::size_t>(static_cast<std::size_t>(want), a.rows());
  std::vector<std::thread> workers;
  workers.reserve(nthreads);
  const std::size_t chunk = (a.rows() + nthreads - 1) / nthreads;
  for (std::size_t t = 0; t < nthreads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(a.rows(), lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back(
        [&, lo, hi] { detail::matmul_rows(a, b, out, lo, hi); });
  }
  for (auto& w : workers) w.join();
  return out;
}

template <typename T>
Mat<T> hadamard(const Mat<T>& a, const Mat<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("hadamard: shapes differ");
  Mat<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i)
    out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
  Mat<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
bool has_nonfinite(const Mat<T>& a) {
  for (T v : a.data())
    if (!std::isfinite(v)) return true;
  return false;
}

}  // namespace spnn
