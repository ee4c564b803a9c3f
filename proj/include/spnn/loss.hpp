#pragma once

#include <stdexcept>
#include <vector>

#include "spnn/matrix.hpp"

namespace spnn {

template <typename T>
struct HingeLoss {
  double value = 0.0;
  Mat<T> grad;  // d loss / d scores
};

// One-vs-all squared hinge: targets are +1 for the labeled class and -1
// elsewhere; loss is the batch mean of sum_k max(0, 1 - t_k s_k)^2.
template <typename T>
HingeLoss<T> squared_hinge_loss(const Mat<T>& scores,
                                const std::vector<int>& labels) {
  const std::size_t batch = scores.rows();
  const std::size_t classes = scores.cols();
  if (labels.size() != batch)
    throw std::invalid_argument("squared_hinge_loss: one label per row required");
  HingeLoss<T> result;
  result.grad = Mat<T>(batch, classes);
  const T inv_batch = T(1) / static_cast<T>(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw std::invalid_argument("squared_hinge_loss: label out of range");
    const T* s = scores.row(i);
    T* g = result.grad.row(i);
    for (std::size_t k = 0; k < classes; ++k) {
      const T target = static_cast<std::size_t>(labels[i]) == k ? T(1) : T(-1);
      const T margin = T(1) - target * s[k];
      const T active = margin > T(0) ? margin : T(0);
      total += static_cast<double>(active) * static_cast<double>(active);
      g[k] = T(-2) * target * active * inv_batch;
    }
  }
  result.value = total / static_cast<double>(batch);
  return result;
}

}  // namespace spnn
