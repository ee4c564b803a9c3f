#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spnn/matrix.hpp"
#include "spnn/quantize.hpp"
#include "spnn/sng.hpp"

namespace spnn {

// Affine layer gated by a fixed binary mask. The stored weights stay
// real-valued in every mode; whatever a pass multiplies by is
// quantize-then-mask, so masked positions contribute exactly zero.
template <typename T>
struct SparseAffine {
  Mat<T> weights;       // n×m
  std::vector<T> bias;  // m
  MaskMatrix mask;      // n×m
  Mat<T> mask_vals;     // mask bits as T, cached for elementwise products
  QuantMode quant = QuantMode::none;
  std::uint64_t revision = 0;  // bumped on every parameter change

  std::size_t in_features() const noexcept { return weights.rows(); }
  std::size_t out_features() const noexcept { return weights.cols(); }

  static SparseAffine make(Mat<T> weights, std::vector<T> bias,
                           MaskMatrix mask, QuantMode quant) {
    if (mask.rows != weights.rows() || mask.cols != weights.cols())
      throw std::invalid_argument("SparseAffine: mask shape differs from weights");
    if (bias.size() != weights.cols())
      throw std::invalid_argument("SparseAffine: bias length differs from outputs");
    SparseAffine layer;
    layer.mask_vals = mask_values<T>(mask);
    layer.weights = std::move(weights);
    layer.bias = std::move(bias);
    layer.mask = std::move(mask);
    layer.quant = quant;
    return layer;
  }
};

template <typename T>
Mat<T> effective_weights(const SparseAffine<T>& layer, WeightPhase phase) {
  if (layer.quant == QuantMode::none || phase == WeightPhase::test_real)
    return hadamard(layer.weights, layer.mask_vals);
  return hadamard(apply_quant(layer.quant, layer.weights), layer.mask_vals);
}

template <typename T>
struct AffineCache {
  Mat<T> input;   // batch×n
  Mat<T> w_eff;   // n×m, the weights the forward pass used
  std::uint64_t revision = 0;
};

template <typename T>
struct AffineGrads {
  Mat<T> weights;        // n×m, zero at masked positions
  std::vector<T> bias;   // m
  Mat<T> input;          // batch×n
};

// Pre-activation x·W_eff + b. Activation and batch norm are applied by the
// network composition, not here.
template <typename T>
std::pair<Mat<T>, AffineCache<T>> sparse_forward(const SparseAffine<T>& layer,
                                                 const Mat<T>& x,
                                                 WeightPhase phase) {
  if (x.cols() != layer.in_features())
    throw std::invalid_argument("sparse_forward: input width mismatch");
  AffineCache<T> cache;
  cache.w_eff = effective_weights(layer, phase);
  cache.input = x;
  cache.revision = layer.revision;
  Mat<T> out = matmul(x, cache.w_eff);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    T* row = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] += layer.bias[j];
  }
  return {std::move(out), std::move(cache)};
}

template <typename T>
AffineGrads<T> sparse_backward(const SparseAffine<T>& layer,
                               const AffineCache<T>& cache,
                               const Mat<T>& grad_out) {
  if (cache.revision != layer.revision)
    throw std::logic_error("sparse_backward: cache is stale, rerun forward");
  if (grad_out.rows() != cache.input.rows() ||
      grad_out.cols() != layer.out_features())
    throw std::invalid_argument("sparse_backward: gradient shape mismatch");
  AffineGrads<T> grads;
  // Masking the weight gradient keeps removed connections at their initial
  // values for the whole training trajectory.
  grads.weights =
      hadamard(matmul(transpose(cache.input), grad_out), layer.mask_vals);
  grads.bias.assign(layer.out_features(), T{});
  for (std::size_t i = 0; i < grad_out.rows(); ++i) {
    const T* row = grad_out.row(i);
    for (std::size_t j = 0; j < grad_out.cols(); ++j) grads.bias[j] += row[j];
  }
  grads.input = matmul(grad_out, transpose(cache.w_eff));
  return grads;
}

template <typename T>
void apply_update(SparseAffine<T>& layer, const AffineGrads<T>& grads, T lr) {
  for (std::size_t i = 0; i < layer.weights.size(); ++i)
    layer.weights.data()[i] -= lr * grads.weights.data()[i];
  for (std::size_t j = 0; j < layer.bias.size(); ++j)
    layer.bias[j] -= lr * grads.bias[j];
  ++layer.revision;
}

// No-op unless the layer trains quantized.
template <typename T>
void clip_weights(SparseAffine<T>& layer) {
  if (layer.quant == QuantMode::none) return;
  clip_inplace(layer.weights, T(-1), T(1));
  ++layer.revision;
}

template <typename T>
Mat<T> relu_forward(const Mat<T>& x) {
  Mat<T> y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i)
    y.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
  return y;
}

// cache is the forward output; the subgradient at zero is zero.
template <typename T>
Mat<T> relu_backward(const Mat<T>& cache, const Mat<T>& grad_out) {
  if (cache.rows() != grad_out.rows() || cache.cols() != grad_out.cols())
    throw std::invalid_argument("relu_backward: shape mismatch");
  Mat<T> grad(grad_out.rows(), grad_out.cols());
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad.data()[i] = cache.data()[i] > T(0) ? grad_out.data()[i] : T(0);
  return grad;
}

enum class Phase { train, infer };

template <typename T>
struct BatchNorm {
  std::vector<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  T epsilon = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.9);

  static BatchNorm make(std::size_t features) {
    BatchNorm bn;
    bn.gamma.assign(features, T(1));
    bn.beta.assign(features, T(0));
    bn.running_mean.assign(features, T(0));
    bn.running_var.assign(features, T(1));
    return bn;
  }

  std::size_t features() const noexcept { return gamma.size(); }
};

template <typename T>
struct BnCache {
  Mat<T> x_hat;              // normalized pre-scale values
  std::vector<T> inv_std;    // per feature
};

template <typename T>
struct BnGrads {
  Mat<T> input;
  std::vector<T> gamma, beta;
};

// Train phase normalizes by batch statistics and folds them into the running
// averages; infer phase uses the running averages only.
template <typename T>
std::pair<Mat<T>, BnCache<T>> batchnorm_forward(BatchNorm<T>& bn,
                                                const Mat<T>& x, Phase phase) {
  if (x.cols() != bn.features())
    throw std::invalid_argument("batchnorm_forward: feature count mismatch");
  const std::size_t batch = x.rows();
  const std::size_t f = bn.features();
  Mat<T> y(batch, f);
  BnCache<T> cache;

  if (phase == Phase::infer) {
    for (std::size_t j = 0; j < f; ++j) {
      const T inv = T(1) / std::sqrt(bn.running_var[j] + bn.epsilon);
      for (std::size_t i = 0; i < batch; ++i)
        y(i, j) = bn.gamma[j] * ((x(i, j) - bn.running_mean[j]) * inv) + bn.beta[j];
    }
    return {std::move(y), std::move(cache)};
  }

  if (batch < 2)
    throw std::invalid_argument(
        "batchnorm_forward: batch of 1 has degenerate variance");

  std::vector<T> mean(f, T{});
  std::vector<T> var(f, T{});
  for (std::size_t i = 0; i < batch; ++i) {
    const T* row = x.row(i);
    for (std::size_t j = 0; j < f; ++j) mean[j] += row[j];
  }
  const T inv_batch = T(1) / static_cast<T>(batch);
  for (std::size_t j = 0; j < f; ++j) mean[j] *= inv_batch;
  for (std::size_t i = 0; i < batch; ++i) {
    const T* row = x.row(i);
    for (std::size_t j = 0; j < f; ++j) {
      const T d = row[j] - mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < f; ++j) var[j] *= inv_batch;

  cache.x_hat = Mat<T>(batch, f);
  cache.inv_std.resize(f);
  for (std::size_t j = 0; j < f; ++j)
    cache.inv_std[j] = T(1) / std::sqrt(var[j] + bn.epsilon);
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t j = 0; j < f; ++j) {
      const T xh = (x(i, j) - mean[j]) * cache.inv_std[j];
      cache.x_hat(i, j) = xh;
      y(i, j) = bn.gamma[j] * xh + bn.beta[j];
    }
  for (std::size_t j = 0; j < f; ++j) {
    bn.running_mean[j] = bn.momentum * bn.running_mean[j] + (T(1) - bn.momentum) * mean[j];
    bn.running_var[j] = bn.momentum * bn.running_var[j] + (T(1) - bn.momentum) * var[j];
  }
  return {std::move(y), std::move(cache)};
}

template <typename T>
BnGrads<T> batchnorm_backward(const BatchNorm<T>& bn, const BnCache<T>& cache,
                              const Mat<T>& grad_out) {
  const std::size_t batch = grad_out.rows();
  const std::size_t f = bn.features();
  if (cache.x_hat.rows() != batch || cache.x_hat.cols() != f)
    throw std::logic_error("batchnorm_backward: cache does not match gradient");
  BnGrads<T> grads;
  grads.gamma.assign(f, T{});
  grads.beta.assign(f, T{});
  for (std::size_t i = 0; i < batch; ++i) {
    const T* g = grad_out.row(i);
    const T* xh = cache.x_hat.row(i);
    for (std::size_t j = 0; j < f; ++j) {
      grads.gamma[j] += g[j] * xh[j];
      grads.beta[j] += g[j];
    }
  }
  grads.input = Mat<T>(batch, f);
  const T inv_batch = T(1) / static_cast<T>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const T* g = grad_out.row(i);
    const T* xh = cache.x_hat.row(i);
    for (std::size_t j = 0; j < f; ++j) {
      const T centered = static_cast<T>(batch) * g[j] - grads.beta[j] -
                         xh[j] * grads.gamma[j];
      grads.input(i, j) = bn.gamma[j] * cache.inv_std[j] * inv_batch * centered;
    }
  }
  return grads;
}

}  // namespace spnn
