#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spnn/common.hpp"
#include "spnn/layers.hpp"

namespace spnn {

// Shape and masking recipe for a multilayer perceptron: every affine layer is
// mask-gated, hidden layers are followed by batch norm then ReLU, and the
// final layer emits raw scores for the hinge loss.
struct NetworkSpec {
  std::vector<int> shape;        // e.g. {784, 512, 512, 10}
  std::vector<double> sparsity;  // one entry per affine layer
  QuantMode quant = QuantMode::none;
  LfsrMode mask_mode = LfsrMode::debruijn;
  std::uint32_t mask_seed = 1;

  std::size_t layer_count() const noexcept {
    return shape.empty() ? 0 : shape.size() - 1;
  }

  void validate() const {
    if (shape.size() < 2)
      throw std::invalid_argument("NetworkSpec: need at least input and output widths");
    for (int w : shape)
      if (w < 1) throw std::invalid_argument("NetworkSpec: layer widths must be >= 1");
    if (sparsity.size() != layer_count())
      throw std::invalid_argument("NetworkSpec: one sparsity per layer required");
    for (double p : sparsity)
      if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument("NetworkSpec: sparsity must lie in [0, 1)");
    if (mask_seed == 0)
      throw std::invalid_argument("NetworkSpec: mask seed must be nonzero");
  }
};

template <typename T>
struct Network {
  std::vector<SparseAffine<T>> layers;  // L affine layers
  std::vector<BatchNorm<T>> norms;      // L-1, norms[i] follows layers[i]

  std::size_t input_width() const { return layers.front().in_features(); }
  std::size_t output_width() const { return layers.back().out_features(); }
};

// Uniform fill in ±limit from the counter stream, so identical
// (key, counter_base) always produce identical weights.
template <typename T>
void init_uniform_limit(Mat<T>& w, std::uint64_t key, std::uint64_t counter_base,
                        T limit) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    const T u = uniform01<T>(rand_at(key, counter_base + i));
    w.data()[i] = (T(2) * u - T(1)) * limit;
  }
}

template <typename T>
void init_uniform(Mat<T>& w, std::uint64_t key, std::uint64_t counter_base) {
  init_uniform_limit(w, key, counter_base,
                     std::sqrt(T(6) / static_cast<T>(w.rows() + w.cols())));
}

template <typename T>
Network<T> make_network(const NetworkSpec& spec, std::uint64_t init_key) {
  spec.validate();
  Network<T> net;
  std::uint64_t counter = 0;
  std::uint32_t seed_offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t n = static_cast<std::size_t>(spec.shape[l]);
    const std::size_t m = static_cast<std::size_t>(spec.shape[l + 1]);
    const int nb = suggested_lfsr_width(n);
    const std::uint32_t base_seed =
        static_cast<std::uint32_t>((static_cast<std::uint64_t>(spec.mask_seed) - 1 + seed_offset) %
                                   ((1u << nb) - 1)) + 1;
    SngConfig sng(LfsrConfig(nb, base_seed, spec.mask_mode), 1.0 - spec.sparsity[l]);
    MaskMatrix mask = generate_mask(n, m, sng, base_seed);

    Mat<T> w(n, m);
    if (spec.quant == QuantMode::ternary) {
      // Deterministic ternarization zeroes every weight below 1/3 in
      // magnitude; a fan-in-scaled init would start (and stay) all-zero, so
      // ternary layers draw from the full clip range instead.
      init_uniform_limit(w, init_key, counter, T(1));
    } else {
      init_uniform(w, init_key, counter);
    }
    counter += n * m;
    net.layers.push_back(SparseAffine<T>::make(std::move(w), std::vector<T>(m, T{}),
                                               std::move(mask), spec.quant));
    if (l + 1 < spec.layer_count()) net.norms.push_back(BatchNorm<T>::make(m));
    seed_offset += static_cast<std::uint32_t>(m);
  }
  return net;
}

template <typename T>
struct ForwardTrace {
  std::vector<AffineCache<T>> affine;
  std::vector<BnCache<T>> bn;
  std::vector<Mat<T>> relu_out;
};

// Scores for a batch. A trace is only collected when requested (training).
template <typename T>
Mat<T> network_forward(Network<T>& net, const Mat<T>& x, Phase phase,
                       WeightPhase weights, ForwardTrace<T>* trace = nullptr) {
  Mat<T> current = x;
  const std::size_t last = net.layers.size() - 1;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto [pre, cache] = sparse_forward(net.layers[l], current, weights);
    if (trace) trace->affine.push_back(std::move(cache));
    if (l == last) {
      current = std::move(pre);
      break;
    }
    auto [normed, bn_cache] = batchnorm_forward(net.norms[l], pre, phase);
    if (trace) trace->bn.push_back(std::move(bn_cache));
    current = relu_forward(normed);
    if (trace) trace->relu_out.push_back(current);
  }
  return current;
}

template <typename T>
struct NetworkGrads {
  std::vector<AffineGrads<T>> affine;
  std::vector<BnGrads<T>> bn;
};

template <typename T>
NetworkGrads<T> network_backward(Network<T>& net, const ForwardTrace<T>& trace,
                                 const Mat<T>& grad_scores) {
  const std::size_t layer_count = net.layers.size();
  NetworkGrads<T> grads;
  grads.affine.resize(layer_count);
  grads.bn.resize(net.norms.size());
  Mat<T> grad = grad_scores;
  for (std::size_t l = layer_count; l-- > 0;) {
    if (l + 1 < layer_count) {
      grad = relu_backward(trace.relu_out[l], grad);
      BnGrads<T> bn = batchnorm_backward(net.norms[l], trace.bn[l], grad);
      grad = std::move(bn.input);
      grads.bn[l] = std::move(bn);
    }
    AffineGrads<T> affine = sparse_backward(net.layers[l], trace.affine[l], grad);
    grad = std::move(affine.input);
    grads.affine[l] = std::move(affine);
  }
  return grads;
}

template <typename T>
void apply_sgd(Network<T>& net, const NetworkGrads<T>& grads, T lr) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    apply_update(net.layers[l], grads.affine[l], lr);
    clip_weights(net.layers[l]);
  }
  for (std::size_t l = 0; l < net.norms.size(); ++l) {
    BatchNorm<T>& bn = net.norms[l];
    for (std::size_t j = 0; j < bn.features(); ++j) {
      bn.gamma[j] -= lr * grads.bn[l].gamma[j];
      bn.beta[j] -= lr * grads.bn[l].beta[j];
    }
  }
}

}  // namespace spnn
