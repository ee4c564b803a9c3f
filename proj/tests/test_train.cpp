#include <cmath>

#include "doctest.h"
#include "spnn/common.hpp"
#include "spnn/loss.hpp"
#include "spnn/train.hpp"
#include "test_support.hpp"

using namespace spnn;

namespace {

Dataset synthetic_dataset(std::size_t count, std::size_t dim, std::size_t classes,
                          std::uint64_t key) {
  CounterRng rng(key);
  Dataset data;
  data.images = Matrix(count, dim);
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(rng.next_below(classes));
    data.labels[i] = label;
    for (std::size_t j = 0; j < dim; ++j) {
      // class-dependent blob plus noise, learnable by a tiny network
      const float center = (j % classes) == static_cast<std::size_t>(label) ? 0.8f : 0.2f;
      data.images(i, j) = center + 0.1f * (rng.next01<float>() - 0.5f);
    }
  }
  return data;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.shape = {8, 6, 4};
  cfg.sparsity = {0.5, 0.25};
  cfg.batch_size = 5;
  cfg.epochs = 3;
  cfg.learning_rate = 0.05;
  cfg.rng_seed = 42;
  cfg.mask_seed = 7;
  return cfg;
}

bool networks_identical(const Network<float>& a, const Network<float>& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (!(a.layers[l].weights == b.layers[l].weights)) return false;
    if (a.layers[l].bias != b.layers[l].bias) return false;
    if (a.layers[l].mask.bits != b.layers[l].mask.bits) return false;
  }
  for (std::size_t l = 0; l < a.norms.size(); ++l) {
    if (a.norms[l].gamma != b.norms[l].gamma) return false;
    if (a.norms[l].beta != b.norms[l].beta) return false;
    if (a.norms[l].running_mean != b.norms[l].running_mean) return false;
    if (a.norms[l].running_var != b.norms[l].running_var) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a zero learning rate leaves parameters bitwise unchanged") {
  TrainConfig cfg = tiny_config();
  const Dataset data = synthetic_dataset(20, 8, 4, 1);
  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  const Network<float> before = net;
  train_epoch(net, data, cfg, 0.0, 0);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(net.layers[l].weights == before.layers[l].weights);
    CHECK(net.layers[l].bias == before.layers[l].bias);
  }
  for (std::size_t l = 0; l < net.norms.size(); ++l) {
    CHECK(net.norms[l].gamma == before.norms[l].gamma);
    CHECK(net.norms[l].beta == before.norms[l].beta);
  }
}

TEST_CASE("a two-sample dataset is overfit within 20 epochs") {
  TrainConfig cfg;
  cfg.shape = {8, 8, 2};
  cfg.sparsity = {0.0, 0.0};
  cfg.batch_size = 2;
  cfg.epochs = 20;
  cfg.learning_rate = 0.2;
  cfg.rng_seed = 3;
  const Dataset data = synthetic_dataset(2, 8, 2, 9);

  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  double loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    loss = train_epoch(net, data, cfg, cfg.learning_rate, epoch);
  CHECK(loss < 1e-3);
}

TEST_CASE("training loss descends on a tiny dataset") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 6;
  const Dataset data = synthetic_dataset(10, 8, 4, 17);
  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  std::vector<double> losses;
  for (int epoch = 0; epoch < 6; ++epoch)
    losses.push_back(train_epoch(net, data, cfg, cfg.learning_rate, epoch));
  double later = 0.0;
  for (int e = 1; e <= 5; ++e) later += losses[e];
  CHECK(later / 5.0 < losses[0]);
}

TEST_CASE("identical configs produce bitwise identical trained networks") {
  TrainConfig cfg = tiny_config();
  const Dataset train = synthetic_dataset(30, 8, 4, 5);
  const Dataset val = synthetic_dataset(10, 8, 4, 6);
  const Dataset test = synthetic_dataset(10, 8, 4, 7);
  const FitResult a = fit(cfg, train, val, test);
  const FitResult b = fit(cfg, train, val, test);
  CHECK(networks_identical(a.network, b.network));
  CHECK(a.best_epoch == b.best_epoch);
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_error_percent == b.history[e].val_error_percent);
  }
}

TEST_CASE("masked weights keep their initial values across training") {
  TrainConfig cfg = tiny_config();
  cfg.quant = QuantMode::ternary;  // clipping must not disturb masked slots either
  cfg.epochs = 4;
  const Dataset data = synthetic_dataset(25, 8, 4, 12);
  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  const Network<float> initial = net;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    train_epoch(net, data, cfg, cfg.learning_rate, epoch);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& mask = net.layers[l].mask;
    bool any_masked = false;
    for (std::size_t i = 0; i < mask.rows; ++i)
      for (std::size_t j = 0; j < mask.cols; ++j)
        if (!mask.at(i, j)) {
          any_masked = true;
          CHECK(net.layers[l].weights(i, j) == initial.layers[l].weights(i, j));
          const Matrix eff = effective_weights(net.layers[l], WeightPhase::train);
          CHECK(eff(i, j) == 0.0f);
        }
    if (l == 0) CHECK(any_masked);
  }
}

TEST_CASE("fully-dense training matches a mask-free oracle bitwise") {
  // The oracle composes the same primitive ops without any mask machinery,
  // so this pins down that p = 0 adds exactly nothing to the trajectory.
  TrainConfig cfg;
  cfg.shape = {6, 5, 3};
  cfg.sparsity = {0.0, 0.0};
  cfg.batch_size = 4;
  cfg.learning_rate = 0.1;
  cfg.rng_seed = 31;
  cfg.mask_seed = 2;
  const Dataset data = synthetic_dataset(12, 6, 3, 77);

  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);

  // oracle parameters: identical initialization stream
  Matrix w0(6, 5), w1(5, 3);
  init_uniform(w0, cfg.rng_seed, 0);
  init_uniform(w1, cfg.rng_seed, 30);
  std::vector<float> b0(5, 0.0f), b1(3, 0.0f);
  BatchNorm<float> bn = BatchNorm<float>::make(5);
  CHECK(net.layers[0].weights == w0);
  CHECK(net.layers[1].weights == w1);

  for (int epoch = 0; epoch < 2; ++epoch) {
    const auto order = epoch_order(cfg.rng_seed, epoch, data.size());
    for (std::size_t begin = 0; begin + 4 <= data.size(); begin += 4) {
      Matrix x(4, 6);
      std::vector<int> labels(4);
      for (std::size_t i = 0; i < 4; ++i) {
        const float* src = data.images.row(order[begin + i]);
        std::copy(src, src + 6, x.row(i));
        labels[i] = data.labels[order[begin + i]];
      }
      // dense forward
      Matrix pre0 = matmul(x, w0);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) pre0(i, j) += b0[j];
      auto [normed, bn_cache] = batchnorm_forward(bn, pre0, Phase::train);
      const Matrix hidden = relu_forward(normed);
      Matrix scores = matmul(hidden, w1);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) scores(i, j) += b1[j];
      const HingeLoss<float> loss = squared_hinge_loss(scores, labels);
      // dense backward
      const Matrix grad_w1 = matmul(transpose(hidden), loss.grad);
      std::vector<float> grad_b1(3, 0.0f);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) grad_b1[j] += loss.grad(i, j);
      Matrix grad_hidden = matmul(loss.grad, transpose(w1));
      grad_hidden = relu_backward(hidden, grad_hidden);
      const BnGrads<float> bn_grads = batchnorm_backward(bn, bn_cache, grad_hidden);
      const Matrix grad_w0 = matmul(transpose(x), bn_grads.input);
      std::vector<float> grad_b0(5, 0.0f);
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) grad_b0[j] += bn_grads.input(i, j);
      // dense update
      const float lr = static_cast<float>(cfg.learning_rate);
      for (std::size_t i = 0; i < w0.size(); ++i) w0.data()[i] -= lr * grad_w0.data()[i];
      for (std::size_t i = 0; i < w1.size(); ++i) w1.data()[i] -= lr * grad_w1.data()[i];
      for (std::size_t j = 0; j < 5; ++j) b0[j] -= lr * grad_b0[j];
      for (std::size_t j = 0; j < 3; ++j) b1[j] -= lr * grad_b1[j];
      for (std::size_t j = 0; j < 5; ++j) {
        bn.gamma[j] -= lr * bn_grads.gamma[j];
        bn.beta[j] -= lr * bn_grads.beta[j];
      }
    }
    train_epoch(net, data, cfg, cfg.learning_rate, epoch);
  }

  CHECK(net.layers[0].weights == w0);
  CHECK(net.layers[1].weights == w1);
  CHECK(net.layers[0].bias == b0);
  CHECK(net.layers[1].bias == b1);
  CHECK(net.norms[0].gamma == bn.gamma);
  CHECK(net.norms[0].beta == bn.beta);
  CHECK(net.norms[0].running_mean == bn.running_mean);
  CHECK(net.norms[0].running_var == bn.running_var);
}

TEST_CASE("evaluation: constant scores on balanced 10-class data give 90%") {
  TrainConfig cfg = tiny_config();
  cfg.shape = {8, 6, 10};
  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  // zero weights and biases force constant (zero) scores
  for (auto& layer : net.layers) {
    for (auto& w : layer.weights.data()) w = 0.0f;
    for (auto& b : layer.bias) b = 0.0f;
  }
  Dataset balanced;
  balanced.images = Matrix(100, 8, 0.3f);
  balanced.labels.resize(100);
  for (int i = 0; i < 100; ++i) balanced.labels[i] = i % 10;
  const double rate = evaluate(net, balanced, WeightPhase::test_real);
  CHECK(rate == doctest::Approx(90.0));  // argmax ties resolve to class 0
  CHECK(evaluate(net, balanced, WeightPhase::test_real) == rate);
  CHECK_THROWS_AS(evaluate(net, Dataset{}, WeightPhase::test_real),
                  std::invalid_argument);
}

TEST_CASE("divergence is reported as such") {
  TrainConfig cfg = tiny_config();
  const Dataset data = synthetic_dataset(20, 8, 4, 2);
  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  CHECK_THROWS_AS(train_epoch(net, data, cfg, 1e30, 0), DivergenceError);
}

TEST_CASE("nominal parameter counts follow the global-rounding convention") {
  CHECK(nominal_parameter_count({784, 512, 512, 10}, {0.0, 0.0, 0.0}) == 669706);
  CHECK(nominal_parameter_count({784, 512, 512, 10}, {0.5, 0.5, 0.5}) == 335370);
  CHECK(nominal_parameter_count({784, 512, 512, 10}, {0.6, 0.6, 0.6}) == 268503);
  CHECK(nominal_parameter_count({784, 512, 512, 10}, {0.7, 0.7, 0.7}) == 201636);
  CHECK(nominal_parameter_count({784, 512, 512, 10}, {0.8, 0.8, 0.8}) == 134768);
  CHECK(nominal_parameter_count({784, 512, 512, 10}, {0.9, 0.9, 0.9}) == 67901);
  CHECK(nominal_parameter_count({784, 256, 256, 10}, {0.0, 0.0, 0.0}) == 269322);
  CHECK(nominal_parameter_count({784, 12, 12, 10}, {0.0, 0.0, 0.0}) == 9706);
  CHECK(nominal_parameter_count({784, 77, 77, 10}, {0.0, 0.0, 0.0}) == 67231);
  CHECK(nominal_parameter_count({784, 145, 145, 10}, {0.0, 0.0, 0.0}) == 136455);
}
