#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spnn/data_io.hpp"
#include "spnn/network.hpp"

namespace spnn {

struct TrainConfig {
  std::vector<int> shape;
  std::vector<double> sparsity;  // one entry per affine layer
  QuantMode quant = QuantMode::none;
  LfsrMode mask_mode = LfsrMode::debruijn;
  double learning_rate = 0.01;
  double lr_decay = 0.98;  // multiplied into the rate after each epoch
  int batch_size = 100;
  int epochs = 50;
  std::uint64_t rng_seed = 1;
  std::uint32_t mask_seed = 1;

  NetworkSpec network_spec() const;
  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_error_percent = 0.0;
  double test_error_percent = 0.0;
  double seconds = 0.0;
};

struct FitResult {
  Network<float> network;  // parameters of the best-validation epoch
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  double best_val_error = 0.0;
  double test_error_at_best = 0.0;
};

// One pass over the training set in shuffled mini-batches; returns the mean
// batch loss. Throws DivergenceError on a non-finite loss.
double train_epoch(Network<float>& net, const Dataset& data,
                   const TrainConfig& cfg, double learning_rate, int epoch);

// Misclassification percentage with batch norm in inference mode.
double evaluate(Network<float>& net, const Dataset& data, WeightPhase weights);

// Full run: train cfg.epochs epochs, evaluating validation and test after
// each; the returned network carries the parameters of the best-validation
// epoch. The callback (optional) sees each epoch's metrics as they complete.
FitResult fit(const TrainConfig& cfg, const Dataset& train, const Dataset& validation,
              const Dataset& test,
              const std::function<void(const EpochMetrics&)>& on_epoch = {});

// Shuffled index order for one epoch; pure function of (seed, epoch, count).
std::vector<std::uint32_t> epoch_order(std::uint64_t rng_seed, int epoch,
                                       std::size_t count);

// Kept weights plus biases, with the kept count taken from the nominal keep
// densities rounded once over the whole network.
std::uint64_t nominal_parameter_count(const std::vector<int>& shape,
                                      const std::vector<double>& sparsity);

std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace spnn
