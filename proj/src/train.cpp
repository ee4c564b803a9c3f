#include "spnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "spnn/loss.hpp"

namespace spnn {

NetworkSpec TrainConfig::network_spec() const {
  NetworkSpec spec;
  spec.shape = shape;
  spec.sparsity = sparsity;
  spec.quant = quant;
  spec.mask_mode = mask_mode;
  spec.mask_seed = mask_seed;
  return spec;
}

void TrainConfig::validate() const {
  network_spec().validate();
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("TrainConfig: learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw std::invalid_argument("TrainConfig: lr decay must lie in (0, 1]");
  if (batch_size < 2)
    throw std::invalid_argument("TrainConfig: batch size must be >= 2 for batch norm");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
}

std::vector<std::uint32_t> epoch_order(std::uint64_t rng_seed, int epoch,
                                       std::size_t count) {
  std::vector<std::uint32_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = static_cast<std::uint32_t>(i);
  CounterRng rng(mix64(rng_seed ^ (0x5170ull + static_cast<std::uint64_t>(epoch))));
  for (std::size_t i = 0; i + 1 < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(count - i));
    std::swap(order[i], order[j]);
  }
  return order;
}

namespace {

Matrix gather_rows(const Matrix& source, const std::vector<std::uint32_t>& order,
                   std::size_t begin, std::size_t count) {
  Matrix out(count, source.cols());
  for (std::size_t i = 0; i < count; ++i) {
    const float* src = source.row(order[begin + i]);
    std::copy(src, src + source.cols(), out.row(i));
  }
  return out;
}

}  // namespace

double train_epoch(Network<float>& net, const Dataset& data,
                   const TrainConfig& cfg, double learning_rate, int epoch) {
  const std::size_t count = data.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  if (count < 2) throw std::invalid_argument("train_epoch: need at least 2 samples");
  const std::vector<std::uint32_t> order = epoch_order(cfg.rng_seed, epoch, count);

  double loss_sum = 0.0;
  std::size_t batches = 0;
  // a trailing batch of one sample is skipped: it cannot be normalized
  for (std::size_t begin = 0; begin + 2 <= count; begin += batch) {
    const std::size_t take = std::min(batch, count - begin);
    Matrix x = gather_rows(data.images, order, begin, take);
    std::vector<int> labels(take);
    for (std::size_t i = 0; i < take; ++i) labels[i] = data.labels[order[begin + i]];

    ForwardTrace<float> trace;
    Matrix scores = network_forward(net, x, Phase::train, WeightPhase::train, &trace);
    HingeLoss<float> loss = squared_hinge_loss(scores, labels);
    if (!std::isfinite(loss.value))
      throw DivergenceError("training diverged: non-finite loss in epoch " +
                            std::to_string(epoch));
    loss_sum += loss.value;
    ++batches;

    NetworkGrads<float> grads = network_backward(net, trace, loss.grad);
    apply_sgd(net, grads, static_cast<float>(learning_rate));
  }
  return loss_sum / static_cast<double>(batches);
}

double evaluate(Network<float>& net, const Dataset& data, WeightPhase weights) {
  const std::size_t count = data.size();
  if (count == 0) throw std::invalid_argument("evaluate: empty dataset");
  constexpr std::size_t kEvalBatch = 1000;
  std::size_t errors = 0;
  for (std::size_t begin = 0; begin < count; begin += kEvalBatch) {
    const std::size_t take = std::min(kEvalBatch, count - begin);
    Matrix x(take, data.images.cols());
    std::copy(data.images.row(begin), data.images.row(begin) + take * data.images.cols(),
              x.data().begin());
    Matrix scores = network_forward(net, x, Phase::infer, weights);
    for (std::size_t i = 0; i < take; ++i) {
      const float* row = scores.row(i);
      std::size_t best = 0;
      for (std::size_t k = 1; k < scores.cols(); ++k)
        if (row[k] > row[best]) best = k;
      if (static_cast<int>(best) != data.labels[begin + i]) ++errors;
    }
  }
  return 100.0 * static_cast<double>(errors) / static_cast<double>(count);
}

FitResult fit(const TrainConfig& cfg, const Dataset& train, const Dataset& validation,
              const Dataset& test,
              const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  FitResult result;
  Network<float> net = make_network<float>(cfg.network_spec(), cfg.rng_seed);
  Network<float> best = net;
  result.best_val_error = std::numeric_limits<double>::infinity();

  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = train_epoch(net, train, cfg, lr, epoch);
    m.val_error_percent = evaluate(net, validation, WeightPhase::test_real);
    m.test_error_percent = evaluate(net, test, WeightPhase::test_real);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(m);
    if (m.val_error_percent < result.best_val_error) {
      result.best_val_error = m.val_error_percent;
      result.best_epoch = epoch;
      result.test_error_at_best = m.test_error_percent;
      best = net;
    }
    if (on_epoch) on_epoch(m);
    lr *= cfg.lr_decay;
  }
  result.network = std::move(best);
  return result;
}

std::uint64_t nominal_parameter_count(const std::vector<int>& shape,
                                      const std::vector<double>& sparsity) {
  if (shape.size() < 2 || sparsity.size() != shape.size() - 1)
    throw std::invalid_argument("nominal_parameter_count: shape/sparsity mismatch");
  double kept = 0.0;
  std::uint64_t biases = 0;
  for (std::size_t l = 0; l + 1 < shape.size(); ++l) {
    kept += (1.0 - sparsity[l]) * static_cast<double>(shape[l]) *
            static_cast<double>(shape[l + 1]);
    biases += static_cast<std::uint64_t>(shape[l + 1]);
  }
  return static_cast<std::uint64_t>(std::llround(kept)) + biases;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  // FNV-1a over a canonical rendering of every field that shapes the run.
  std::string canon;
  for (int w : cfg.shape) canon += std::to_string(w) + ",";
  canon += ";";
  for (double p : cfg.sparsity) canon += std::to_string(p) + ",";
  canon += ";" + std::string(to_string(cfg.quant));
  canon += ";" + std::to_string(static_cast<int>(cfg.mask_mode));
  canon += ";" + std::to_string(cfg.learning_rate);
  canon += ";" + std::to_string(cfg.lr_decay);
  canon += ";" + std::to_string(cfg.batch_size);
  canon += ";" + std::to_string(cfg.epochs);
  canon += ";" + std::to_string(cfg.rng_seed);
  canon += ";" + std::to_string(cfg.mask_seed);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace spnn
