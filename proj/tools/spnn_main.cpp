#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spnn/data_io.hpp"
#include "spnn/hwsim.hpp"
#include "spnn/model_store.hpp"
#include "spnn/train.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<int> parse_shape(const std::string& text) {
  std::vector<int> shape;
  std::size_t at = 0;
  while (at < text.size()) {
    std::size_t next = text.find(',', at);
    if (next == std::string::npos) next = text.size();
    shape.push_back(std::stoi(text.substr(at, next - at)));
    at = next + 1;
  }
  if (shape.size() < 2)
    throw std::invalid_argument("--shape needs at least input and output widths");
  return shape;
}

std::vector<double> parse_sparsity(const std::string& text, std::size_t layers) {
  std::vector<double> values;
  std::size_t at = 0;
  while (at < text.size()) {
    std::size_t next = text.find(',', at);
    if (next == std::string::npos) next = text.size();
    values.push_back(std::stod(text.substr(at, next - at)));
    at = next + 1;
  }
  if (values.size() == 1) values.assign(layers, values[0]);
  if (values.size() != layers)
    throw std::invalid_argument("--sparsity needs one value or one per layer");
  return values;
}

spnn::QuantMode parse_quant(const std::string& text) {
  if (text == "none") return spnn::QuantMode::none;
  if (text == "binary") return spnn::QuantMode::binary;
  if (text == "ternary") return spnn::QuantMode::ternary;
  throw std::invalid_argument("--quant must be none, binary or ternary");
}

spnn::LfsrMode parse_mask_mode(const std::string& text) {
  if (text == "debruijn") return spnn::LfsrMode::debruijn;
  if (text == "maximal") return spnn::LfsrMode::maximal;
  throw std::invalid_argument("--mask-mode must be debruijn or maximal");
}

std::uint64_t nominal_parameters(const spnn::Model& model) {
  std::vector<int> shape{static_cast<int>(model.layers.front().n)};
  std::vector<double> sparsity;
  for (const spnn::CompressedLayer& layer : model.layers) {
    shape.push_back(static_cast<int>(layer.m));
    const double states = static_cast<double>(spnn::LfsrConfig(layer.lfsr_width, 1,
                                                               layer.lfsr_mode,
                                                               layer.taps)
                                                  .state_count());
    sparsity.push_back(1.0 - static_cast<double>(layer.threshold) / states);
  }
  return spnn::nominal_parameter_count(shape, sparsity);
}

struct TrainArgs {
  std::string shape = "784,512,512,10";
  std::string sparsity = "0";
  std::string quant = "none";
  std::string mask_mode = "debruijn";
  int epochs = 50;
  double lr = 0.01;
  double lr_decay = 0.98;
  int batch = 100;
  std::uint64_t seed = 1;
  std::uint32_t mask_seed = 1;
  std::string out = "model.spnn";
  std::string data_dir;
  bool export_real = false;
  bool official_test = false;
};

int run_train(const TrainArgs& args) {
  spnn::TrainConfig cfg;
  cfg.shape = parse_shape(args.shape);
  cfg.sparsity = parse_sparsity(args.sparsity, cfg.shape.size() - 1);
  cfg.quant = parse_quant(args.quant);
  cfg.mask_mode = parse_mask_mode(args.mask_mode);
  cfg.epochs = args.epochs;
  cfg.learning_rate = args.lr;
  cfg.lr_decay = args.lr_decay;
  cfg.batch_size = args.batch;
  cfg.rng_seed = args.seed;
  cfg.mask_seed = args.mask_seed;
  cfg.validate();

  const spnn::MnistSplit split = spnn::load_mnist(args.data_dir);
  const spnn::Dataset& test = args.official_test ? split.test_official : split.test_carved;

  spnn::FitResult result =
      spnn::fit(cfg, split.train, split.validation, test, [](const spnn::EpochMetrics& m) {
        json line{{"epoch", m.epoch},
                  {"loss", m.train_loss},
                  {"val_error", m.val_error_percent},
                  {"test_error", m.test_error_percent},
                  {"seconds", m.seconds}};
        std::cout << line.dump() << "\n" << std::flush;
      });

  spnn::Model model;
  if (cfg.quant != spnn::QuantMode::none && args.export_real) {
    // Keep the real-valued masked weights instead of the quantized levels.
    spnn::Network<float> real_net = result.network;
    for (auto& layer : real_net.layers) layer.quant = spnn::QuantMode::none;
    model = spnn::to_model(real_net, spnn::config_hash(cfg),
                           static_cast<std::uint32_t>(cfg.epochs));
  } else {
    model = spnn::to_model(result.network, spnn::config_hash(cfg),
                           static_cast<std::uint32_t>(cfg.epochs));
  }
  spnn::save_model(args.out, model);

  json summary{{"event", "summary"},
               {"best_epoch", result.best_epoch},
               {"best_val_error", result.best_val_error},
               {"test_error_at_best", result.test_error_at_best},
               {"parameters", nominal_parameters(model)},
               {"stored_weights", spnn::stored_weight_count(model)},
               {"model", args.out}};
  if (cfg.quant != spnn::QuantMode::none)
    summary["test_error_quantized_at_best"] =
        spnn::evaluate(result.network, test, spnn::WeightPhase::test_quantized);
  std::cout << summary.dump() << "\n";
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string data_dir;
  std::string test_mode = "real";
  bool official_test = false;
};

int run_eval(const EvalArgs& args) {
  const spnn::Model model = spnn::load_model(args.model);
  const spnn::MnistSplit split = spnn::load_mnist(args.data_dir);
  const spnn::Dataset& test = args.official_test ? split.test_official : split.test_carved;

  spnn::WeightPhase phase = spnn::WeightPhase::test_real;
  std::string mode = args.test_mode;
  if (args.test_mode == "quantized") {
    if (model.layers.front().quant == spnn::QuantMode::none) {
      std::cerr << "warning: model stores real weights only; falling back to real test mode\n";
      mode = "real";
    } else {
      phase = spnn::WeightPhase::test_quantized;
    }
  } else if (args.test_mode == "real") {
    if (model.layers.front().quant != spnn::QuantMode::none)
      std::cerr << "note: model stores quantized weights; real mode evaluates them as stored\n";
  } else {
    throw std::invalid_argument("--test-mode must be real or quantized");
  }

  spnn::Network<float> net = spnn::to_network(model);
  const double rate = spnn::evaluate(net, test, phase);
  json out{{"misclassification_percent", rate},
           {"test_mode", mode},
           {"test_set", args.official_test ? "official" : "carved"},
           {"parameters", nominal_parameters(model)},
           {"stored_weights", spnn::stored_weight_count(model)},
           {"epochs_trained", model.epochs_trained}};
  std::cout << out.dump() << "\n";
  return 0;
}

struct SimulateArgs {
  std::string model;
  std::string data_dir;
  int layer = 0;
  int input = 0;
  std::string mode = "sparse";
  std::string trace_path;
  bool fixed = false;
  int int_bits = 8;
  int frac_bits = 8;
};

int run_simulate(const SimulateArgs& args) {
  const spnn::Model model = spnn::load_model(args.model);
  if (args.layer < 0 || static_cast<std::size_t>(args.layer) >= model.layers.size())
    throw std::invalid_argument("--layer out of range");
  const spnn::MnistSplit split = spnn::load_mnist(args.data_dir);
  if (args.input < 0 || static_cast<std::size_t>(args.input) >= split.test_carved.size())
    throw std::invalid_argument("--input out of range");
  spnn::DatapathMode mode;
  if (args.mode == "sparse") {
    mode = spnn::DatapathMode::sparse;
  } else if (args.mode == "fc") {
    mode = spnn::DatapathMode::fully_connected;
  } else {
    throw std::invalid_argument("--mode must be sparse or fc");
  }

  spnn::Network<float> net = spnn::to_network(model);
  const std::size_t layer_index = static_cast<std::size_t>(args.layer);

  // Drive the sample through the stack up to the chosen layer.
  spnn::Matrix x(1, split.test_carved.images.cols());
  std::copy(split.test_carved.images.row(args.input),
            split.test_carved.images.row(args.input) + x.cols(), x.row(0));
  for (std::size_t l = 0; l < layer_index; ++l) {
    auto [pre, cache] = spnn::sparse_forward(net.layers[l], x, spnn::WeightPhase::test_real);
    auto [normed, bn_cache] = spnn::batchnorm_forward(net.norms[l], pre, spnn::Phase::infer);
    x = spnn::relu_forward(normed);
  }

  // Software pre-activation for the same layer.
  auto [software, cache] =
      spnn::sparse_forward(net.layers[layer_index], x, spnn::WeightPhase::test_real);

  const spnn::CompressedLayer& stored = model.layers[layer_index];
  std::vector<float> inputs(x.row(0), x.row(0) + x.cols());
  const spnn::LayerRun run =
      spnn::simulate_layer(inputs, stored, mode, !args.trace_path.empty());

  double max_rel = 0.0;
  for (std::uint32_t j = 0; j < stored.m; ++j) {
    const double simulated = run.outputs[j] + stored.bias[j];
    const double expected = software(0, j);
    const double denom = std::max({std::abs(simulated), std::abs(expected), 1.0});
    max_rel = std::max(max_rel, std::abs(simulated - expected) / denom);
  }

  if (!args.trace_path.empty()) {
    std::ofstream trace(args.trace_path, std::ios::trunc);
    if (!trace) throw std::runtime_error("cannot open trace file " + args.trace_path);
    for (std::uint32_t j = 0; j < run.traces.size(); ++j)
      for (const spnn::TraceRecord& r : run.traces[j]) {
        json line{{"neuron", j},          {"cycle", r.cycle},
                  {"sng_bit", r.sng_bit}, {"address", r.address},
                  {"weight", r.weight},   {"input", r.input},
                  {"accumulator", r.accumulator}};
        trace << line.dump() << "\n";
      }
  }

  json out{{"layer", args.layer},
           {"mode", args.mode},
           {"cycles", run.total.cycles},
           {"memory_reads", run.total.memory_reads},
           {"mac_operations", run.total.mac_operations},
           {"memory_bits", run.total.memory_bits},
           {"neurons", stored.m},
           {"max_relative_difference", max_rel},
           {"matches_software", max_rel <= 1e-5}};

  if (args.fixed) {
    const spnn::SngConfig sng = stored.sng();
    spnn::QFormat format{args.int_bits, args.frac_bits};
    double max_abs = 0.0;
    for (std::uint32_t j = 0; j < stored.m; ++j) {
      const spnn::FixedNeuronRun fixed = spnn::simulate_neuron_fixed(
          inputs, stored.columns[j], sng, stored.column_seeds[j],
          spnn::DatapathMode::sparse, stored.weight_width_bits(), format);
      max_abs = std::max(max_abs, std::abs(fixed.output - static_cast<double>(run.outputs[j])));
    }
    out["fixed_point"] = {{"int_bits", args.int_bits},
                          {"frac_bits", args.frac_bits},
                          {"max_abs_difference_vs_float", max_abs}};
  }

  std::cout << out.dump() << "\n";
  if (max_rel > 1e-5) {
    std::cerr << "error: simulator disagrees with the software forward pass\n";
    return kExitNumeric;
  }
  return 0;
}

struct ReportArgs {
  std::string model;
  bool as_json = false;
};

int run_report(const ReportArgs& args) {
  const spnn::Model model = spnn::load_model(args.model);
  json layers = json::array();
  std::uint64_t total_bits = 0;
  std::uint64_t total_kept = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const spnn::CompressedLayer& layer = model.layers[l];
    std::uint64_t kept = 0;
    std::uint32_t depth_min = layer.n, depth_max = 0;
    for (std::uint32_t c : layer.kept_counts) {
      kept += c;
      depth_min = std::min(depth_min, c);
      depth_max = std::max(depth_max, c);
    }
    const std::uint64_t bits = spnn::memory_footprint_bits(layer);
    const double states =
        static_cast<double>(spnn::LfsrConfig(layer.lfsr_width, 1, layer.lfsr_mode,
                                             layer.taps)
                                .state_count());
    total_bits += bits;
    total_kept += kept;
    layers.push_back({{"layer", l},
                      {"inputs", layer.n},
                      {"outputs", layer.m},
                      {"quant", spnn::to_string(layer.quant)},
                      {"weight_bits", layer.weight_width_bits()},
                      {"sparsity", 1.0 - static_cast<double>(layer.threshold) / states},
                      {"kept_weights", kept},
                      {"neuron_depth_min", depth_min},
                      {"neuron_depth_max", depth_max},
                      {"memory_bits", bits}});
  }
  json out{{"layers", layers},
           {"total_memory_bits", total_bits},
           {"total_kept_weights", total_kept},
           {"parameters", nominal_parameters(model)}};

  if (args.as_json) {
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  std::printf("%-6s %-8s %-8s %-8s %-6s %-9s %-12s %-13s %-12s\n", "layer", "inputs",
              "outputs", "quant", "bits", "sparsity", "kept", "depth/neuron",
              "memory_bits");
  for (const auto& row : layers) {
    const std::uint32_t dmin = row["neuron_depth_min"];
    const std::uint32_t dmax = row["neuron_depth_max"];
    const std::string depth = dmin == dmax
                                  ? std::to_string(dmin)
                                  : std::to_string(dmin) + ".." + std::to_string(dmax);
    std::printf("%-6d %-8d %-8d %-8s %-6d %-9.4f %-12llu %-13s %-12llu\n",
                static_cast<int>(row["layer"]), static_cast<int>(row["inputs"]),
                static_cast<int>(row["outputs"]),
                std::string(row["quant"]).c_str(), static_cast<int>(row["weight_bits"]),
                static_cast<double>(row["sparsity"]),
                static_cast<unsigned long long>(row["kept_weights"]), depth.c_str(),
                static_cast<unsigned long long>(row["memory_bits"]));
  }
  std::printf("total: %llu kept weights, %llu memory bits, %llu parameters\n",
              static_cast<unsigned long long>(total_kept),
              static_cast<unsigned long long>(total_bits),
              static_cast<unsigned long long>(nominal_parameters(model)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparsely-connected neural networks: LFSR masks, training, "
               "compressed models, datapath simulation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (0 = auto)");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model and write it compressed");
  train->add_option("--shape", train_args.shape, "layer widths, e.g. 784,512,512,10");
  train->add_option("--sparsity", train_args.sparsity, "fraction of removed connections, single value or per layer");
  train->add_option("--quant", train_args.quant, "none | binary | ternary");
  train->add_option("--mask-mode", train_args.mask_mode, "debruijn | maximal");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--lr", train_args.lr, "learning rate");
  train->add_option("--lr-decay", train_args.lr_decay, "per-epoch learning-rate factor");
  train->add_option("--batch", train_args.batch, "mini-batch size");
  train->add_option("--seed", train_args.seed, "rng seed (init + shuffling)");
  train->add_option("--mask-seed", train_args.mask_seed, "base seed of the mask LFSRs");
  train->add_option("--out", train_args.out, "output model path");
  train->add_option("--data-dir", train_args.data_dir, "MNIST directory")
      ->envname("SPNN_DATA_DIR");
  train->add_flag("--export-real", train_args.export_real,
                  "store real-valued weights even for quantized training");
  train->add_flag("--official-test", train_args.official_test,
                  "report the official 10k test file instead of the carved split");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a stored model");
  eval->add_option("--model", eval_args.model, "model path")->required();
  eval->add_option("--data-dir", eval_args.data_dir, "MNIST directory")
      ->envname("SPNN_DATA_DIR");
  eval->add_option("--test-mode", eval_args.test_mode, "real | quantized");
  eval->add_flag("--official-test", eval_args.official_test,
                 "evaluate the official 10k test file");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "cycle-accurate neuron datapath run");
  simulate->add_option("--model", sim_args.model, "model path")->required();
  simulate->add_option("--data-dir", sim_args.data_dir, "MNIST directory")
      ->envname("SPNN_DATA_DIR");
  simulate->add_option("--layer", sim_args.layer, "layer index");
  simulate->add_option("--input", sim_args.input, "test-sample index");
  simulate->add_option("--mode", sim_args.mode, "sparse | fc");
  simulate->add_option("--trace", sim_args.trace_path, "write per-cycle trace (JSON lines)");
  simulate->add_flag("--fixed", sim_args.fixed, "also run the fixed-point datapath");
  simulate->add_option("--int-bits", sim_args.int_bits, "fixed-point integer bits");
  simulate->add_option("--frac-bits", sim_args.frac_bits, "fixed-point fraction bits");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "memory footprint of a stored model");
  report->add_option("--model", report_args.model, "model path")->required();
  report->add_flag("--json", report_args.as_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    spnn::set_max_threads(threads);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (simulate->parsed()) return run_simulate(sim_args);
    if (report->parsed()) return run_report(report_args);
    return kExitUsage;
  } catch (const spnn::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const spnn::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
