// Resolved run configuration shared by the CLI commands. Values arrive from
// a key=value config file and/or command-line flags; validation reports
// every problem at once, and each run writes the fully resolved settings to
// a sidecar file.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpn/network.hpp"
#include "gpn/training.hpp"

namespace gpn::cli {

struct RunConfig {
  // data
  std::string dataset;  // optional recipe preset: "shd" or "ssc"
  std::string train_file;
  std::string test_file;
  std::string out_dir = "run";

  // model
  std::string arch;
  std::string neuron;  // when set, replaces the kind of every neuron layer
  double dropout = 0.25;
  std::string activation = "hard";
  bool detach_reset = true;
  std::vector<std::string> ablate;  // subset of {FI, T, B}
  std::optional<double> beta, alpha, vth;

  // training
  std::size_t steps = 40;  // T
  double lr = 5e-4;
  std::size_t batch = 128;
  std::size_t epochs = 150;
  std::string loss = "all_step";
  std::uint64_t seed = 0;
  double val_fraction = 0.15;
  std::string roll = "per_step";  // per_step | per_sample | off
  double lr_decay = 0.5;
  std::size_t lr_patience = 5;
  std::size_t stop_patience = 20;
  bool avg_probs = false;
  double stop_below_frac = 0.0;

  // execution
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::size_t shard_rows = 32;

  // Every violated constraint, empty when the config is usable.
  std::vector<std::string> validate() const;

  // Architecture with the --neuron substitution applied.
  std::vector<network::LayerSpec> resolved_layers() const;
  neurons::NeuronConfig to_neuron_config() const;
  train::TrainConfig to_train_config() const;
  std::size_t resolved_threads() const;

  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  void write_sidecar(const std::string& path) const;
};

}  // namespace gpn::cli
