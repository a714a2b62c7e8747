// GPNW checkpoint container (little-endian):
//   magic "GPNW" | u32 version=1 | u32 header length + UTF-8 header |
//   u32 n_tensors | per tensor: u16 name length | name | u8 ndim |
//   ndim x u32 dims | f32 data
//
// The header string carries the architecture followed by ';'-separated
// key=value pairs (neuron kind, gate ablations, constants, input channels,
// dropout rate, seed, epoch, validation accuracy). Parameters are stored as
// f32; loading widens them back to f64, so save -> load -> save is
// byte-identical.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpn/network.hpp"

namespace gpn::checkpoint {

struct CheckpointBundle {
  std::string architecture;
  neurons::NeuronConfig neuron_cfg;
  std::size_t input_channels = 0;
  double dropout_rate = 0.25;
  std::size_t steps = 0;        // binning steps the run used
  double val_fraction = 0.15;   // split geometry, for reproducing --split val
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double val_accuracy = 0.0;
  std::vector<network::Param> params;

  // Snapshot of a network plus run metadata. param_values, when given,
  // overrides the network's current tensors (e.g. the best-epoch weights).
  static CheckpointBundle from_network(const network::NetworkInstance& net,
                                       std::uint64_t seed, std::size_t epoch,
                                       double val_accuracy,
                                       const std::vector<Tensor>* param_values = nullptr);

  // Rebuilds the network and installs the stored parameters.
  network::NetworkInstance to_network() const;
};

void save_checkpoint(const CheckpointBundle& bundle, const std::string& path);
CheckpointBundle load_checkpoint(const std::string& path);

}  // namespace gpn::checkpoint
