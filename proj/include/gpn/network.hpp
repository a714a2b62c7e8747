// Network composition: parse an architecture string such as
// "FC1024-GPN1024-DP-FC20" (with "(...)*k" repetition) into a layer list,
// hold the registered parameter tensors, and unroll T-step forward passes
// over binned spike inputs on a caller-provided graph.
//
// Dropout here is the SNN variant: one Bernoulli keep-mask per (sample,
// iteration, layer), held constant across all T time steps and scaled by
// 1/(1-rate); evaluation mode is the identity.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpn/graph.hpp"
#include "gpn/neurons.hpp"

namespace gpn::network {

struct LayerSpec {
  enum class Kind { FC, Neuron, Dropout };
  Kind kind = Kind::FC;
  std::size_t width = 0;  // FC output width / neuron count
  neurons::NeuronKind neuron = neurons::NeuronKind::LIF;

  bool operator==(const LayerSpec&) const = default;
};

// Tokens: FCn, IFn, LIFn, CUBAn, PLIFn, GPNn, DP; dash-separated; groups
// "(...)*k" expand to k copies. The last layer must be an FC readout and
// every neuron layer must match the width produced by its predecessor.
std::vector<LayerSpec> parse_architecture(const std::string& text);
std::string canonical_architecture(const std::vector<LayerSpec>& layers);

struct Param {
  std::string name;
  Tensor value;
};

struct ForwardOptions {
  bool train_mode = false;      // enables dropout
  bool requires_grad = false;   // parameters become differentiable leaves
  bool record_gates = false;    // capture gate values of the first GPN layer
  bool record_neuron_inputs = false;  // capture inputs of the first neuron layer
  std::uint64_t seed = 0;       // dropout mask derivation
  std::uint64_t iteration = 0;
  // Global sample ids of the batch rows; required in train mode when the
  // network contains dropout layers.
  const std::vector<std::size_t>* sample_indices = nullptr;
};

struct ForwardResult {
  std::vector<autodiff::Value> logits;         // one [N x K] value per step
  std::vector<autodiff::Value> params;         // aligned with NetworkInstance::params()
  std::vector<autodiff::Value> neuron_inputs;  // per step, when recorded
  std::vector<neurons::GateValues> gates;      // per step, when recorded
};

class NetworkInstance {
 public:
  // Builds layer parameters with entries uniform in +-1/sqrt(fan_in),
  // deterministically from the seed.
  NetworkInstance(std::vector<LayerSpec> layers, std::size_t input_channels,
                  neurons::NeuronConfig neuron_cfg, double dropout_rate,
                  std::uint64_t seed);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::size_t input_channels() const { return input_channels_; }
  std::size_t output_classes() const;
  std::size_t num_spiking_layers() const;
  double dropout_rate() const { return dropout_rate_; }
  std::uint64_t seed() const { return seed_; }

  neurons::NeuronConfig& neuron_config() { return neuron_cfg_; }
  const neurons::NeuronConfig& neuron_config() const { return neuron_cfg_; }

  // Unrolls the whole sequence on g. step_inputs holds one [N x C] tensor
  // per time step.
  ForwardResult forward(autodiff::Graph& g, const std::vector<Tensor>& step_inputs,
                        const ForwardOptions& opt) const;

  std::string architecture() const { return canonical_architecture(layers_); }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Param> params_;
  // params_ index of each layer's first tensor (one FC matrix, eight GPN
  // matrices, one Cuba recurrent matrix + leak scalar, one PLIF scalar).
  std::vector<std::size_t> layer_param_start_;
  std::size_t input_channels_;
  neurons::NeuronConfig neuron_cfg_;
  double dropout_rate_;
  std::uint64_t seed_;
};

// Keep-mask for one dropout layer: entry (row, unit) is 1/(1-rate) with
// probability 1-rate else 0, derived from (seed, layer, iteration,
// sample_id) so it is identical for every time step and independent of
// batch composition.
Tensor dropout_mask(double rate, std::uint64_t seed, std::size_t layer_index,
                    std::uint64_t iteration, const std::vector<std::size_t>& sample_ids,
                    std::size_t width);

// spikes . mask (elementwise); identity when rate is 0 or in eval mode.
autodiff::Value apply_dropout(autodiff::Graph& g, autodiff::Value spikes,
                              const Tensor& mask);

}  // namespace gpn::network
