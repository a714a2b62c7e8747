// Stateful spiking-layer step functions built on the autodiff graph:
// integrate-and-fire (IF), leaky integrate-and-fire (LIF), current-based
// LIF with synaptic recurrence (Cuba-LIF), LIF with a learned leak (PLIF),
// and the gated parametric neuron (GPN).
//
// Conventions shared by every kind:
//  - batch-major shapes: membrane state and inputs are [N x M];
//  - reset potential is fixed at 0;
//  - a spike fires when the hidden potential reaches the threshold (>=);
//  - the spike used inside the reset is detached by default so that no
//    gradient flows backwards through the reset branch (switchable via
//    NeuronConfig::detach_reset, which smooth-mode gradient checks need);
//    the spike handed to the next layer keeps its surrogate gradient.
//
// GPN replaces the fixed leak pair (beta, 1-beta) with sigmoid gates over
// (v_t, x_t), the fixed threshold with a threshold gate, and adds a bypass
// gate whose output is summed into the next membrane state. Each gate can
// be ablated back to its fixed-constant form; with all three ablations the
// step is op-for-op identical to lif_step.
#pragma once

#include <optional>
#include <string>

#include "gpn/graph.hpp"

namespace gpn::neurons {

enum class NeuronKind { IF, LIF, CubaLIF, PLIF, GPN };

const char* kind_name(NeuronKind k);
std::optional<NeuronKind> parse_kind(const std::string& name);

struct GateAblation {
  bool forget_input = false;  // freeze F to beta and I to 1-beta
  bool threshold = false;     // freeze T to v_th
  bool bypass = false;        // drop the bypass term
  bool all() const { return forget_input && threshold && bypass; }
  bool any() const { return forget_input || threshold || bypass; }
};

struct NeuronConfig {
  NeuronKind kind = NeuronKind::LIF;
  std::optional<double> beta;   // membrane leak, required by LIF/Cuba-LIF
  std::optional<double> alpha;  // synaptic leak, required by Cuba-LIF
  std::optional<double> v_th;   // firing threshold, required by non-GPN kinds
  GateAblation ablation;        // GPN only
  autodiff::ActivationMode activation = autodiff::ActivationMode::Hard;
  bool detach_reset = true;

  // Accessors validate presence and range; a frozen GPN gate without its
  // constant is a configuration error.
  double beta_value() const;
  double alpha_value() const;
  double v_th_value() const;
};

// Recurrent per-layer state. x_syn and s_prev are used by Cuba-LIF only.
struct LayerState {
  autodiff::Value v;
  autodiff::Value x_syn;
  autodiff::Value s_prev;
};

// Gate activations of one GPN step, when captured.
struct GateValues {
  autodiff::Value forget;
  autodiff::Value input;
  autodiff::Value threshold;
  autodiff::Value bypass;
};

struct StepResult {
  LayerState state;        // state entering the next time step
  autodiff::Value spikes;  // surrogate-bearing spikes for the next layer
  autodiff::Value hidden;  // hidden membrane potential h_t
  GateValues gates;        // GPN only; unset entries for ablated gates
};

// The eight gate weight matrices of a GPN layer as graph values, each M x M
// in input-major orientation (state row-vectors multiply from the left).
struct GPNWeightValues {
  autodiff::Value wf_v, wf_x;
  autodiff::Value wi_v, wi_x;
  autodiff::Value wt_v, wt_x;
  autodiff::Value wb_v, wb_x;
};

// All-zero state at t = 1.
LayerState initial_state(autodiff::Graph& g, std::size_t batch, std::size_t width,
                         NeuronKind kind);

// h = beta*v + (1-beta)*x, fire, reset.
StepResult lif_step(autodiff::Graph& g, const LayerState& st, autodiff::Value x_t,
                    const NeuronConfig& cfg);

// h = v + x (no leak), fire, reset.
StepResult if_step(autodiff::Graph& g, const LayerState& st, autodiff::Value x_t,
                   const NeuronConfig& cfg);

// x_syn' = alpha * x_syn + feedforward + s_prev * U_rec; then the LIF
// leak/fire/reset applied to x_syn'. The recurrent spikes keep their
// surrogate gradient.
StepResult cuba_lif_step(autodiff::Graph& g, const LayerState& st,
                         autodiff::Value feedforward, const NeuronConfig& cfg,
                         autodiff::Value u_rec);

// LIF with leak sigma(a) where `a` is a trainable [1]-shaped value shared
// across the layer.
StepResult plif_step(autodiff::Graph& g, const LayerState& st, autodiff::Value x_t,
                     const NeuronConfig& cfg, autodiff::Value a_param);

// Four-gate step; see file header. record_gates controls whether the gate
// values are reported back in StepResult.
StepResult gpn_step(autodiff::Graph& g, const LayerState& st, autodiff::Value x_t,
                    const GPNWeightValues& w, const NeuronConfig& cfg,
                    bool record_gates = false);

}  // namespace gpn::neurons
