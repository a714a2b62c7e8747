#include "gpn/neurons.hpp"

#include "gpn/errors.hpp"

namespace gpn::neurons {

using autodiff::Graph;
using autodiff::Value;

const char* kind_name(NeuronKind k) {
  switch (k) {
    case NeuronKind::IF: return "if";
    case NeuronKind::LIF: return "lif";
    case NeuronKind::CubaLIF: return "cuba";
    case NeuronKind::PLIF: return "plif";
    case NeuronKind::GPN: return "gpn";
  }
  return "?";
}

std::optional<NeuronKind> parse_kind(const std::string& name) {
  if (name == "if") return NeuronKind::IF;
  if (name == "lif") return NeuronKind::LIF;
  if (name == "cuba") return NeuronKind::CubaLIF;
  if (name == "plif") return NeuronKind::PLIF;
  if (name == "gpn") return NeuronKind::GPN;
  return std::nullopt;
}

double NeuronConfig::beta_value() const {
  if (!beta) throw ConfigError("neuron config: membrane leak factor beta is required here");
  if (!(*beta > 0.0 && *beta < 1.0)) throw ConfigError("neuron config: beta must lie in (0, 1)");
  return *beta;
}

double NeuronConfig::alpha_value() const {
  if (!alpha) throw ConfigError("neuron config: synaptic leak factor alpha is required here");
  if (!(*alpha > 0.0 && *alpha < 1.0)) throw ConfigError("neuron config: alpha must lie in (0, 1)");
  return *alpha;
}

double NeuronConfig::v_th_value() const {
  if (!v_th) throw ConfigError("neuron config: firing threshold v_th is required here");
  return *v_th;
}

LayerState initial_state(Graph& g, std::size_t batch, std::size_t width, NeuronKind kind) {
  LayerState st;
  st.v = g.constant(Tensor::zeros({batch, width}));
  if (kind == NeuronKind::CubaLIF) {
    st.x_syn = g.constant(Tensor::zeros({batch, width}));
    st.s_prev = g.constant(Tensor::zeros({batch, width}));
  }
  return st;
}

namespace {

Value maybe_detach(Graph& g, Value s, bool detach) {
  return detach ? g.detach(s) : s;
}

// Shared fire + reset tail: s = eps(h - threshold), v' = (1 - s_reset) . h.
// Keeping one implementation makes the fully-ablated GPN bit-identical to
// the plain LIF step.
StepResult fire_and_reset(Graph& g, Value h, Value u, const NeuronConfig& cfg) {
  StepResult r;
  r.hidden = h;
  r.spikes = g.spike(u, cfg.activation);
  Value keep = g.rsub_const(1.0, maybe_detach(g, r.spikes, cfg.detach_reset));
  r.state.v = g.mul(keep, h);  // reset potential is 0
  return r;
}

StepResult leaky_fire_reset(Graph& g, Value v, Value x, double beta, const NeuronConfig& cfg) {
  Value h = g.add(g.scale(v, beta), g.scale(x, 1.0 - beta));
  return fire_and_reset(g, h, g.add_const(h, -cfg.v_th_value()), cfg);
}

}  // namespace

StepResult lif_step(Graph& g, const LayerState& st, Value x_t, const NeuronConfig& cfg) {
  return leaky_fire_reset(g, st.v, x_t, cfg.beta_value(), cfg);
}

StepResult if_step(Graph& g, const LayerState& st, Value x_t, const NeuronConfig& cfg) {
  Value h = g.add(st.v, x_t);
  return fire_and_reset(g, h, g.add_const(h, -cfg.v_th_value()), cfg);
}

StepResult cuba_lif_step(Graph& g, const LayerState& st, Value feedforward,
                         const NeuronConfig& cfg, Value u_rec) {
  Value x_syn = g.add(g.add(g.scale(st.x_syn, cfg.alpha_value()), feedforward),
                      g.matmul(st.s_prev, u_rec));
  StepResult r = leaky_fire_reset(g, st.v, x_syn, cfg.beta_value(), cfg);
  r.state.x_syn = x_syn;
  r.state.s_prev = r.spikes;  // surrogate-bearing, not detached
  return r;
}

StepResult plif_step(Graph& g, const LayerState& st, Value x_t, const NeuronConfig& cfg,
                     Value a_param) {
  Value beta = g.sigmoid(a_param);
  Value h = g.add(g.scale_by(beta, st.v), g.scale_by(g.rsub_const(1.0, beta), x_t));
  return fire_and_reset(g, h, g.add_const(h, -cfg.v_th_value()), cfg);
}

StepResult gpn_step(Graph& g, const LayerState& st, Value x_t, const GPNWeightValues& w,
                    const NeuronConfig& cfg, bool record_gates) {
  const auto& abl = cfg.ablation;
  auto gate = [&](Value wv, Value wx) {
    return g.sigmoid(g.add(g.matmul(st.v, wv), g.matmul(x_t, wx)));
  };

  StepResult r;
  if (abl.all()) {
    // Fully frozen gates reduce to the plain LIF step, op for op.
    r = leaky_fire_reset(g, st.v, x_t, cfg.beta_value(), cfg);
    return r;
  }

  Value h;
  GateValues gates;
  if (abl.forget_input) {
    const double beta = cfg.beta_value();
    h = g.add(g.scale(st.v, beta), g.scale(x_t, 1.0 - beta));
  } else {
    gates.forget = gate(w.wf_v, w.wf_x);
    gates.input = gate(w.wi_v, w.wi_x);
    h = g.add(g.mul(gates.forget, st.v), g.mul(gates.input, x_t));
  }

  Value u;
  if (abl.threshold) {
    u = g.add_const(h, -cfg.v_th_value());
  } else {
    gates.threshold = gate(w.wt_v, w.wt_x);
    u = g.sub(h, gates.threshold);
  }

  r = fire_and_reset(g, h, u, cfg);
  if (!abl.bypass) {
    gates.bypass = gate(w.wb_v, w.wb_x);
    r.state.v = g.add(r.state.v, gates.bypass);
  }
  if (record_gates) r.gates = gates;
  return r;
}

}  // namespace gpn::neurons
