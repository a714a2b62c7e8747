#include "gpn/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gpn/errors.hpp"

namespace gpn::network {

using autodiff::Graph;
using autodiff::Value;
using neurons::NeuronKind;

namespace {

// Expand "(...)*k" groups textually; nesting is supported by repeated
// expansion of the innermost group.
std::string expand_groups(std::string s) {
  for (;;) {
    const auto open = s.rfind('(');
    if (open == std::string::npos) break;
    const auto close = s.find(')', open);
    if (close == std::string::npos) throw ConfigError("architecture: unmatched '(' in " + s);
    if (close + 1 >= s.size() || s[close + 1] != '*') {
      throw ConfigError("architecture: expected '*k' after group in " + s);
    }
    std::size_t pos = close + 2;
    std::size_t digits = 0;
    while (pos + digits < s.size() && std::isdigit(static_cast<unsigned char>(s[pos + digits]))) {
      ++digits;
    }
    if (digits == 0) throw ConfigError("architecture: missing repeat count in " + s);
    const int count = std::stoi(s.substr(pos, digits));
    if (count < 1) throw ConfigError("architecture: repeat count must be >= 1");
    const std::string body = s.substr(open + 1, close - open - 1);
    if (body.empty()) throw ConfigError("architecture: empty group");
    std::string expanded = body;
    for (int i = 1; i < count; ++i) expanded += "-" + body;
    s = s.substr(0, open) + expanded + s.substr(pos + digits);
  }
  return s;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (c == '-') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

LayerSpec parse_token(const std::string& tok) {
  if (tok == "DP") {
    LayerSpec l;
    l.kind = LayerSpec::Kind::Dropout;
    return l;
  }
  static const std::pair<const char*, NeuronKind> kNeuronPrefixes[] = {
      {"GPN", NeuronKind::GPN},   {"PLIF", NeuronKind::PLIF}, {"CUBA", NeuronKind::CubaLIF},
      {"LIF", NeuronKind::LIF},   {"IF", NeuronKind::IF},
  };
  auto parse_width = [&](std::size_t prefix_len) {
    const std::string digits = tok.substr(prefix_len);
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
      throw ConfigError("architecture: bad width in token '" + tok + "'");
    }
    const long w = std::stol(digits);
    if (w < 1) throw ConfigError("architecture: width must be >= 1 in '" + tok + "'");
    return static_cast<std::size_t>(w);
  };
  if (tok.rfind("FC", 0) == 0) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::FC;
    l.width = parse_width(2);
    return l;
  }
  for (const auto& [prefix, kind] : kNeuronPrefixes) {
    const std::size_t len = std::string(prefix).size();
    if (tok.rfind(prefix, 0) == 0) {
      LayerSpec l;
      l.kind = LayerSpec::Kind::Neuron;
      l.neuron = kind;
      l.width = parse_width(len);
      return l;
    }
  }
  throw ConfigError("architecture: unknown token '" + tok + "'");
}

const char* neuron_token(NeuronKind k) {
  switch (k) {
    case NeuronKind::IF: return "IF";
    case NeuronKind::LIF: return "LIF";
    case NeuronKind::CubaLIF: return "CUBA";
    case NeuronKind::PLIF: return "PLIF";
    case NeuronKind::GPN: return "GPN";
  }
  return "?";
}

}  // namespace

std::vector<LayerSpec> parse_architecture(const std::string& text) {
  const auto tokens = split_tokens(expand_groups(text));
  if (tokens.empty()) throw ConfigError("architecture: empty specification");
  std::vector<LayerSpec> layers;
  layers.reserve(tokens.size());
  for (const auto& tok : tokens) layers.push_back(parse_token(tok));

  if (layers.back().kind != LayerSpec::Kind::FC) {
    throw ConfigError("architecture: must end in an FC readout");
  }
  std::size_t width = 0;  // 0 = whatever the input provides
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::FC:
        width = l.width;
        break;
      case LayerSpec::Kind::Neuron:
        if (width != 0 && l.width != width) {
          throw ConfigError("architecture: neuron width " + std::to_string(l.width) +
                            " does not match incoming width " + std::to_string(width));
        }
        width = l.width;
        break;
      case LayerSpec::Kind::Dropout:
        if (i == 0 || layers[i - 1].kind != LayerSpec::Kind::Neuron) {
          throw ConfigError("architecture: dangling dropout (DP must follow a neuron layer)");
        }
        break;
    }
  }
  return layers;
}

std::string canonical_architecture(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (const auto& l : layers) {
    if (!out.empty()) out += '-';
    switch (l.kind) {
      case LayerSpec::Kind::FC: out += "FC" + std::to_string(l.width); break;
      case LayerSpec::Kind::Neuron:
        out += std::string(neuron_token(l.neuron)) + std::to_string(l.width);
        break;
      case LayerSpec::Kind::Dropout: out += "DP"; break;
    }
  }
  return out;
}

NetworkInstance::NetworkInstance(std::vector<LayerSpec> layers, std::size_t input_channels,
                                 neurons::NeuronConfig neuron_cfg, double dropout_rate,
                                 std::uint64_t seed)
    : layers_(std::move(layers)),
      input_channels_(input_channels),
      neuron_cfg_(neuron_cfg),
      dropout_rate_(dropout_rate),
      seed_(seed) {
  if (layers_.empty()) throw ConfigError("network: no layers");
  if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0)) {
    throw ConfigError("network: dropout rate must lie in [0, 1)");
  }
  Rng rng(mix_key(seed, 0x696e6974ULL));  // "init"
  auto init = [&rng](std::size_t rows, std::size_t cols) {
    return Tensor::uniform({rows, cols}, 1.0 / std::sqrt(static_cast<double>(rows)), rng);
  };

  std::size_t width = input_channels_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    layer_param_start_.push_back(params_.size());
    const std::string prefix = "l" + std::to_string(i) + ".";
    switch (l.kind) {
      case LayerSpec::Kind::FC:
        params_.push_back({prefix + "fc.w", init(width, l.width)});
        width = l.width;
        break;
      case LayerSpec::Kind::Neuron:
        if (width != l.width) {
          throw ConfigError("network: neuron layer width mismatch at layer " + std::to_string(i));
        }
        if (l.neuron == NeuronKind::GPN) {
          for (const char* g : {"wf_v", "wf_x", "wi_v", "wi_x", "wt_v", "wt_x", "wb_v", "wb_x"}) {
            params_.push_back({prefix + "gpn." + g, init(l.width, l.width)});
          }
        } else if (l.neuron == NeuronKind::CubaLIF) {
          params_.push_back({prefix + "cuba.u", init(l.width, l.width)});
        } else if (l.neuron == NeuronKind::PLIF) {
          params_.push_back({prefix + "plif.a", Tensor::scalar(0.0)});
        }
        break;
      case LayerSpec::Kind::Dropout:
        break;
    }
  }
}

std::size_t NetworkInstance::output_classes() const {
  return layers_.back().width;
}

std::size_t NetworkInstance::num_spiking_layers() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += (l.kind == LayerSpec::Kind::Neuron) ? 1 : 0;
  return n;
}

Tensor dropout_mask(double rate, std::uint64_t seed, std::size_t layer_index,
                    std::uint64_t iteration, const std::vector<std::size_t>& sample_ids,
                    std::size_t width) {
  if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
  Tensor mask({sample_ids.size(), width});
  if (rate <= 0.0) {
    for (double& m : mask.data) m = 1.0;
    return mask;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t r = 0; r < sample_ids.size(); ++r) {
    Rng rng(mix_key(mix_key(seed, 0x64726f70ULL, layer_index), iteration, sample_ids[r]));
    double* row = mask.data.data() + r * width;
    for (std::size_t j = 0; j < width; ++j) {
      row[j] = rng.bernoulli(1.0 - rate) ? keep_scale : 0.0;
    }
  }
  return mask;
}

Value apply_dropout(Graph& g, Value spikes, const Tensor& mask) {
  return g.mul(spikes, g.constant(mask));
}

ForwardResult NetworkInstance::forward(Graph& g, const std::vector<Tensor>& step_inputs,
                                       const ForwardOptions& opt) const {
  if (step_inputs.empty()) throw ShapeError("forward: no time steps");
  const std::size_t batch = step_inputs[0].rows();
  if (step_inputs[0].cols() != input_channels_) {
    throw ShapeError("forward: input has " + std::to_string(step_inputs[0].cols()) +
                     " channels, network expects " + std::to_string(input_channels_));
  }

  ForwardResult res;
  res.params.reserve(params_.size());
  for (const auto& p : params_) {
    res.params.push_back(g.leaf(p.value, opt.requires_grad, p.name));
  }

  // Per-layer recurrent state and per-layer dropout masks, fixed for the
  // whole unroll.
  std::vector<neurons::LayerState> states(layers_.size());
  std::vector<Value> masks(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind == LayerSpec::Kind::Neuron) {
      states[i] = neurons::initial_state(g, batch, layers_[i].width, layers_[i].neuron);
    } else if (layers_[i].kind == LayerSpec::Kind::Dropout && opt.train_mode &&
               dropout_rate_ > 0.0) {
      if (opt.sample_indices == nullptr || opt.sample_indices->size() != batch) {
        throw ConfigError("forward: dropout in train mode needs per-sample ids");
      }
      masks[i] = g.constant(dropout_mask(dropout_rate_, opt.seed, i, opt.iteration,
                                         *opt.sample_indices, layers_[i - 1].width));
    }
  }

  for (const auto& input : step_inputs) {
    if (input.rows() != batch || input.cols() != input_channels_) {
      throw ShapeError("forward: inconsistent step input shape");
    }
    Value x = g.constant(input);
    // Record only the first neuron / first GPN layer within each step.
    bool neuron_recorded = false;
    bool gpn_recorded = false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      switch (l.kind) {
        case LayerSpec::Kind::FC:
          x = g.matmul(x, res.params[layer_param_start_[i]]);
          break;
        case LayerSpec::Kind::Neuron: {
          if (opt.record_neuron_inputs && !neuron_recorded) {
            res.neuron_inputs.push_back(x);
            neuron_recorded = true;
          }
          neurons::NeuronConfig cfg = neuron_cfg_;
          cfg.kind = l.neuron;
          neurons::StepResult r;
          const std::size_t p0 = layer_param_start_[i];
          switch (l.neuron) {
            case NeuronKind::IF:
              r = neurons::if_step(g, states[i], x, cfg);
              break;
            case NeuronKind::LIF:
              r = neurons::lif_step(g, states[i], x, cfg);
              break;
            case NeuronKind::CubaLIF:
              r = neurons::cuba_lif_step(g, states[i], x, cfg, res.params[p0]);
              break;
            case NeuronKind::PLIF:
              r = neurons::plif_step(g, states[i], x, cfg, res.params[p0]);
              break;
            case NeuronKind::GPN: {
              neurons::GPNWeightValues w;
              Value* slots[8] = {&w.wf_v, &w.wf_x, &w.wi_v, &w.wi_x,
                                 &w.wt_v, &w.wt_x, &w.wb_v, &w.wb_x};
              for (int k = 0; k < 8; ++k) *slots[k] = res.params[p0 + k];
              const bool record = opt.record_gates && !gpn_recorded;
              r = neurons::gpn_step(g, states[i], x, w, cfg, record);
              if (record) {
                res.gates.push_back(r.gates);
                gpn_recorded = true;
              }
              break;
            }
          }
          states[i] = r.state;
          x = r.spikes;
          break;
        }
        case LayerSpec::Kind::Dropout:
          if (masks[i].valid()) x = g.mul(x, masks[i]);
          break;
      }
    }
    res.logits.push_back(x);
  }
  return res;
}

}  // namespace gpn::network
