#include "gpn/config.hpp"

#include <cstdio>
#include <fstream>
#include <thread>

#include "gpn/errors.hpp"

namespace gpn::cli {

namespace {

bool has_non_gpn_neuron(const std::vector<network::LayerSpec>& layers) {
  for (const auto& l : layers) {
    if (l.kind == network::LayerSpec::Kind::Neuron && l.neuron != neurons::NeuronKind::GPN) {
      return true;
    }
  }
  return false;
}

bool has_kind(const std::vector<network::LayerSpec>& layers, neurons::NeuronKind k) {
  for (const auto& l : layers) {
    if (l.kind == network::LayerSpec::Kind::Neuron && l.neuron == k) return true;
  }
  return false;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<network::LayerSpec> RunConfig::resolved_layers() const {
  auto layers = network::parse_architecture(arch);
  if (!neuron.empty()) {
    const auto kind = neurons::parse_kind(neuron);
    if (!kind) throw ConfigError("unknown neuron kind '" + neuron + "'");
    for (auto& l : layers) {
      if (l.kind == network::LayerSpec::Kind::Neuron) l.neuron = *kind;
    }
  }
  return layers;
}

neurons::NeuronConfig RunConfig::to_neuron_config() const {
  neurons::NeuronConfig cfg;
  const auto layers = resolved_layers();
  for (const auto& l : layers) {
    if (l.kind == network::LayerSpec::Kind::Neuron) {
      cfg.kind = l.neuron;
      break;
    }
  }
  for (const auto& tag : ablate) {
    if (tag == "FI") cfg.ablation.forget_input = true;
    else if (tag == "T") cfg.ablation.threshold = true;
    else if (tag == "B") cfg.ablation.bypass = true;
  }
  cfg.beta = beta;
  cfg.alpha = alpha;
  cfg.v_th = vth;
  // Baseline kinds get the common defaults; frozen GPN gates require the
  // constants explicitly (validated in validate()).
  if (has_non_gpn_neuron(layers)) {
    if (!cfg.beta) cfg.beta = 0.5;
    if (!cfg.v_th) cfg.v_th = 1.0;
    if (!cfg.alpha && has_kind(layers, neurons::NeuronKind::CubaLIF)) cfg.alpha = 0.5;
  }
  cfg.activation = (activation == "smooth") ? autodiff::ActivationMode::Smooth
                                            : autodiff::ActivationMode::Hard;
  cfg.detach_reset = detach_reset;
  return cfg;
}

train::TrainConfig RunConfig::to_train_config() const {
  train::TrainConfig cfg;
  cfg.steps = steps;
  cfg.lr = lr;
  cfg.batch_size = batch;
  cfg.max_epochs = epochs;
  cfg.loss_mode = (loss == "last_step") ? train::LossMode::LastStep : train::LossMode::AllStep;
  cfg.lr_decay_factor = lr_decay;
  cfg.lr_patience = lr_patience;
  cfg.early_stop_patience = stop_patience;
  cfg.seed = seed;
  cfg.val_fraction = val_fraction;
  cfg.augment = (roll != "off");
  cfg.roll = (roll == "per_sample") ? data::RollGranularity::PerSample
                                    : data::RollGranularity::PerStep;
  cfg.average_probs = avg_probs;
  cfg.stop_below_frac_of_initial = stop_below_frac;
  cfg.shard_rows = shard_rows;
  cfg.threads = resolved_threads();
  return cfg;
}

std::size_t RunConfig::resolved_threads() const {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };

  check(!arch.empty(), "an architecture is required (--arch or a dataset preset)");
  std::vector<network::LayerSpec> layers;
  if (!arch.empty()) {
    try {
      layers = resolved_layers();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  if (!neuron.empty() && !neurons::parse_kind(neuron)) {
    problems.push_back("unknown neuron kind '" + neuron + "' (if|lif|cuba|plif|gpn)");
  }
  check(steps >= 1, "T must be >= 1");
  check(lr > 0.0, "learning rate must be positive");
  check(batch >= 1, "batch size must be >= 1");
  check(epochs >= 1, "epochs must be >= 1");
  check(loss == "all_step" || loss == "last_step", "loss must be all_step or last_step");
  check(roll == "per_step" || roll == "per_sample" || roll == "off",
        "roll must be per_step, per_sample or off");
  check(activation == "hard" || activation == "smooth", "activation must be hard or smooth");
  check(dropout >= 0.0 && dropout < 1.0, "dropout rate must lie in [0, 1)");
  check(val_fraction > 0.0 && val_fraction < 1.0, "validation fraction must lie in (0, 1)");
  check(lr_decay > 0.0 && lr_decay < 1.0, "lr decay factor must lie in (0, 1)");
  check(lr_patience >= 1, "lr patience must be >= 1");
  check(stop_patience >= 1, "early-stop patience must be >= 1");
  check(shard_rows >= 1, "shard rows must be >= 1");
  for (const auto& tag : ablate) {
    check(tag == "FI" || tag == "T" || tag == "B",
          "unknown ablation tag '" + tag + "' (FI, T, B)");
  }
  if (beta) check(*beta > 0.0 && *beta < 1.0, "beta must lie in (0, 1)");
  if (alpha) check(*alpha > 0.0 && *alpha < 1.0, "alpha must lie in (0, 1)");

  const bool ablate_fi =
      std::find(ablate.begin(), ablate.end(), "FI") != ablate.end();
  const bool ablate_t = std::find(ablate.begin(), ablate.end(), "T") != ablate.end();
  const bool has_gpn = has_kind(layers, neurons::NeuronKind::GPN);
  if (has_gpn && ablate_fi) {
    check(beta.has_value(), "frozen forget/input gates need an explicit --beta");
  }
  if (has_gpn && ablate_t) {
    check(vth.has_value(), "a frozen threshold gate needs an explicit --vth");
  }
  if (!layers.empty() && !has_gpn && !ablate.empty()) {
    problems.push_back("--ablate only applies to GPN architectures");
  }
  return problems;
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_key_values() const {
  std::vector<std::pair<std::string, std::string>> kv;
  auto add = [&kv](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
  add("dataset", dataset);
  add("train-file", train_file);
  add("test-file", test_file);
  add("out", out_dir);
  add("arch", arch);
  add("neuron", neuron);
  add("dropout", format_double(dropout));
  add("activation", activation);
  add("detach-reset", detach_reset ? "1" : "0");
  {
    std::string s;
    for (const auto& a : ablate) s += (s.empty() ? "" : ",") + a;
    add("ablate", s);
  }
  if (beta) add("beta", format_double(*beta));
  if (alpha) add("alpha", format_double(*alpha));
  if (vth) add("vth", format_double(*vth));
  add("T", std::to_string(steps));
  add("lr", format_double(lr));
  add("batch", std::to_string(batch));
  add("epochs", std::to_string(epochs));
  add("loss", loss);
  add("seed", std::to_string(seed));
  add("val-fraction", format_double(val_fraction));
  add("roll", roll);
  add("lr-decay", format_double(lr_decay));
  add("lr-patience", std::to_string(lr_patience));
  add("stop-patience", std::to_string(stop_patience));
  add("avg-probs", avg_probs ? "1" : "0");
  add("stop-below-frac", format_double(stop_below_frac));
  add("threads", std::to_string(threads));
  add("shard-rows", std::to_string(shard_rows));
  return kv;
}

void RunConfig::write_sidecar(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("config: cannot write " + path);
  for (const auto& [k, v] : to_key_values()) os << k << '=' << v << '\n';
}

}  // namespace gpn::cli
