#include "gpn/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gpn/analysis.hpp"
#include "gpn/checkpoint.hpp"
#include "gpn/config.hpp"
#include "gpn/datagen.hpp"
#include "gpn/errors.hpp"

namespace gpn::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Shared flag wiring for commands that train networks.
void add_model_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--arch", rc.arch, "architecture string, e.g. FC1024-GPN1024-DP-FC20");
  cmd->add_option("--neuron", rc.neuron,
                  "replace every neuron layer's kind: if|lif|cuba|plif|gpn");
  cmd->add_option("--dropout", rc.dropout, "dropout rate for DP layers");
  cmd->add_option("--activation", rc.activation, "spike activation: hard|smooth");
  cmd->add_flag("--detach-reset,!--no-detach-reset", rc.detach_reset,
                "cut gradients through the reset path (default on)");
  cmd->add_option("--ablate", rc.ablate, "GPN gates to freeze: FI, T, B (repeatable)");
  cmd->add_option("--beta", rc.beta, "membrane leak constant");
  cmd->add_option("--alpha", rc.alpha, "synaptic leak constant (Cuba-LIF)");
  cmd->add_option("--vth", rc.vth, "firing threshold constant");
}

void add_train_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--dataset", rc.dataset, "recipe preset: shd|ssc");
  cmd->add_option("--train-file", rc.train_file, "training SPKE container");
  cmd->add_option("--test-file", rc.test_file, "test SPKE container");
  cmd->add_option("--out", rc.out_dir, "output directory");
  cmd->add_option("--T", rc.steps, "time steps for binning");
  cmd->add_option("--lr", rc.lr, "initial learning rate");
  cmd->add_option("--batch", rc.batch, "batch size");
  cmd->add_option("--epochs", rc.epochs, "maximum epochs");
  cmd->add_option("--loss", rc.loss, "loss mode: all_step|last_step");
  cmd->add_option("--seed", rc.seed, "run seed");
  cmd->add_option("--val-fraction", rc.val_fraction, "validation reservation fraction");
  cmd->add_option("--roll", rc.roll, "channel-roll augmentation: per_step|per_sample|off");
  cmd->add_option("--lr-decay", rc.lr_decay, "plateau decay factor");
  cmd->add_option("--lr-patience", rc.lr_patience, "plateau patience, epochs");
  cmd->add_option("--stop-patience", rc.stop_patience, "early-stop patience, epochs");
  cmd->add_flag("--avg-probs", rc.avg_probs,
                "average post-softmax probabilities instead of logits");
  cmd->add_option("--threads", rc.threads, "worker threads (0 = hardware)");
  cmd->add_option("--shard-rows", rc.shard_rows, "rows per gradient shard");
}

// Plain key=value configuration file; keys are the long flag names without
// the leading dashes. Values given on the command line win. Unknown keys
// are rejected.
void apply_config_file(const CLI::App* cmd, const std::string& path, RunConfig& rc) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  auto flag_given = [cmd](const char* flag) {
    const auto* opt = cmd->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
    line = line.substr(start);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file " + path + ": line " + std::to_string(line_no) +
                        " is not key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    const std::string flag = "--" + key;
    if (flag_given(flag.c_str())) continue;  // command line wins
    try {
      if (key == "dataset") rc.dataset = value;
      else if (key == "train-file") rc.train_file = value;
      else if (key == "test-file") rc.test_file = value;
      else if (key == "out") rc.out_dir = value;
      else if (key == "arch") rc.arch = value;
      else if (key == "neuron") rc.neuron = value;
      else if (key == "dropout") rc.dropout = std::stod(value);
      else if (key == "activation") rc.activation = value;
      else if (key == "detach-reset") rc.detach_reset = (value == "1" || value == "true");
      else if (key == "ablate") {
        rc.ablate.clear();
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) rc.ablate.push_back(item);
        }
      } else if (key == "beta") rc.beta = std::stod(value);
      else if (key == "alpha") rc.alpha = std::stod(value);
      else if (key == "vth") rc.vth = std::stod(value);
      else if (key == "T") rc.steps = std::stoul(value);
      else if (key == "lr") rc.lr = std::stod(value);
      else if (key == "batch") rc.batch = std::stoul(value);
      else if (key == "epochs") rc.epochs = std::stoul(value);
      else if (key == "loss") rc.loss = value;
      else if (key == "seed") rc.seed = std::stoull(value);
      else if (key == "val-fraction") rc.val_fraction = std::stod(value);
      else if (key == "roll") rc.roll = value;
      else if (key == "lr-decay") rc.lr_decay = std::stod(value);
      else if (key == "lr-patience") rc.lr_patience = std::stoul(value);
      else if (key == "stop-patience") rc.stop_patience = std::stoul(value);
      else if (key == "avg-probs") rc.avg_probs = (value == "1" || value == "true");
      else if (key == "stop-below-frac") rc.stop_below_frac = std::stod(value);
      else if (key == "threads") rc.threads = std::stoul(value);
      else if (key == "shard-rows") rc.shard_rows = std::stoul(value);
      else {
        throw ConfigError("config file " + path + ": unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      throw ConfigError("config file " + path + ": bad value for key '" + key + "'");
    }
  }
}

void apply_preset(const CLI::App* cmd, RunConfig& rc) {
  if (rc.dataset.empty()) return;
  struct Preset {
    std::size_t steps, batch, epochs;
    double lr;
    const char* arch;
  };
  Preset p;
  if (rc.dataset == "shd") {
    p = {40, 128, 150, 5e-4, "FC1024-GPN1024-DP-FC20"};
  } else if (rc.dataset == "ssc") {
    p = {60, 1024, 300, 1e-3, "(FC1024-GPN1024-DP)*3-FC35"};
  } else {
    throw ConfigError("unknown dataset preset '" + rc.dataset + "' (shd|ssc)");
  }
  if (cmd->count("--T") == 0) rc.steps = p.steps;
  if (cmd->count("--batch") == 0) rc.batch = p.batch;
  if (cmd->count("--epochs") == 0) rc.epochs = p.epochs;
  if (cmd->count("--lr") == 0) rc.lr = p.lr;
  if (rc.arch.empty()) rc.arch = p.arch;
  if (rc.train_file.empty()) rc.train_file = "data/" + rc.dataset + "_train.spk";
  if (rc.test_file.empty()) rc.test_file = "data/" + rc.dataset + "_test.spk";
}

void require_valid(const RunConfig& rc) {
  const auto problems = rc.validate();
  if (problems.empty()) return;
  std::ostringstream os;
  os << "invalid configuration (" << problems.size() << " problem(s)):";
  for (const auto& p : problems) {
    std::cerr << "config error: " << p << "\n";
    os << "\n  - " << p;
  }
  throw ConfigError(os.str());
}

data::SpikeDataset load_dataset(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("a ") + what + " SPKE file is required");
  return data::load_events(path);
}

void check_labels_fit(const data::SpikeDataset& ds, std::size_t classes, const char* which) {
  if (ds.num_classes() > classes) {
    throw DataError(std::string(which) + " labels reach class " +
                    std::to_string(ds.num_classes() - 1) + " but the readout has only " +
                    std::to_string(classes) + " outputs");
  }
}

network::NetworkInstance build_network(const RunConfig& rc, std::size_t channels) {
  return network::NetworkInstance(rc.resolved_layers(), channels, rc.to_neuron_config(),
                                  rc.dropout, rc.seed);
}

void save_run_checkpoint(const network::NetworkInstance& net, const RunConfig& rc,
                         const train::TrainResult& result, const std::string& path) {
  auto bundle = checkpoint::CheckpointBundle::from_network(
      net, rc.seed, result.best_epoch, result.best_val_acc, &result.best_params);
  bundle.steps = rc.steps;
  bundle.val_fraction = rc.val_fraction;
  checkpoint::save_checkpoint(bundle, path);
}

int cmd_train(const CLI::App* cmd, RunConfig& rc, const std::string& config_path) {
  if (!config_path.empty()) apply_config_file(cmd, config_path, rc);
  apply_preset(cmd, rc);
  require_valid(rc);
  fs::create_directories(rc.out_dir);
  rc.write_sidecar(rc.out_dir + "/resolved.cfg");

  auto train_set = load_dataset(rc.train_file, "training");
  auto net = build_network(rc, train_set.channels);
  check_labels_fit(train_set, net.output_classes(), "training");

  std::printf("training %s on %zu sequences (T=%zu, lr=%g, batch=%zu, seed=%llu)\n",
              net.architecture().c_str(), train_set.size(), rc.steps, rc.lr, rc.batch,
              static_cast<unsigned long long>(rc.seed));
  std::fflush(stdout);

  auto result = train::train(net, train_set, rc.to_train_config());
  result.metrics.write_csv(rc.out_dir + "/metrics.csv");
  save_run_checkpoint(net, rc, result, rc.out_dir + "/checkpoint.gpnw");

  if (result.diverged) {
    std::fprintf(stderr,
                 "training diverged (non-finite loss); saved the last good checkpoint\n");
    return kExitNumeric;
  }
  std::printf("best validation accuracy %.4f at epoch %zu (%zu epochs run)\n",
              result.best_val_acc, result.best_epoch, result.epochs_run);

  if (!rc.test_file.empty() && fs::exists(rc.test_file)) {
    auto test_set = load_dataset(rc.test_file, "test");
    check_labels_fit(test_set, net.output_classes(), "test");
    auto best = checkpoint::load_checkpoint(rc.out_dir + "/checkpoint.gpnw").to_network();
    const auto r = train::evaluate(best, test_set, iota_indices(test_set.size()), rc.steps,
                                   rc.batch, rc.shard_rows, rc.resolved_threads());
    std::printf("test_accuracy %.4f\n", r.accuracy);
  }
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& split,
             const std::string& train_file, const std::string& test_file, std::size_t steps,
             std::size_t batch, std::size_t threads) {
  auto bundle = checkpoint::load_checkpoint(ckpt_path);
  auto net = bundle.to_network();
  const std::size_t T = steps > 0 ? steps : (bundle.steps > 0 ? bundle.steps : 40);

  data::SpikeDataset ds;
  std::vector<std::size_t> indices;
  if (split == "test") {
    ds = load_dataset(test_file, "test");
    indices = iota_indices(ds.size());
  } else {
    ds = load_dataset(train_file, "training");
    auto sp = data::split_train_val(ds.size(), bundle.val_fraction, bundle.seed);
    indices = (split == "val") ? sp.validation : sp.train;
  }
  if (split != "test" && split != "val" && split != "train") {
    throw ConfigError("--split must be train, val or test");
  }
  check_labels_fit(ds, net.output_classes(), split.c_str());
  const auto r = train::evaluate(net, ds, indices, T, batch, 32,
                                 threads > 0 ? threads : 1);
  std::printf("%.4f\n", r.accuracy);
  return kExitOk;
}

int cmd_grad_analysis(const CLI::App* cmd, RunConfig& rc, const std::string& config_path,
                      const std::string& t_list, std::size_t width, std::size_t grad_batch,
                      const std::string& experiment) {
  if (!config_path.empty()) apply_config_file(cmd, config_path, rc);
  apply_preset(cmd, rc);
  if (rc.arch.empty()) {
    const std::string kind = rc.neuron.empty() ? "lif" : rc.neuron;
    std::string token = kind;
    std::transform(token.begin(), token.end(), token.begin(), ::toupper);
    rc.arch = "FC" + std::to_string(width) + "-" + token + std::to_string(width) + "-FC20";
    rc.neuron.clear();  // the kind is already in the token
  }
  if (cmd->count("--loss") == 0) rc.loss = "last_step";
  if (rc.stop_below_frac <= 0.0) rc.stop_below_frac = 0.9;
  require_valid(rc);

  std::vector<std::size_t> t_values;
  {
    std::stringstream ss(t_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) t_values.push_back(std::stoul(item));
    }
  }
  if (t_values.empty()) throw ConfigError("--T-list needs at least one value");

  {
    const auto layers = rc.resolved_layers();
    std::size_t spiking = 0;
    for (const auto& l : layers) {
      spiking += (l.kind == network::LayerSpec::Kind::Neuron) ? 1 : 0;
    }
    if (spiking != 1) {
      throw ConfigError("grad-analysis needs exactly one spiking layer in the architecture");
    }
  }

  fs::create_directories(rc.out_dir);
  auto train_set = load_dataset(rc.train_file, "training");
  data::SpikeDataset probe_set;
  if (!rc.test_file.empty()) {
    probe_set = load_dataset(rc.test_file, "test");
  }
  const data::SpikeDataset& probe = rc.test_file.empty() ? train_set : probe_set;

  for (const std::size_t T : t_values) {
    RunConfig run = rc;
    run.steps = T;
    run.write_sidecar(rc.out_dir + "/resolved_T" + std::to_string(T) + ".cfg");
    auto net = build_network(run, train_set.channels);
    check_labels_fit(train_set, net.output_classes(), "training");

    std::printf("grad-analysis: training %s at T=%zu to the pre-convergence point\n",
                net.architecture().c_str(), T);
    std::fflush(stdout);
    auto cfg = run.to_train_config();
    auto result = train::train(net, train_set, cfg);
    if (result.diverged) {
      std::fprintf(stderr, "grad-analysis: training diverged at T=%zu\n", T);
      return kExitNumeric;
    }
    std::printf("grad-analysis: stopped after %zu epochs (pre-convergence %s)\n",
                result.epochs_run, result.stopped_pre_convergence ? "reached" : "cap hit");

    const std::size_t n = std::min(grad_batch, probe.size());
    auto rec = analysis::grad_vs_time(net, probe, iota_indices(n), T, run.shard_rows,
                                      run.resolved_threads());
    const auto path = analysis::analysis_filename(rc.out_dir, experiment, rec.neuron, T);
    analysis::write_gradient_csv(rec, path);
    std::printf("grad-analysis: wrote %s\n", path.c_str());
  }
  return kExitOk;
}

int cmd_param_analysis(const std::string& ckpt_path, const std::string& test_file,
                       std::size_t batch, std::size_t bins, const std::string& out_dir,
                       const std::string& experiment, std::size_t threads) {
  auto bundle = checkpoint::load_checkpoint(ckpt_path);
  auto net = bundle.to_network();
  bool has_gpn = false;
  for (const auto& l : net.layers()) {
    has_gpn = has_gpn || (l.kind == network::LayerSpec::Kind::Neuron &&
                          l.neuron == neurons::NeuronKind::GPN);
  }
  if (!has_gpn) throw ConfigError("param-analysis requires a GPN checkpoint");

  auto ds = load_dataset(test_file, "test");
  const std::size_t T = bundle.steps > 0 ? bundle.steps : 40;
  const std::size_t n = std::min(batch, ds.size());
  fs::create_directories(out_dir);

  auto gates = analysis::extract_gate_params(net, ds, iota_indices(n), T, 32,
                                             threads > 0 ? threads : 1);
  const auto tau1 = analysis::to_time_constants(gates.forget);
  const auto tau2 = analysis::to_time_constants(gates.input);

  struct Job {
    const analysis::Cube* cube;
    const char* tag;
    analysis::DistFamily family;
  };
  const Job jobs[] = {
      {&tau1, "tau1", analysis::DistFamily::LogNormal},
      {&tau2, "tau2", analysis::DistFamily::LogNormal},
      {&gates.threshold, "vth", analysis::DistFamily::Normal},
  };
  for (const auto& job : jobs) {
    const auto spatial = analysis::spatial_average(*job.cube);
    const auto hist = analysis::histogram_density(spatial, bins);
    analysis::write_histogram_csv(
        hist, analysis::analysis_filename(out_dir, experiment + "_" + job.tag + "_hist", "gpn", T));
    const auto fit = analysis::fit_distribution(spatial, job.family);
    analysis::write_fit_csv(
        fit, analysis::analysis_filename(out_dir, experiment + "_" + job.tag + "_fit", "gpn", T));
    const auto trace = analysis::temporal_trace(*job.cube);
    analysis::write_trace_csv(
        trace,
        analysis::analysis_filename(out_dir, experiment + "_" + job.tag + "_trace", "gpn", T));
  }
  std::printf("param-analysis: wrote 9 CSV files under %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_convert(const std::string& in_path, const std::string& out_path,
                std::uint16_t channels) {
  std::ifstream is(in_path);
  if (!is) throw DataError("convert: cannot open " + in_path);
  data::SpikeDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::uint16_t max_unit = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string field;
    if (!std::getline(ls, field, ';')) continue;
    data::SpikeEventSequence seq;
    try {
      seq.label = static_cast<std::uint16_t>(std::stoul(field));
    } catch (...) {
      throw DataError("convert: bad label on line " + std::to_string(line_no));
    }
    while (std::getline(ls, field, ';')) {
      if (field.empty()) continue;
      const auto comma = field.find(',');
      if (comma == std::string::npos) {
        throw DataError("convert: expected 't,unit' on line " + std::to_string(line_no));
      }
      try {
        seq.times.push_back(std::stod(field.substr(0, comma)));
        const unsigned long unit = std::stoul(field.substr(comma + 1));
        if (unit > 0xffff) throw std::out_of_range("unit");
        seq.units.push_back(static_cast<std::uint16_t>(unit));
      } catch (const DataError&) {
        throw;
      } catch (...) {
        throw DataError("convert: bad event '" + field + "' on line " + std::to_string(line_no));
      }
      max_unit = std::max(max_unit, seq.units.back());
    }
    if (!std::is_sorted(seq.times.begin(), seq.times.end())) {
      throw DataError("convert: unsorted event times on line " + std::to_string(line_no));
    }
    ds.sequences.push_back(std::move(seq));
  }
  ds.channels = channels > 0 ? channels : static_cast<std::uint16_t>(max_unit + 1);
  for (const auto& seq : ds.sequences) {
    for (auto u : seq.units) {
      if (u >= ds.channels) {
        throw DataError("convert: unit " + std::to_string(u) + " exceeds channel count " +
                        std::to_string(ds.channels));
      }
    }
  }
  data::save_events(ds, out_path);
  std::printf("convert: wrote %zu sequences, %u channels to %s\n", ds.size(),
              static_cast<unsigned>(ds.channels), out_path.c_str());
  return kExitOk;
}

int cmd_datagen(const std::string& out_dir, const std::string& preset,
                datagen::SynthConfig cfg, std::size_t test_sequences) {
  if (preset == "tiny") {
    cfg.channels = 100;
    cfg.sequences = cfg.sequences == 8156 ? 400 : cfg.sequences;
    test_sequences = test_sequences == 2264 ? 120 : test_sequences;
  } else if (preset != "shd") {
    throw ConfigError("unknown datagen preset '" + preset + "' (shd|tiny)");
  }
  fs::create_directories(out_dir);
  auto train_set = datagen::generate(cfg, 0);
  data::save_events(train_set, out_dir + "/train.spk");
  datagen::SynthConfig test_cfg = cfg;
  test_cfg.sequences = test_sequences;
  auto test_set = datagen::generate(test_cfg, 1);
  data::save_events(test_set, out_dir + "/test.spk");
  std::printf("datagen: wrote %zu train and %zu test sequences (%u channels, %zu classes)\n",
              train_set.size(), test_set.size(), static_cast<unsigned>(cfg.channels),
              cfg.classes);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"spiking-network training and analysis toolkit"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path;

  auto* train_cmd = app.add_subcommand("train", "train a network");
  add_train_flags(train_cmd, rc);
  add_model_flags(train_cmd, rc);
  train_cmd->add_option("--config", config_path, "key=value configuration file");

  // eval
  std::string eval_ckpt, eval_split = "test", eval_train_file, eval_test_file;
  std::size_t eval_T = 0, eval_batch = 128, eval_threads = 0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "GPNW checkpoint")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test");
  eval_cmd->add_option("--train-file", eval_train_file, "training SPKE (train/val splits)");
  eval_cmd->add_option("--test-file", eval_test_file, "test SPKE");
  eval_cmd->add_option("--T", eval_T, "override binning steps");
  eval_cmd->add_option("--batch", eval_batch, "batch size");
  eval_cmd->add_option("--threads", eval_threads, "worker threads");

  // grad-analysis
  std::string ga_t_list = "20,40,60,80,100", ga_experiment = "grad";
  std::size_t ga_width = 128, ga_batch = 128;
  auto* ga_cmd = app.add_subcommand("grad-analysis",
                                    "per-step gradient statistics at several T");
  add_train_flags(ga_cmd, rc);
  add_model_flags(ga_cmd, rc);
  ga_cmd->add_option("--config", config_path, "key=value configuration file");
  ga_cmd->add_option("--T-list", ga_t_list, "comma-separated T values");
  ga_cmd->add_option("--width", ga_width, "spiking layer width for the default architecture");
  ga_cmd->add_option("--grad-batch", ga_batch, "batch size for the gradient probe");
  ga_cmd->add_option("--experiment", ga_experiment, "output file prefix");
  ga_cmd->add_option("--stop-below-frac", rc.stop_below_frac,
                     "pre-convergence stop fraction of the first epoch's loss");

  // param-analysis
  std::string pa_ckpt, pa_test_file, pa_out = "analysis", pa_experiment = "param";
  std::size_t pa_batch = 128, pa_bins = 50, pa_threads = 0;
  auto* pa_cmd = app.add_subcommand("param-analysis",
                                    "neuronal-parameter histograms, fits and traces");
  pa_cmd->add_option("--checkpoint", pa_ckpt, "GPN checkpoint")->required();
  pa_cmd->add_option("--test-file", pa_test_file, "test SPKE container")->required();
  pa_cmd->add_option("--batch", pa_batch, "batch size for gate extraction");
  pa_cmd->add_option("--bins", pa_bins, "histogram bins");
  pa_cmd->add_option("--out", pa_out, "output directory");
  pa_cmd->add_option("--experiment", pa_experiment, "output file prefix");
  pa_cmd->add_option("--threads", pa_threads, "worker threads");

  // convert
  std::string cv_in, cv_out;
  std::uint16_t cv_channels = 0;
  auto* cv_cmd = app.add_subcommand("convert", "text event dump -> SPKE");
  cv_cmd->add_option("--in", cv_in, "input text file (label;t,unit;t,unit;...)")->required();
  cv_cmd->add_option("--out", cv_out, "output SPKE path")->required();
  cv_cmd->add_option("--channels", cv_channels, "channel count (default: max unit + 1)");

  // datagen
  std::string dg_out = "data", dg_preset = "shd";
  datagen::SynthConfig dg_cfg;
  std::size_t dg_test_n = 2264;
  auto* dg_cmd = app.add_subcommand("datagen", "generate a synthetic spike-audio corpus");
  dg_cmd->add_option("--out", dg_out, "output directory");
  dg_cmd->add_option("--preset", dg_preset, "shd|tiny");
  dg_cmd->add_option("--seed", dg_cfg.seed, "corpus seed");
  dg_cmd->add_option("--channels", dg_cfg.channels, "channel count");
  dg_cmd->add_option("--classes", dg_cfg.classes, "class count (even)");
  dg_cmd->add_option("--train-n", dg_cfg.sequences, "training sequences");
  dg_cmd->add_option("--test-n", dg_test_n, "test sequences");
  dg_cmd->add_option("--rate-hi", dg_cfg.rate_hi, "in-band spike rate, Hz");
  dg_cmd->add_option("--rate-bg", dg_cfg.rate_bg, "background spike rate, Hz");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_cmd, rc, config_path);
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_ckpt, eval_split, eval_train_file, eval_test_file, eval_T,
                      eval_batch, eval_threads);
    }
    if (ga_cmd->parsed()) {
      return cmd_grad_analysis(ga_cmd, rc, config_path, ga_t_list, ga_width, ga_batch,
                               ga_experiment);
    }
    if (pa_cmd->parsed()) {
      return cmd_param_analysis(pa_ckpt, pa_test_file, pa_batch, pa_bins, pa_out,
                                pa_experiment, pa_threads);
    }
    if (cv_cmd->parsed()) return cmd_convert(cv_in, cv_out, cv_channels);
    if (dg_cmd->parsed()) return cmd_datagen(dg_out, dg_preset, dg_cfg, dg_test_n);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return kExitOk;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace gpn::cli
