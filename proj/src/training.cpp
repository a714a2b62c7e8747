#include "gpn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "gpn/errors.hpp"
#include "gpn/parallel.hpp"

namespace gpn::train {

using autodiff::Graph;
using autodiff::Reduction;
using autodiff::Value;

const char* loss_mode_name(LossMode m) {
  return m == LossMode::AllStep ? "all_step" : "last_step";
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train: T must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max epochs must be >= 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw ConfigError("train: lr decay factor must lie in (0, 1)");
  }
  if (lr_patience < 1 || early_stop_patience < 1) {
    throw ConfigError("train: patience values must be >= 1");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("train: validation fraction must lie in (0, 1)");
  }
  if (shard_rows < 1) throw ConfigError("train: shard rows must be >= 1");
}

void AdamState::init(const std::vector<network::Param>& params) {
  slots.clear();
  slots.reserve(params.size());
  for (const auto& p : params) {
    slots.push_back({Tensor::zeros(p.value.shape), Tensor::zeros(p.value.shape)});
  }
  step = 0;
}

void adam_step(std::vector<network::Param>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.slots.size()) {
    throw ShapeError("adam: parameter/gradient/state counts disagree");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params[p].value;
    const Tensor& g = grads[p];
    if (!w.same_shape(g)) throw ShapeError("adam: gradient shape mismatch for " + params[p].name);
    if (!g.all_finite()) {
      throw NumericError("adam: non-finite gradient for parameter " + params[p].name +
                         " at step " + std::to_string(state.step));
    }
    auto& slot = state.slots[p];
    for (std::size_t i = 0; i < w.numel(); ++i) {
      const double gi = g.data[i];
      slot.m.data[i] = state.beta1 * slot.m.data[i] + (1.0 - state.beta1) * gi;
      slot.v.data[i] = state.beta2 * slot.v.data[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = slot.m.data[i] / c1;
      const double vhat = slot.v.data[i] / c2;
      w.data[i] -= lr * mhat / std::sqrt(vhat + state.eps);
    }
  }
}

LossPlateauLr::LossPlateauLr(double lr0, double factor, std::size_t patience,
                             double rel_improvement, double floor)
    : lr_(lr0),
      factor_(factor),
      rel_(rel_improvement),
      floor_(floor),
      best_(std::numeric_limits<double>::infinity()),
      patience_(patience) {}

double LossPlateauLr::observe(double epoch_train_loss) {
  if (epoch_train_loss < best_ * (1.0 - rel_)) {
    best_ = epoch_train_loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
    if (bad_epochs_ >= patience_) {
      lr_ = std::max(lr_ * factor_, floor_);
      bad_epochs_ = 0;
    }
  }
  return lr_;
}

Value compute_loss(Graph& g, const std::vector<Value>& logits, const std::vector<int>& labels,
                   LossMode mode, bool average_probs, Reduction red) {
  if (logits.empty()) throw ShapeError("compute_loss: no outputs");
  if (mode == LossMode::LastStep) {
    return g.softmax_cross_entropy(logits.back(), labels, red);
  }
  if (average_probs) {
    std::vector<Value> probs;
    probs.reserve(logits.size());
    for (Value o : logits) probs.push_back(g.softmax(o));
    return g.pick_neg_mean(g.log(g.mean_list(probs)), labels, red);
  }
  return g.softmax_cross_entropy(g.mean_list(logits), labels, red);
}

void MetricsLog::write_csv(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("metrics: cannot write " + path);
  os << "epoch,train_loss,train_acc,val_acc,lr\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.val_acc << ','
       << r.lr << '\n';
  }
}

std::vector<Tensor> assemble_step_inputs(const data::SpikeDataset& ds,
                                         const std::vector<std::size_t>& indices,
                                         std::size_t steps, bool augment,
                                         data::RollGranularity roll, std::uint64_t seed,
                                         std::uint64_t epoch) {
  const std::size_t n = indices.size();
  const std::size_t c = ds.channels;
  std::vector<Tensor> out(steps, Tensor({n, c}));
  for (std::size_t r = 0; r < n; ++r) {
    auto binned = data::bin_sequence(ds.sequences[indices[r]], steps, ds.channels);
    if (augment) {
      Rng rng(mix_key(mix_key(seed, 0x726f6c6cULL), indices[r], epoch));  // "roll"
      data::augment_roll(binned, rng, roll);
    }
    for (std::size_t t = 0; t < steps; ++t) {
      double* dst = out[t].data.data() + r * c;
      const std::uint32_t* src = binned.counts.data() + t * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] = static_cast<double>(src[j]);
    }
  }
  return out;
}

std::vector<int> gather_labels(const data::SpikeDataset& ds,
                               const std::vector<std::size_t>& indices) {
  std::vector<int> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    labels[i] = static_cast<int>(ds.sequences[indices[i]].label);
  }
  return labels;
}

namespace {

std::vector<std::size_t> slice(const std::vector<std::size_t>& v, std::size_t b,
                               std::size_t e) {
  return std::vector<std::size_t>(v.begin() + b, v.begin() + e);
}

std::size_t argmax_row(const Tensor& t, std::size_t row) {
  const std::size_t cols = t.cols();
  std::size_t best = 0;
  for (std::size_t j = 1; j < cols; ++j) {
    if (t.at(row, j) > t.at(row, best)) best = j;  // ties keep the lowest index
  }
  return best;
}

// Shared by evaluate() and the training loop: count correct argmax
// predictions of the time-averaged logits.
std::size_t count_correct(const std::vector<Value>& logits, const std::vector<int>& labels) {
  Tensor mean = logits[0].tensor();
  for (std::size_t t = 1; t < logits.size(); ++t) {
    const Tensor& o = logits[t].tensor();
    for (std::size_t i = 0; i < mean.numel(); ++i) mean.data[i] += o.data[i];
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (argmax_row(mean, r) == static_cast<std::size_t>(labels[r])) ++correct;
  }
  return correct;
}

}  // namespace

EvalResult evaluate(const network::NetworkInstance& net, const data::SpikeDataset& ds,
                    const std::vector<std::size_t>& indices, std::size_t steps,
                    std::size_t batch_size, std::size_t shard_rows, std::size_t threads) {
  if (indices.empty()) throw DataError("evaluate: empty split");
  std::size_t correct = 0;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < indices.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, indices.size());
    const auto batch = slice(indices, start, end);
    const std::size_t shards = shard_count(batch.size(), shard_rows);
    std::vector<std::size_t> shard_correct(shards, 0);
    std::vector<double> shard_loss(shards, 0.0);
    parallel_for(shards, threads, [&](std::size_t s) {
      const std::size_t b = s * shard_rows;
      const std::size_t e = std::min(b + shard_rows, batch.size());
      const auto rows = slice(batch, b, e);
      const auto inputs = assemble_step_inputs(ds, rows, steps, false,
                                               data::RollGranularity::PerStep, 0, 0);
      const auto labels = gather_labels(ds, rows);
      Graph g;
      network::ForwardOptions opt;  // eval mode, no gradients
      auto fwd = net.forward(g, inputs, opt);
      shard_correct[s] = count_correct(fwd.logits, labels);
      shard_loss[s] = compute_loss(g, fwd.logits, labels, LossMode::AllStep, false,
                                   Reduction::Sum)
                          .tensor()
                          .data[0];
    });
    for (std::size_t s = 0; s < shards; ++s) {
      correct += shard_correct[s];
      loss_sum += shard_loss[s];
    }
  }
  EvalResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  r.mean_loss = loss_sum / static_cast<double>(indices.size());
  return r;
}

TrainResult train(network::NetworkInstance& net, const data::SpikeDataset& train_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  auto split = data::split_train_val(train_set.size(), cfg.val_fraction, cfg.seed);

  auto& params = net.params();
  AdamState adam;
  adam.init(params);
  LossPlateauLr sched(cfg.lr, cfg.lr_decay_factor, cfg.lr_patience, cfg.lr_rel_improvement,
                      cfg.lr_floor);

  TrainResult result;
  auto snapshot = [&] {
    result.best_params.clear();
    for (const auto& p : params) result.best_params.push_back(p.value);
  };
  snapshot();  // last-good fallback in case the very first epoch diverges

  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t epochs_since_best = 0;
  std::uint64_t iteration = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double epoch_loss_sum = 0.0;
    double epoch_val_acc = 0.0;
    std::size_t epoch_correct = 0, epoch_seen = 0;
    data::BatchIterator batches(split.train, cfg.batch_size, cfg.seed, epoch);
    std::vector<std::size_t> batch;
    try {
      while (batches.next(batch)) {
        ++iteration;
        const std::size_t shards = shard_count(batch.size(), cfg.shard_rows);
        std::vector<std::vector<Tensor>> shard_grads(shards);
        std::vector<double> shard_loss(shards, 0.0);
        std::vector<std::size_t> shard_correct(shards, 0);

        parallel_for(shards, cfg.threads, [&](std::size_t s) {
          const std::size_t b = s * cfg.shard_rows;
          const std::size_t e = std::min(b + cfg.shard_rows, batch.size());
          const auto rows = slice(batch, b, e);
          const auto inputs = assemble_step_inputs(train_set, rows, cfg.steps, cfg.augment,
                                                   cfg.roll, cfg.seed, epoch);
          const auto labels = gather_labels(train_set, rows);
          Graph g;
          network::ForwardOptions opt;
          opt.train_mode = true;
          opt.requires_grad = true;
          opt.seed = cfg.seed;
          opt.iteration = iteration;
          opt.sample_indices = &rows;
          auto fwd = net.forward(g, inputs, opt);
          auto loss = compute_loss(g, fwd.logits, labels, cfg.loss_mode, cfg.average_probs,
                                   Reduction::Sum);
          g.backward(loss);
          shard_loss[s] = loss.tensor().data[0];
          shard_correct[s] = count_correct(fwd.logits, labels);
          shard_grads[s].reserve(params.size());
          for (Value pv : fwd.params) shard_grads[s].push_back(pv.grad());
        });

        // ordered merge, then scale the summed gradients to a batch mean
        std::vector<Tensor> grads = std::move(shard_grads[0]);
        for (std::size_t s = 1; s < shards; ++s) {
          for (std::size_t p = 0; p < grads.size(); ++p) {
            const Tensor& src = shard_grads[s][p];
            for (std::size_t i = 0; i < src.numel(); ++i) grads[p].data[i] += src.data[i];
          }
        }
        const double inv_batch = 1.0 / static_cast<double>(batch.size());
        for (auto& gt : grads) {
          for (double& x : gt.data) x *= inv_batch;
        }
        adam_step(params, grads, adam, sched.lr());

        for (std::size_t s = 0; s < shards; ++s) {
          epoch_loss_sum += shard_loss[s];
          epoch_correct += shard_correct[s];
        }
        epoch_seen += batch.size();
      }
      const auto val = evaluate(net, train_set, split.validation, cfg.steps, cfg.batch_size,
                                cfg.shard_rows, cfg.threads);
      epoch_val_acc = val.accuracy;
    } catch (const NumericError&) {
      result.diverged = true;
      result.epochs_run = epoch;
      result.iterations = iteration;
      return result;
    }

    const double train_loss = epoch_loss_sum / static_cast<double>(epoch_seen);
    const double train_acc = static_cast<double>(epoch_correct) / static_cast<double>(epoch_seen);
    result.metrics.rows.push_back({epoch, train_loss, train_acc, epoch_val_acc, sched.lr()});
    result.epochs_run = epoch;
    result.iterations = iteration;

    if (epoch_val_acc > result.best_val_acc) {
      result.best_val_acc = epoch_val_acc;
      result.best_epoch = epoch;
      epochs_since_best = 0;
      snapshot();
    } else {
      ++epochs_since_best;
    }

    if (std::isnan(initial_loss)) initial_loss = train_loss;
    if (cfg.stop_below_frac_of_initial > 0.0 && epoch > 1 &&
        train_loss < cfg.stop_below_frac_of_initial * initial_loss) {
      result.stopped_pre_convergence = true;
      break;
    }
    if (epochs_since_best >= cfg.early_stop_patience) break;
    sched.observe(train_loss);
  }
  return result;
}

}  // namespace gpn::train
