// BPTT training loop with the two loss modes (cross-entropy on the
// time-averaged logits vs. on the last step only), Adam, loss-plateau
// learning-rate decay, early stopping on validation accuracy, and per-epoch
// CSV metrics.
//
// Batches are processed in fixed-size row shards, each with its own graph;
// shard gradients are merged in shard order, so results depend on the seed
// and shard size but not on the worker-thread count.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpn/network.hpp"
#include "gpn/spike_data.hpp"

namespace gpn::train {

enum class LossMode { AllStep, LastStep };

const char* loss_mode_name(LossMode m);

struct TrainConfig {
  std::size_t steps = 40;  // T
  double lr = 5e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 150;
  LossMode loss_mode = LossMode::AllStep;
  double lr_decay_factor = 0.5;
  std::size_t lr_patience = 5;
  std::size_t early_stop_patience = 20;
  std::uint64_t seed = 0;
  double val_fraction = 0.15;

  bool augment = true;
  data::RollGranularity roll = data::RollGranularity::PerStep;
  bool average_probs = false;  // average post-softmax probabilities instead of logits
  double lr_floor = 1e-6;
  double lr_rel_improvement = 1e-3;
  // When > 0: stop at the first epoch (after the first) whose train loss
  // falls below this fraction of the first epoch's loss. Used to take
  // pre-convergence checkpoints for gradient analysis.
  double stop_below_frac_of_initial = 0.0;

  std::size_t shard_rows = 32;
  std::size_t threads = 1;

  void validate() const;
};

// Adam with bias correction; epsilon is added inside the square root.
struct AdamState {
  struct Slot {
    Tensor m, v;
  };
  std::vector<Slot> slots;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void init(const std::vector<network::Param>& params);
};

// One optimizer step; throws NumericError on a non-finite gradient.
void adam_step(std::vector<network::Param>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr);

// Decays the rate by `factor` after `patience` epochs without a relative
// train-loss improvement of at least `rel_improvement`, clamped at `floor`.
class LossPlateauLr {
 public:
  LossPlateauLr(double lr0, double factor, std::size_t patience, double rel_improvement,
                double floor);
  // Call once per epoch with that epoch's train loss; returns the rate to
  // use from the next epoch on.
  double observe(double epoch_train_loss);
  double lr() const { return lr_; }

 private:
  double lr_, factor_, rel_, floor_, best_;
  std::size_t patience_, bad_epochs_ = 0;
};

// Scalar loss over the unrolled outputs. AllStep averages the per-step
// logits (or, with average_probs, the per-step softmax probabilities)
// before the cross entropy; LastStep uses only the final step.
autodiff::Value compute_loss(autodiff::Graph& g, const std::vector<autodiff::Value>& logits,
                             const std::vector<int>& labels, LossMode mode,
                             bool average_probs = false,
                             autodiff::Reduction red = autodiff::Reduction::Mean);

struct MetricsRow {
  std::size_t epoch;
  double train_loss, train_acc, val_acc, lr;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  void write_csv(const std::string& path) const;
};

// Bins the selected sequences at T steps and lays them out as one [N x C]
// tensor per step. In train mode each sample is rolled with its own stream
// derived from (seed, sample index, epoch).
std::vector<Tensor> assemble_step_inputs(const data::SpikeDataset& ds,
                                         const std::vector<std::size_t>& indices,
                                         std::size_t steps, bool augment,
                                         data::RollGranularity roll, std::uint64_t seed,
                                         std::uint64_t epoch);

std::vector<int> gather_labels(const data::SpikeDataset& ds,
                               const std::vector<std::size_t>& indices);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Accuracy of the argmax of time-averaged logits (ties resolve to the
// lowest class index); eval mode, no augmentation, no dropout.
EvalResult evaluate(const network::NetworkInstance& net, const data::SpikeDataset& ds,
                    const std::vector<std::size_t>& indices, std::size_t steps,
                    std::size_t batch_size, std::size_t shard_rows = 32,
                    std::size_t threads = 1);

struct TrainResult {
  std::vector<Tensor> best_params;  // aligned with net.params()
  std::size_t best_epoch = 0;
  double best_val_acc = -1.0;
  std::size_t epochs_run = 0;
  std::size_t iterations = 0;
  bool diverged = false;
  bool stopped_pre_convergence = false;
  MetricsLog metrics;
};

// Full loop: epoch shuffle, sharded forward/backward, Adam, plateau decay,
// best-validation tracking with early stopping. On divergence the best
// snapshot so far is returned with diverged = true. The network is left
// holding its final-epoch parameters.
TrainResult train(network::NetworkInstance& net, const data::SpikeDataset& train_set,
                  const TrainConfig& cfg);

}  // namespace gpn::train
