// Spike-event audio ingestion: the SPKE binary container, temporal binning
// into fixed-step count tensors, channel-roll augmentation, and
// deterministic train/validation splitting.
//
// SPKE container layout (little-endian):
//   magic "SPKE" | u32 version=1 | u32 num_sequences | u16 channel_count
//   then per sequence:
//     u16 label | u32 n_events | n_events x f64 times | n_events x u16 units
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpn/rng.hpp"

namespace gpn::data {

// One recording: event times in seconds (non-decreasing, >= 0) with their
// channel indices, plus the class label.
struct SpikeEventSequence {
  std::vector<double> times;
  std::vector<std::uint16_t> units;
  std::uint16_t label = 0;

  std::size_t num_events() const { return times.size(); }
};

struct SpikeDataset {
  std::uint16_t channels = 0;
  std::vector<SpikeEventSequence> sequences;

  std::size_t size() const { return sequences.size(); }
  // Largest label + 1.
  std::size_t num_classes() const;
};

// Spike counts on a T x C grid. Counts stay integral; they are converted to
// floating point when batches are assembled.
struct BinnedSpikeTensor {
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<std::uint32_t> counts;  // row-major [steps][channels]
  std::uint16_t label = 0;
  std::size_t dropped_events = 0;     // events at t >= window_seconds

  std::uint32_t& at(std::size_t t, std::size_t c) { return counts[t * channels + c]; }
  std::uint32_t at(std::size_t t, std::size_t c) const { return counts[t * channels + c]; }
  std::size_t total_count() const;
};

enum class RollGranularity { PerStep, PerSample };

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::uint64_t seed = 0;
};

SpikeDataset load_events(const std::string& path);
void save_events(const SpikeDataset& ds, const std::string& path);

// Events in [0, window_seconds) land in bin floor(t * steps / window);
// later events are dropped and counted in dropped_events.
BinnedSpikeTensor bin_sequence(const SpikeEventSequence& seq, std::size_t steps,
                               std::uint16_t channels, double window_seconds = 1.0);

// Cyclic channel shift by an offset drawn uniformly from {0..15}, either a
// fresh offset per time step or a single offset for the whole sample.
void augment_roll(BinnedSpikeTensor& x, Rng& rng,
                  RollGranularity granularity = RollGranularity::PerStep);

// Uniform split without replacement; validation size = round(fraction * n).
DatasetSplit split_train_val(std::size_t n, double fraction, std::uint64_t seed);

// Epoch-shuffled batches over an index list; the last partial batch is kept.
class BatchIterator {
 public:
  BatchIterator(std::vector<std::size_t> indices, std::size_t batch_size,
                std::uint64_t seed, std::uint64_t epoch);

  // Returns false when the epoch is exhausted.
  bool next(std::vector<std::size_t>& batch);
  std::size_t num_batches() const;

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
};

}  // namespace gpn::data
