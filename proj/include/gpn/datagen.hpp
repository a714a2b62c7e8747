// Synthetic spike-audio benchmark generator.
//
// Each class is an ordered triple of "phonemes"; a phoneme is a pair of
// channel bands firing at an elevated Poisson rate over one third of the
// sample. Classes come in pairs that share the same multiset of phonemes in
// reversed order, so telling paired classes apart requires remembering the
// order in which the phonemes occurred - a per-step snapshot of the channel
// activity cannot separate them. Durations, segment boundaries, and band
// positions jitter per sample; background spikes cover all channels.
//
// The default geometry mirrors a 700-channel, 20-class spike-audio corpus
// with 8156 training and 2264 test sequences. Spurious band bursts at
// random positions and times act as structured distractors.
#pragma once

#include <cstdint>

#include "gpn/spike_data.hpp"

namespace gpn::datagen {

struct SynthConfig {
  std::uint16_t channels = 700;
  std::size_t classes = 20;        // even, at most 2 * phonemes
  std::size_t sequences = 8156;
  std::size_t phonemes = 10;
  std::size_t band_width = 24;     // channels per band
  double rate_hi = 80.0;           // in-band rate, spikes/s per channel
  double rate_bg = 3.0;            // background rate, spikes/s per channel
  double min_duration = 0.45;
  double max_duration = 1.0;
  double boundary_jitter = 0.1;    // segment boundary jitter, fraction of duration
  int channel_jitter = 12;         // per-sample cyclic band shift
  double gain_jitter = 0.4;        // per-segment in-band rate multiplier spread
  double distractors_mean = 1.5;   // Poisson mean of spurious band bursts per sample
  std::uint64_t seed = 1;

  void validate() const;
};

// split_tag keeps train/test streams disjoint for the same seed.
data::SpikeDataset generate(const SynthConfig& cfg, std::uint64_t split_tag);

}  // namespace gpn::datagen
