#include "gpn/datagen.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "gpn/errors.hpp"

namespace gpn::datagen {

namespace {

struct Phoneme {
  std::array<std::size_t, 2> band_center;
};

// Band centers are spread evenly over the channel axis with a small fixed
// per-phoneme jitter, so distinct phonemes stay distinct.
std::vector<Phoneme> make_phonemes(const SynthConfig& cfg) {
  Rng rng(mix_key(cfg.seed, 0x62616e6473ULL));  // "bands"
  std::vector<Phoneme> ps(cfg.phonemes);
  const double spacing = static_cast<double>(cfg.channels) / static_cast<double>(cfg.phonemes);
  for (std::size_t p = 0; p < cfg.phonemes; ++p) {
    const double base = spacing * (static_cast<double>(p) + 0.5);
    const double offset2 = static_cast<double>(cfg.channels) / 2.0;
    ps[p].band_center[0] = static_cast<std::size_t>(base + rng.uniform(-spacing, spacing) * 0.2) %
                           cfg.channels;
    ps[p].band_center[1] =
        static_cast<std::size_t>(base + offset2 + rng.uniform(-spacing, spacing) * 0.2) %
        cfg.channels;
  }
  return ps;
}

// Ordered phoneme triple of a class; odd classes reverse their even pair.
std::array<std::size_t, 3> class_triple(const SynthConfig& cfg, std::size_t cls) {
  const std::size_t m = cls / 2;
  std::array<std::size_t, 3> t = {m % cfg.phonemes, (m + 3) % cfg.phonemes,
                                  (m + 7) % cfg.phonemes};
  if (cls % 2 == 1) std::swap(t[0], t[2]);
  return t;
}

void add_poisson_events(std::vector<std::pair<double, std::uint16_t>>& events, Rng& rng,
                        std::uint16_t channel, double rate, double t0, double t1) {
  if (t1 <= t0 || rate <= 0.0) return;
  const unsigned count = rng.poisson(rate * (t1 - t0));
  for (unsigned k = 0; k < count; ++k) {
    events.emplace_back(rng.uniform(t0, t1), channel);
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (channels == 0) throw ConfigError("datagen: channels must be positive");
  if (classes < 2 || classes % 2 != 0) throw ConfigError("datagen: classes must be even and >= 2");
  if (classes > 2 * phonemes) {
    throw ConfigError("datagen: classes must not exceed twice the phoneme count");
  }
  if (band_width == 0 || band_width >= channels) throw ConfigError("datagen: bad band width");
  if (!(min_duration > 0.0 && min_duration <= max_duration && max_duration <= 1.0)) {
    throw ConfigError("datagen: durations must satisfy 0 < min <= max <= 1");
  }
  if (!(gain_jitter >= 0.0 && gain_jitter < 1.0)) {
    throw ConfigError("datagen: gain jitter must lie in [0, 1)");
  }
}

data::SpikeDataset generate(const SynthConfig& cfg, std::uint64_t split_tag) {
  cfg.validate();
  const auto phonemes = make_phonemes(cfg);

  data::SpikeDataset ds;
  ds.channels = cfg.channels;
  ds.sequences.reserve(cfg.sequences);

  for (std::size_t i = 0; i < cfg.sequences; ++i) {
    Rng rng(mix_key(mix_key(cfg.seed, 0x73616d706cULL, split_tag), i));  // "sampl"
    const auto label = static_cast<std::uint16_t>(i % cfg.classes);
    const auto triple = class_triple(cfg, label);

    const double duration = rng.uniform(cfg.min_duration, cfg.max_duration);
    const double b1 =
        duration * (1.0 / 3.0 + rng.uniform(-cfg.boundary_jitter, cfg.boundary_jitter));
    const double b2 =
        duration * (2.0 / 3.0 + rng.uniform(-cfg.boundary_jitter, cfg.boundary_jitter));
    const double bounds[4] = {0.0, b1, b2, duration};
    const int shift = static_cast<int>(rng.uniform_index(2 * cfg.channel_jitter + 1)) -
                      cfg.channel_jitter;

    std::vector<std::pair<double, std::uint16_t>> events;
    events.reserve(4096);

    // background activity over the whole sample
    for (std::uint16_t c = 0; c < cfg.channels; ++c) {
      add_poisson_events(events, rng, c, cfg.rate_bg, 0.0, duration);
    }
    // phoneme bands per segment, each with its own loudness
    for (int seg = 0; seg < 3; ++seg) {
      const auto& ph = phonemes[triple[seg]];
      const double gain = rng.uniform(1.0 - cfg.gain_jitter, 1.0 + cfg.gain_jitter);
      for (std::size_t band = 0; band < ph.band_center.size(); ++band) {
        const auto center =
            static_cast<long>(ph.band_center[band]) + shift - static_cast<long>(cfg.band_width) / 2;
        for (std::size_t k = 0; k < cfg.band_width; ++k) {
          const auto channel = static_cast<std::uint16_t>(
              ((center + static_cast<long>(k)) % cfg.channels + cfg.channels) % cfg.channels);
          add_poisson_events(events, rng, channel, cfg.rate_hi * gain, bounds[seg],
                             bounds[seg + 1]);
        }
      }
    }

    // spurious band bursts: phoneme-like activity at random channels and
    // times that carries no class information
    const unsigned n_distractors = rng.poisson(cfg.distractors_mean);
    for (unsigned d = 0; d < n_distractors; ++d) {
      const auto center = static_cast<long>(rng.uniform_index(cfg.channels));
      const double burst_len = rng.uniform(0.08, 0.2);
      const double start = rng.uniform(0.0, std::max(duration - burst_len, 0.01));
      const double gain = rng.uniform(1.0 - cfg.gain_jitter, 1.0 + cfg.gain_jitter);
      for (std::size_t k = 0; k < cfg.band_width; ++k) {
        const auto channel = static_cast<std::uint16_t>(
            ((center + static_cast<long>(k) - static_cast<long>(cfg.band_width) / 2) %
                 cfg.channels +
             cfg.channels) %
            cfg.channels);
        add_poisson_events(events, rng, channel, cfg.rate_hi * gain, start,
                           std::min(start + burst_len, duration));
      }
    }

    std::sort(events.begin(), events.end());
    data::SpikeEventSequence seq;
    seq.label = label;
    seq.times.reserve(events.size());
    seq.units.reserve(events.size());
    for (const auto& [t, c] : events) {
      seq.times.push_back(t);
      seq.units.push_back(c);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

}  // namespace gpn::datagen
