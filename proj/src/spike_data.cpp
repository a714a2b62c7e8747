#include "gpn/spike_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gpn/errors.hpp"

namespace gpn::data {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'K', 'E'};
constexpr std::uint32_t kVersion = 1;

// All multi-byte fields are little-endian. The readers/writers below go
// through byte buffers so the container is identical on any host.
template <typename T>
void put_le(std::ofstream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void put_le_f64(std::ofstream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_le<std::uint64_t>(os, bits);
}

template <typename T>
T get_le(std::ifstream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw DataError("SPKE: truncated file while reading " + what);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

double get_le_f64(std::ifstream& is, const std::string& what) {
  std::uint64_t bits = get_le<std::uint64_t>(is, what);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

std::size_t SpikeDataset::num_classes() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n = std::max(n, static_cast<std::size_t>(s.label) + 1);
  return n;
}

std::size_t BinnedSpikeTensor::total_count() const {
  std::size_t s = 0;
  for (std::uint32_t c : counts) s += c;
  return s;
}

SpikeDataset load_events(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("SPKE: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw DataError("SPKE: truncated file while reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("SPKE: bad magic in " + path);
  const auto version = get_le<std::uint32_t>(is, "version");
  if (version != kVersion) {
    throw DataError("SPKE: unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(is, "sequence count");
  SpikeDataset ds;
  ds.channels = get_le<std::uint16_t>(is, "channel count");
  if (ds.channels == 0) throw DataError("SPKE: zero channel count");
  ds.sequences.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    SpikeEventSequence seq;
    seq.label = get_le<std::uint16_t>(is, "label");
    const auto n_events = get_le<std::uint32_t>(is, "event count");
    seq.times.resize(n_events);
    seq.units.resize(n_events);
    for (std::uint32_t e = 0; e < n_events; ++e) seq.times[e] = get_le_f64(is, "event time");
    for (std::uint32_t e = 0; e < n_events; ++e) seq.units[e] = get_le<std::uint16_t>(is, "event unit");
    for (std::uint32_t e = 0; e < n_events; ++e) {
      if (!(seq.times[e] >= 0.0)) {
        throw DataError("SPKE: negative or NaN event time in sequence " + std::to_string(i));
      }
      if (e > 0 && seq.times[e] < seq.times[e - 1]) {
        throw DataError("SPKE: unsorted event times in sequence " + std::to_string(i));
      }
      if (seq.units[e] >= ds.channels) {
        throw DataError("SPKE: unit " + std::to_string(seq.units[e]) + " out of range in sequence " +
                        std::to_string(i));
      }
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

void save_events(const SpikeDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("SPKE: cannot write " + path);
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.sequences.size()));
  put_le<std::uint16_t>(os, ds.channels);
  for (const auto& seq : ds.sequences) {
    put_le<std::uint16_t>(os, seq.label);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(seq.num_events()));
    for (double t : seq.times) put_le_f64(os, t);
    for (std::uint16_t u : seq.units) put_le<std::uint16_t>(os, u);
  }
  if (!os) throw DataError("SPKE: write failure on " + path);
}

BinnedSpikeTensor bin_sequence(const SpikeEventSequence& seq, std::size_t steps,
                               std::uint16_t channels, double window_seconds) {
  if (steps < 1) throw ConfigError("bin_sequence: steps must be >= 1");
  BinnedSpikeTensor out;
  out.steps = steps;
  out.channels = channels;
  out.label = seq.label;
  out.counts.assign(steps * channels, 0);
  for (std::size_t e = 0; e < seq.num_events(); ++e) {
    const double t = seq.times[e];
    if (t >= window_seconds) {
      ++out.dropped_events;
      continue;
    }
    auto bin = static_cast<std::size_t>(t / window_seconds * static_cast<double>(steps));
    if (bin >= steps) bin = steps - 1;  // guard against rounding at the edge
    ++out.at(bin, seq.units[e]);
  }
  return out;
}

void augment_roll(BinnedSpikeTensor& x, Rng& rng, RollGranularity granularity) {
  const std::size_t c = x.channels;
  if (c == 0) return;
  std::vector<std::uint32_t> row(c);
  std::size_t sample_offset = 0;
  if (granularity == RollGranularity::PerSample) {
    sample_offset = static_cast<std::size_t>(rng.uniform_index(16));
    if (sample_offset == 0) return;
  }
  for (std::size_t t = 0; t < x.steps; ++t) {
    const std::size_t k = (granularity == RollGranularity::PerStep)
                              ? static_cast<std::size_t>(rng.uniform_index(16))
                              : sample_offset;
    if (k == 0) continue;
    std::uint32_t* base = x.counts.data() + t * c;
    for (std::size_t i = 0; i < c; ++i) row[(i + k) % c] = base[i];
    std::copy(row.begin(), row.end(), base);
  }
}

DatasetSplit split_train_val(std::size_t n, double fraction, std::uint64_t seed) {
  if (n < 2) throw ConfigError("split_train_val: need at least 2 samples");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split_train_val: fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_key(seed, 0x73706c6974ULL));  // "split"
  rng.shuffle(order);
  const auto val_size = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  DatasetSplit split;
  split.seed = seed;
  split.validation.assign(order.begin(), order.begin() + val_size);
  split.train.assign(order.begin() + val_size, order.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

BatchIterator::BatchIterator(std::vector<std::size_t> indices, std::size_t batch_size,
                             std::uint64_t seed, std::uint64_t epoch)
    : order_(std::move(indices)), batch_size_(batch_size) {
  if (batch_size_ < 1) throw ConfigError("batch_iter: batch size must be >= 1");
  if (order_.empty()) throw DataError("batch_iter: empty split");
  Rng rng(mix_key(seed, 0x6261746368ULL, epoch));  // "batch"
  rng.shuffle(order_);
}

bool BatchIterator::next(std::vector<std::size_t>& batch) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(pos_ + batch_size_, order_.size());
  batch.assign(order_.begin() + pos_, order_.begin() + end);
  pos_ = end;
  return true;
}

std::size_t BatchIterator::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

}  // namespace gpn::data
