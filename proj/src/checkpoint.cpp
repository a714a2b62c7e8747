#include "gpn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gpn/errors.hpp"

namespace gpn::checkpoint {

namespace {

constexpr char kMagic[4] = {'G', 'P', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ofstream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void put_le_f32(std::ofstream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_le<std::uint32_t>(os, bits);
}

template <typename T>
T get_le(std::ifstream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw DataError(std::string("GPNW: truncated file while reading ") + what);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

float get_le_f32(std::ifstream& is, const char* what) {
  std::uint32_t bits = get_le<std::uint32_t>(is, what);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string ablation_string(const neurons::GateAblation& a) {
  std::string s;
  if (a.forget_input) s += "FI,";
  if (a.threshold) s += "T,";
  if (a.bypass) s += "B,";
  if (!s.empty()) s.pop_back();
  return s;
}

neurons::GateAblation parse_ablation(const std::string& s) {
  neurons::GateAblation a;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "FI") a.forget_input = true;
    else if (item == "T") a.threshold = true;
    else if (item == "B") a.bypass = true;
    else if (!item.empty()) throw DataError("GPNW: unknown ablation tag '" + item + "'");
  }
  return a;
}

std::string build_header(const CheckpointBundle& b) {
  std::string h = b.architecture;
  auto kv = [&h](const std::string& k, const std::string& v) { h += ";" + k + "=" + v; };
  kv("neuron", neurons::kind_name(b.neuron_cfg.kind));
  if (b.neuron_cfg.beta) kv("beta", format_double(*b.neuron_cfg.beta));
  if (b.neuron_cfg.alpha) kv("alpha", format_double(*b.neuron_cfg.alpha));
  if (b.neuron_cfg.v_th) kv("vth", format_double(*b.neuron_cfg.v_th));
  const auto abl = ablation_string(b.neuron_cfg.ablation);
  if (!abl.empty()) kv("ablate", abl);
  kv("detach_reset", b.neuron_cfg.detach_reset ? "1" : "0");
  kv("activation",
     b.neuron_cfg.activation == autodiff::ActivationMode::Hard ? "hard" : "smooth");
  kv("channels", std::to_string(b.input_channels));
  kv("dropout", format_double(b.dropout_rate));
  kv("T", std::to_string(b.steps));
  kv("val_fraction", format_double(b.val_fraction));
  kv("seed", std::to_string(b.seed));
  kv("epoch", std::to_string(b.epoch));
  kv("val_acc", format_double(b.val_accuracy));
  return h;
}

void parse_header(const std::string& header, CheckpointBundle& b) {
  std::stringstream ss(header);
  std::string part;
  if (!std::getline(ss, part, ';')) throw DataError("GPNW: empty header");
  b.architecture = part;
  while (std::getline(ss, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw DataError("GPNW: malformed header entry '" + part + "'");
    const std::string key = part.substr(0, eq);
    const std::string val = part.substr(eq + 1);
    try {
      if (key == "neuron") {
        auto k = neurons::parse_kind(val);
        if (!k) throw DataError("GPNW: unknown neuron kind '" + val + "'");
        b.neuron_cfg.kind = *k;
      } else if (key == "beta") {
        b.neuron_cfg.beta = std::stod(val);
      } else if (key == "alpha") {
        b.neuron_cfg.alpha = std::stod(val);
      } else if (key == "vth") {
        b.neuron_cfg.v_th = std::stod(val);
      } else if (key == "ablate") {
        b.neuron_cfg.ablation = parse_ablation(val);
      } else if (key == "detach_reset") {
        b.neuron_cfg.detach_reset = (val == "1");
      } else if (key == "activation") {
        b.neuron_cfg.activation = (val == "smooth") ? autodiff::ActivationMode::Smooth
                                                    : autodiff::ActivationMode::Hard;
      } else if (key == "channels") {
        b.input_channels = std::stoul(val);
      } else if (key == "dropout") {
        b.dropout_rate = std::stod(val);
      } else if (key == "T") {
        b.steps = std::stoul(val);
      } else if (key == "val_fraction") {
        b.val_fraction = std::stod(val);
      } else if (key == "seed") {
        b.seed = std::stoull(val);
      } else if (key == "epoch") {
        b.epoch = std::stoul(val);
      } else if (key == "val_acc") {
        b.val_accuracy = std::stod(val);
      } else {
        throw DataError("GPNW: unknown header key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw DataError("GPNW: malformed value for header key '" + key + "'");
    } catch (const std::out_of_range&) {
      throw DataError("GPNW: out-of-range value for header key '" + key + "'");
    }
  }
}

}  // namespace

CheckpointBundle CheckpointBundle::from_network(const network::NetworkInstance& net,
                                                std::uint64_t seed, std::size_t epoch,
                                                double val_accuracy,
                                                const std::vector<Tensor>* param_values) {
  CheckpointBundle b;
  b.architecture = net.architecture();
  b.neuron_cfg = net.neuron_config();
  b.input_channels = net.input_channels();
  b.dropout_rate = net.dropout_rate();
  b.seed = seed;
  b.epoch = epoch;
  b.val_accuracy = val_accuracy;
  b.params = net.params();
  if (param_values) {
    if (param_values->size() != b.params.size()) {
      throw ShapeError("checkpoint: parameter snapshot size mismatch");
    }
    for (std::size_t i = 0; i < b.params.size(); ++i) b.params[i].value = (*param_values)[i];
  }
  return b;
}

network::NetworkInstance CheckpointBundle::to_network() const {
  network::NetworkInstance net(network::parse_architecture(architecture), input_channels,
                               neuron_cfg, dropout_rate, seed);
  auto& dst = net.params();
  if (dst.size() != params.size()) {
    throw DataError("GPNW: checkpoint has " + std::to_string(params.size()) +
                    " tensors, architecture expects " + std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != params[i].name || !dst[i].value.same_shape(params[i].value)) {
      throw DataError("GPNW: tensor '" + params[i].name +
                      "' does not match the architecture layout");
    }
    dst[i].value = params[i].value;
  }
  return net;
}

void save_checkpoint(const CheckpointBundle& bundle, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("GPNW: cannot write " + path);
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kVersion);
  const std::string header = build_header(bundle);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(bundle.params.size()));
  for (const auto& p : bundle.params) {
    put_le<std::uint16_t>(os, static_cast<std::uint16_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_le<std::uint8_t>(os, static_cast<std::uint8_t>(p.value.ndim()));
    for (std::size_t d : p.value.shape) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double v : p.value.data) put_le_f32(os, static_cast<float>(v));
  }
  if (!os) throw DataError("GPNW: write failure on " + path);
}

CheckpointBundle load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("GPNW: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw DataError("GPNW: truncated file while reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("GPNW: bad magic in " + path);
  const auto version = get_le<std::uint32_t>(is, "version");
  if (version != kVersion) throw DataError("GPNW: unsupported version " + std::to_string(version));

  const auto header_len = get_le<std::uint32_t>(is, "header length");
  std::string header(header_len, '\0');
  if (!is.read(header.data(), header_len)) throw DataError("GPNW: truncated header");
  CheckpointBundle b;
  parse_header(header, b);

  const auto n_tensors = get_le<std::uint32_t>(is, "tensor count");
  b.params.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name_len = get_le<std::uint16_t>(is, "tensor name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataError("GPNW: truncated tensor name");
    const auto ndim = get_le<std::uint8_t>(is, "tensor rank");
    std::vector<std::size_t> shape;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      shape.push_back(get_le<std::uint32_t>(is, "tensor dim"));
    }
    Tensor t(shape);
    for (double& v : t.data) v = static_cast<double>(get_le_f32(is, "tensor data"));
    b.params.push_back({std::move(name), std::move(t)});
  }
  return b;
}

}  // namespace gpn::checkpoint
