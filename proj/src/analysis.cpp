#include "gpn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "gpn/errors.hpp"
#include "gpn/parallel.hpp"

namespace gpn::analysis {

using autodiff::Graph;
using autodiff::Reduction;
using autodiff::Value;

namespace {

std::vector<std::size_t> slice(const std::vector<std::size_t>& v, std::size_t b, std::size_t e) {
  return std::vector<std::size_t>(v.begin() + b, v.begin() + e);
}

const char* family_name(DistFamily f) {
  return f == DistFamily::Normal ? "normal" : "lognormal";
}

}  // namespace

GradientRecord grad_vs_time(const network::NetworkInstance& net, const data::SpikeDataset& ds,
                            const std::vector<std::size_t>& indices, std::size_t steps,
                            std::size_t shard_rows, std::size_t threads) {
  if (net.num_spiking_layers() != 1) {
    throw ConfigError("grad_vs_time: network must contain exactly one spiking layer, found " +
                      std::to_string(net.num_spiking_layers()));
  }
  if (indices.empty()) throw DataError("grad_vs_time: empty batch");

  const std::size_t n = indices.size();
  const std::size_t shards = shard_count(n, shard_rows);
  // per step: gradients over all rows and channels, concatenated shard by shard
  std::vector<std::vector<Tensor>> shard_grads(shards);

  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t b = s * shard_rows;
    const std::size_t e = std::min(b + shard_rows, n);
    const auto rows = slice(indices, b, e);
    const auto inputs = train::assemble_step_inputs(ds, rows, steps, false,
                                                    data::RollGranularity::PerStep, 0, 0);
    const auto labels = train::gather_labels(ds, rows);
    Graph g;
    network::ForwardOptions opt;
    opt.requires_grad = true;
    opt.record_neuron_inputs = true;
    auto fwd = net.forward(g, inputs, opt);
    auto loss = train::compute_loss(g, fwd.logits, labels, train::LossMode::LastStep, false,
                                    Reduction::Sum);
    g.backward(loss);
    shard_grads[s].reserve(steps);
    for (Value x : fwd.neuron_inputs) shard_grads[s].push_back(x.grad());
  });

  GradientRecord rec;
  rec.steps = steps;
  rec.neuron = "mixed";
  for (const auto& l : net.layers()) {
    if (l.kind == network::LayerSpec::Kind::Neuron) rec.neuron = neurons::kind_name(l.neuron);
  }
  rec.mean.resize(steps);
  rec.stddev.resize(steps);
  const double inv_n = 1.0 / static_cast<double>(n);  // batch-mean loss scale
  for (std::size_t t = 0; t < steps; ++t) {
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < shards; ++s) {
      const Tensor& g = shard_grads[s][t];
      for (double raw : g.data) {
        const double x = raw * inv_n;
        sum += x;
        sq += x * x;
        ++count;
      }
    }
    const double mean = sum / static_cast<double>(count);
    rec.mean[t] = mean;
    rec.stddev[t] = std::sqrt(std::max(0.0, sq / static_cast<double>(count) - mean * mean));
  }
  return rec;
}

GateTensorRecord extract_gate_params(const network::NetworkInstance& net,
                                     const data::SpikeDataset& ds,
                                     const std::vector<std::size_t>& indices,
                                     std::size_t steps, std::size_t shard_rows,
                                     std::size_t threads) {
  std::size_t width = 0;
  for (const auto& l : net.layers()) {
    if (l.kind == network::LayerSpec::Kind::Neuron && l.neuron == neurons::NeuronKind::GPN) {
      width = l.width;
      break;
    }
  }
  if (width == 0) throw ConfigError("extract_gate_params: network has no GPN layer");
  if (net.neuron_config().ablation.any()) {
    throw ConfigError("extract_gate_params: gate capture requires an unablated GPN layer");
  }
  if (indices.empty()) throw DataError("extract_gate_params: empty batch");

  const std::size_t n = indices.size();
  GateTensorRecord rec{Cube(n, width, steps), Cube(n, width, steps), Cube(n, width, steps)};
  const std::size_t shards = shard_count(n, shard_rows);

  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t b = s * shard_rows;
    const std::size_t e = std::min(b + shard_rows, n);
    const auto rows = slice(indices, b, e);
    const auto inputs = train::assemble_step_inputs(ds, rows, steps, false,
                                                    data::RollGranularity::PerStep, 0, 0);
    Graph g;
    network::ForwardOptions opt;
    opt.record_gates = true;
    auto fwd = net.forward(g, inputs, opt);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto& gates = fwd.gates[t];
      const Tensor& f = gates.forget.tensor();
      const Tensor& i = gates.input.tensor();
      const Tensor& th = gates.threshold.tensor();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < width; ++j) {
          rec.forget.at(b + r, j, t) = f.at(r, j);
          rec.input.at(b + r, j, t) = i.at(r, j);
          rec.threshold.at(b + r, j, t) = th.at(r, j);
        }
      }
    }
  });
  return rec;
}

Cube to_time_constants(const Cube& gates) {
  Cube tau = gates;
  for (double& x : tau.v) {
    if (!(x > 0.0 && x < 1.0)) {
      throw DataError("to_time_constants: leak factor " + std::to_string(x) +
                      " outside (0, 1)");
    }
    x = 1.0 / (1.0 - x);
  }
  return tau;
}

std::vector<double> spatial_average(const Cube& cube) {
  std::vector<double> out(cube.c, 0.0);
  for (std::size_t j = 0; j < cube.c; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cube.n; ++i) {
      for (std::size_t k = 0; k < cube.t; ++k) sum += cube.at(i, j, k);
    }
    out[j] = sum / static_cast<double>(cube.n * cube.t);
  }
  return out;
}

double Histogram::integral() const {
  double s = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) s += density[i] * (right[i] - left[i]);
  return s;
}

Histogram histogram_density(const std::vector<double>& values, std::size_t bins) {
  if (bins < 2) throw ConfigError("histogram: need at least 2 bins");
  if (values.empty()) throw DataError("histogram: no values");
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it, mx = *mx_it;
  Histogram h;
  if (mn == mx) {
    // degenerate range: all mass in one unit-width bin
    h.left = {mn - 0.5};
    h.right = {mn + 0.5};
    h.density = {1.0};
    return h;
  }
  const double width = (mx - mn) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double x : values) {
    auto b = static_cast<std::size_t>((x - mn) / width);
    if (b >= bins) b = bins - 1;  // x == mx
    ++counts[b];
  }
  const double norm = 1.0 / (static_cast<double>(values.size()) * width);
  for (std::size_t b = 0; b < bins; ++b) {
    h.left.push_back(mn + width * static_cast<double>(b));
    h.right.push_back(mn + width * static_cast<double>(b + 1));
    h.density.push_back(static_cast<double>(counts[b]) * norm);
  }
  return h;
}

Histogram spatial_histogram(const Cube& cube, std::size_t bins) {
  return histogram_density(spatial_average(cube), bins);
}

TemporalTrace temporal_trace(const Cube& cube) {
  TemporalTrace tr;
  tr.mean.resize(cube.t);
  tr.q10.resize(cube.t);
  tr.q50.resize(cube.t);
  tr.q90.resize(cube.t);
  std::vector<double> per_neuron(cube.c);
  for (std::size_t k = 0; k < cube.t; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < cube.c; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < cube.n; ++i) sum += cube.at(i, j, k);
      per_neuron[j] = sum / static_cast<double>(cube.n);
      total += per_neuron[j];
    }
    tr.mean[k] = total / static_cast<double>(cube.c);
    std::sort(per_neuron.begin(), per_neuron.end());
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(per_neuron.size() - 1);
      const auto lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, per_neuron.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      return per_neuron[lo] * (1.0 - frac) + per_neuron[hi] * frac;
    };
    tr.q10[k] = quantile(0.10);
    tr.q50[k] = quantile(0.50);
    tr.q90[k] = quantile(0.90);
  }
  return tr;
}

DistributionFit fit_distribution(const std::vector<double>& samples, DistFamily family) {
  if (samples.size() < 2) throw DataError("fit_distribution: need at least 2 samples");
  std::vector<double> xs;
  xs.reserve(samples.size());
  if (family == DistFamily::LogNormal) {
    for (double x : samples) {
      if (!(x > 0.0)) {
        throw DataError("fit_distribution: lognormal requires strictly positive samples");
      }
      xs.push_back(std::log(x));
    }
  } else {
    xs = samples;
  }
  const auto n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n;  // maximum-likelihood (population) variance
  if (var <= 0.0) throw DataError("fit_distribution: zero variance");

  DistributionFit fit;
  fit.family = family;
  fit.p1 = mean;
  fit.p2 = std::sqrt(var);
  // log-likelihood at the MLE; the lognormal adds the -sum(log x) Jacobian
  fit.log_likelihood = -0.5 * n * (std::log(2.0 * std::numbers::pi * var) + 1.0);
  if (family == DistFamily::LogNormal) {
    for (double lx : xs) fit.log_likelihood -= lx;
  }
  return fit;
}

void write_gradient_csv(const GradientRecord& rec, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("analysis: cannot write " + path);
  os << "i,mean,std\n";
  os.precision(12);
  for (std::size_t t = 0; t < rec.steps; ++t) {
    os << (t + 1) << ',' << rec.mean[t] << ',' << rec.stddev[t] << '\n';
  }
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("analysis: cannot write " + path);
  os << "bin_left,bin_right,density\n";
  os.precision(12);
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    os << h.left[i] << ',' << h.right[i] << ',' << h.density[i] << '\n';
  }
}

void write_fit_csv(const DistributionFit& fit, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("analysis: cannot write " + path);
  os << "family,p1,p2,loglik\n";
  os.precision(12);
  os << family_name(fit.family) << ',' << fit.p1 << ',' << fit.p2 << ',' << fit.log_likelihood
     << '\n';
}

void write_trace_csv(const TemporalTrace& trace, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("analysis: cannot write " + path);
  os << "t,mean,q10,q50,q90\n";
  os.precision(12);
  for (std::size_t k = 0; k < trace.mean.size(); ++k) {
    os << (k + 1) << ',' << trace.mean[k] << ',' << trace.q10[k] << ',' << trace.q50[k] << ','
       << trace.q90[k] << '\n';
  }
}

std::string analysis_filename(const std::string& dir, const std::string& experiment,
                              const std::string& neuron, std::size_t steps) {
  return dir + "/" + experiment + "_" + neuron + "_" + std::to_string(steps) + ".csv";
}

}  // namespace gpn::analysis
