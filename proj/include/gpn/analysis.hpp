// Post-hoc diagnostics: per-time-step statistics of the loss gradient with
// respect to the spiking layer's inputs (vanishing-gradient analysis), gate
// value extraction with time-constant conversion, spatial histograms and
// temporal traces of neuronal parameters, and maximum-likelihood
// normal/lognormal fits. Everything is exported as small CSV files.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpn/network.hpp"
#include "gpn/spike_data.hpp"
#include "gpn/training.hpp"

namespace gpn::analysis {

// Mean and standard deviation of dL/dx_i over all batch rows and channels,
// one entry per time step i = 1..T; L is the batch-mean last-step loss and
// x_i the input to the network's (single) spiking layer.
struct GradientRecord {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::string neuron;
  std::size_t steps = 0;
};

GradientRecord grad_vs_time(const network::NetworkInstance& net, const data::SpikeDataset& ds,
                            const std::vector<std::size_t>& indices, std::size_t steps,
                            std::size_t shard_rows = 32, std::size_t threads = 1);

// Dense [N x C x T] value cube.
struct Cube {
  std::size_t n = 0, c = 0, t = 0;
  std::vector<double> v;

  Cube() = default;
  Cube(std::size_t n_, std::size_t c_, std::size_t t_)
      : n(n_), c(c_), t(t_), v(n_ * c_ * t_, 0.0) {}
  double& at(std::size_t i, std::size_t j, std::size_t k) { return v[(i * c + j) * t + k]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return v[(i * c + j) * t + k]; }
};

// Gate activations of the first GPN layer over a batch: each cube is
// batch x neurons x steps, entries in (0,1).
struct GateTensorRecord {
  Cube forget, input, threshold;
};

GateTensorRecord extract_gate_params(const network::NetworkInstance& net,
                                     const data::SpikeDataset& ds,
                                     const std::vector<std::size_t>& indices,
                                     std::size_t steps, std::size_t shard_rows = 32,
                                     std::size_t threads = 1);

// tau = 1 / (1 - g) elementwise; gate values must lie strictly in (0, 1),
// so tau > 1 always.
Cube to_time_constants(const Cube& gates);

// Mean over batch and time: one value per neuron (the spatial profile).
std::vector<double> spatial_average(const Cube& cube);

struct Histogram {
  std::vector<double> left, right, density;
  double integral() const;
};

// Probability-density histogram with equal-width bins over [min, max]; a
// degenerate all-equal input yields a single unit-width bin of density 1.
Histogram histogram_density(const std::vector<double>& values, std::size_t bins);

// histogram_density(spatial_average(cube), bins)
Histogram spatial_histogram(const Cube& cube, std::size_t bins);

// Per-step mean over batch and neurons, plus the 10/50/90% quantiles of the
// per-neuron (batch-averaged) values at each step.
struct TemporalTrace {
  std::vector<double> mean, q10, q50, q90;
};

TemporalTrace temporal_trace(const Cube& cube);

enum class DistFamily { Normal, LogNormal };

struct DistributionFit {
  DistFamily family = DistFamily::Normal;
  double p1 = 0.0;  // mu (normal) or mu of log values (lognormal)
  double p2 = 0.0;  // sigma, maximum-likelihood (population) estimate
  double log_likelihood = 0.0;
};

// Maximum-likelihood fit. Requires at least two distinct samples; the
// lognormal family additionally requires strictly positive samples.
DistributionFit fit_distribution(const std::vector<double>& samples, DistFamily family);

void write_gradient_csv(const GradientRecord& rec, const std::string& path);
void write_histogram_csv(const Histogram& h, const std::string& path);
void write_fit_csv(const DistributionFit& fit, const std::string& path);
void write_trace_csv(const TemporalTrace& trace, const std::string& path);

// "{experiment}_{neuron}_{T}.csv" inside dir.
std::string analysis_filename(const std::string& dir, const std::string& experiment,
                              const std::string& neuron, std::size_t steps);

}  // namespace gpn::analysis
