// Shared helpers for the test suites. The finite-difference oracle is kept
// independent of the reverse-mode implementation: it only ever calls the
// forward evaluation it is handed.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testutil {

// Central finite differences of a scalar function at x.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Worst relative error between two gradient vectors, ignoring entries where
// both are below abs_guard (finite-difference noise on true zeros).
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double abs_guard = 1e-9) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::fabs(a[i] - b[i]);
    if (diff <= abs_guard) continue;
    const double denom = std::max(std::fabs(a[i]), std::fabs(b[i]));
    worst = std::max(worst, diff / denom);
  }
  return worst;
}

}  // namespace testutil
