#ifndef SAFEQ_TEST_UTIL_HPP
#define SAFEQ_TEST_UTIL_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "safeq/core.hpp"
#include "safeq/rng.hpp"

namespace safeq::test {

// Central-difference gradient of a scalar function of a parameter vector.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f,
                                      Vec params, double h = 1e-6) {
  Vec grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double original = params[i];
    const double step = h * std::max(1.0, std::abs(original));
    params[i] = original + step;
    const double hi = f(params);
    params[i] = original - step;
    const double lo = f(params);
    params[i] = original;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// max_i |a_i - b_i| / max(1, |b_i|)
inline double max_rel_error(const Vec& a, const Vec& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double err = std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i]));
    if (err > worst) worst = err;
  }
  return worst;
}

// Checks backprop against central differences on a subset of coordinates
// (all of them when the parameter count is small).
inline double gradient_check(const std::function<double(const Vec&)>& f,
                             const Vec& params, const Vec& analytic,
                             int max_coords, RngStream& rng, double h = 1e-6) {
  double worst = 0.0;
  const int n = static_cast<int>(params.size());
  const int count = std::min(max_coords, n);
  for (int k = 0; k < count; ++k) {
    const int i = (count == n) ? k : rng.next_int(n);
    Vec p = params;
    const double step = h * std::max(1.0, std::abs(p[i]));
    p[i] = params[i] + step;
    const double hi = f(p);
    p[i] = params[i] - step;
    const double lo = f(p);
    const double fd = (hi - lo) / (2.0 * step);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    if (err > worst) worst = err;
  }
  return worst;
}

}  // namespace safeq::test

#endif  // SAFEQ_TEST_UTIL_HPP
