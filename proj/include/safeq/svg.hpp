#ifndef SAFEQ_SVG_HPP
#define SAFEQ_SVG_HPP

#include <string>
#include <utility>
#include <vector>

#include "safeq/core.hpp"
#include "safeq/metrics.hpp"

namespace safeq {

// Minimal SVG renderers: axes as <line>, curves as <polyline>, deviation
// bands as <polygon>, scatter points as <circle>. Structural element counts
// are stable, which keeps the output testable without an image diff.

struct CurveSeries {
  std::string label;
  std::string color = "#1f6fb2";
  Vec x;
  Vec mean;
  Vec std;  // same length as mean, or empty for no band
};

// Mean lines with +-1 std bands.
void write_curve_svg(const std::string& path,
                     const std::vector<CurveSeries>& series,
                     const std::string& x_label, const std::string& y_label);

struct ScatterSeries {
  std::string label;
  std::string color = "#1f6fb2";
  std::vector<std::pair<double, double>> points;
};

// Scatter plot with the y = x diagonal, the calibration view.
void write_calibration_svg(const std::string& path,
                           const std::vector<ScatterSeries>& series,
                           const std::string& x_label,
                           const std::string& y_label);

struct BinnedSeries {
  std::string label;
  std::string color = "#1f6fb2";
  std::vector<ReturnBin> bins;
  // which per-bin mean to plot: 0 = max angle, 1 = risk severity, 2 = unsafe rate
  int metric = 0;
};

// Per-bin means versus bin-center return; empty bins are skipped.
void write_binned_svg(const std::string& path,
                      const std::vector<BinnedSeries>& series,
                      const std::string& x_label, const std::string& y_label);

}  // namespace safeq

#endif  // SAFEQ_SVG_HPP
