#include "safeq/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace safeq {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 20.0;
constexpr double kMarginBottom = 50.0;

struct Frame {
  double x_min, x_max, y_min, y_max;

  double px(double x) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return kMarginLeft + (x - x_min) / span * (kWidth - kMarginLeft - kMarginRight);
  }
  double py(double y) const {
    const double span = y_max > y_min ? y_max - y_min : 1.0;
    return kHeight - kMarginBottom -
           (y - y_min) / span * (kHeight - kMarginTop - kMarginBottom);
  }
};

void expand(double v, double& lo, double& hi) {
  lo = std::min(lo, v);
  hi = std::max(hi, v);
}

std::ofstream open_svg(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
      << kHeight << "\">\n";
  return out;
}

void write_axes(std::ofstream& out, const Frame& f, const std::string& x_label,
                const std::string& y_label) {
  out << "<line class=\"axis\" x1=\"" << kMarginLeft << "\" y1=\""
      << kHeight - kMarginBottom << "\" x2=\"" << kWidth - kMarginRight
      << "\" y2=\"" << kHeight - kMarginBottom
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line class=\"axis\" x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop
      << "\" x2=\"" << kMarginLeft << "\" y2=\"" << kHeight - kMarginBottom
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << (kMarginLeft + kWidth - kMarginRight) / 2 << "\" y=\""
      << kHeight - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << (kMarginTop + kHeight - kMarginBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << (kMarginTop + kHeight - kMarginBottom) / 2 << ")\">" << y_label
      << "</text>\n";
  // tick labels at the corners of the data range
  out << "<text x=\"" << kMarginLeft << "\" y=\"" << kHeight - kMarginBottom + 16
      << "\" font-size=\"11\">" << f.x_min << "</text>\n";
  out << "<text x=\"" << kWidth - kMarginRight << "\" y=\""
      << kHeight - kMarginBottom + 16 << "\" text-anchor=\"end\" font-size=\"11\">"
      << f.x_max << "</text>\n";
  out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << kHeight - kMarginBottom
      << "\" text-anchor=\"end\" font-size=\"11\">" << f.y_min << "</text>\n";
  out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << kMarginTop + 10
      << "\" text-anchor=\"end\" font-size=\"11\">" << f.y_max << "</text>\n";
}

void write_legend(std::ofstream& out, const std::vector<std::string>& labels,
                  const std::vector<std::string>& colors) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kMarginTop + 16.0 * (i + 1);
    out << "<rect x=\"" << kWidth - kMarginRight - 150 << "\" y=\"" << y - 9
        << "\" width=\"12\" height=\"9\" fill=\"" << colors[i] << "\"/>\n";
    out << "<text x=\"" << kWidth - kMarginRight - 133 << "\" y=\"" << y
        << "\" font-size=\"12\">" << labels[i] << "</text>\n";
  }
}

}  // namespace

void write_curve_svg(const std::string& path,
                     const std::vector<CurveSeries>& series,
                     const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("write_curve_svg: no series");
  Frame f{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
          std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  for (const CurveSeries& s : series) {
    if (s.x.size() != s.mean.size() || (!s.std.empty() && s.std.size() != s.mean.size())) {
      throw std::invalid_argument("write_curve_svg: series length mismatch");
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      expand(s.x[i], f.x_min, f.x_max);
      const double dev = s.std.empty() ? 0.0 : s.std[i];
      expand(s.mean[i] - dev, f.y_min, f.y_max);
      expand(s.mean[i] + dev, f.y_min, f.y_max);
    }
  }

  std::ofstream out = open_svg(path);
  write_axes(out, f, x_label, y_label);
  for (const CurveSeries& s : series) {
    if (!s.std.empty() && s.x.size() > 1) {
      out << "<polygon class=\"band\" fill=\"" << s.color
          << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << f.px(s.x[i]) << ',' << f.py(s.mean[i] + s.std[i]) << ' ';
      }
      for (std::size_t i = s.x.size(); i-- > 0;) {
        out << f.px(s.x[i]) << ',' << f.py(s.mean[i] - s.std[i]) << ' ';
      }
      out << "\"/>\n";
    }
    out << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << f.px(s.x[i]) << ',' << f.py(s.mean[i]) << ' ';
    }
    out << "\"/>\n";
  }
  std::vector<std::string> labels, colors;
  for (const CurveSeries& s : series) {
    labels.push_back(s.label);
    colors.push_back(s.color);
  }
  write_legend(out, labels, colors);
  out << "</svg>\n";
}

void write_calibration_svg(const std::string& path,
                           const std::vector<ScatterSeries>& series,
                           const std::string& x_label,
                           const std::string& y_label) {
  if (series.empty()) {
    throw std::invalid_argument("write_calibration_svg: no series");
  }
  Frame f{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
          std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  for (const ScatterSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      expand(x, f.x_min, f.x_max);
      expand(y, f.y_min, f.y_max);
    }
  }
  // a square frame keeps the diagonal meaningful
  const double lo = std::min(f.x_min, f.y_min);
  const double hi = std::max(f.x_max, f.y_max);
  f = Frame{lo, hi, lo, hi};

  std::ofstream out = open_svg(path);
  write_axes(out, f, x_label, y_label);
  out << "<line class=\"diagonal\" x1=\"" << f.px(lo) << "\" y1=\"" << f.py(lo)
      << "\" x2=\"" << f.px(hi) << "\" y2=\"" << f.py(hi)
      << "\" stroke=\"#555\" stroke-dasharray=\"5,4\" stroke-width=\"1\"/>\n";
  for (const ScatterSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      out << "<circle class=\"pt\" cx=\"" << f.px(x) << "\" cy=\"" << f.py(y)
          << "\" r=\"3\" fill=\"" << s.color << "\" fill-opacity=\"0.75\"/>\n";
    }
  }
  std::vector<std::string> labels, colors;
  for (const ScatterSeries& s : series) {
    labels.push_back(s.label);
    colors.push_back(s.color);
  }
  write_legend(out, labels, colors);
  out << "</svg>\n";
}

void write_binned_svg(const std::string& path,
                      const std::vector<BinnedSeries>& series,
                      const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("write_binned_svg: no series");
  Frame f{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
          0.0, std::numeric_limits<double>::lowest()};
  auto metric_of = [](const BinnedSeries& s, const ReturnBin& b) {
    switch (s.metric) {
      case 0: return b.mean_max_angle_deg;
      case 1: return b.mean_risk_severity_deg;
      default: return b.mean_unsafe_rate;
    }
  };
  for (const BinnedSeries& s : series) {
    for (const ReturnBin& b : s.bins) {
      if (b.count == 0) continue;
      expand(0.5 * (b.lo + b.hi), f.x_min, f.x_max);
      expand(metric_of(s, b), f.y_min, f.y_max);
    }
  }
  if (f.x_min > f.x_max) {
    throw std::invalid_argument("write_binned_svg: all bins empty");
  }

  std::ofstream out = open_svg(path);
  write_axes(out, f, x_label, y_label);
  for (const BinnedSeries& s : series) {
    out << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.6\" points=\"";
    for (const ReturnBin& b : s.bins) {
      if (b.count == 0) continue;  // bins without data stay absent
      out << f.px(0.5 * (b.lo + b.hi)) << ',' << f.py(metric_of(s, b)) << ' ';
    }
    out << "\"/>\n";
    for (const ReturnBin& b : s.bins) {
      if (b.count == 0) continue;
      out << "<circle class=\"pt\" cx=\"" << f.px(0.5 * (b.lo + b.hi))
          << "\" cy=\"" << f.py(metric_of(s, b)) << "\" r=\"3\" fill=\""
          << s.color << "\"/>\n";
    }
  }
  std::vector<std::string> labels, colors;
  for (const BinnedSeries& s : series) {
    labels.push_back(s.label);
    colors.push_back(s.color);
  }
  write_legend(out, labels, colors);
  out << "</svg>\n";
}

}  // namespace safeq
