#include "safeq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace safeq {

double success_rate(std::span<const int> success_flags) {
  if (success_flags.empty()) {
    throw std::invalid_argument("success_rate: empty window");
  }
  double sum = 0.0;
  for (int f : success_flags) sum += f ? 1.0 : 0.0;
  return sum / static_cast<double>(success_flags.size());
}

Vec windowed_success_rate(std::span<const int> success_flags, int window) {
  Vec curve(success_flags.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < success_flags.size(); ++k) {
    sum += success_flags[k] ? 1.0 : 0.0;
    if (k >= static_cast<std::size_t>(window)) {
      sum -= success_flags[k - window] ? 1.0 : 0.0;
    }
    const double n = std::min<std::size_t>(k + 1, window);
    curve[k] = sum / n;
  }
  return curve;
}

double risk_severity(std::span<const double> abs_angles_deg, double margin_deg) {
  if (abs_angles_deg.empty()) {
    throw std::invalid_argument("risk_severity: empty trajectory");
  }
  double sum = 0.0;
  for (double a : abs_angles_deg) sum += std::max(0.0, a - margin_deg);
  return sum / static_cast<double>(abs_angles_deg.size());
}

double unsafe_episode_rate(std::span<const double> episode_max_angles_deg,
                           double threshold_deg) {
  if (episode_max_angles_deg.empty()) {
    throw std::invalid_argument("unsafe_episode_rate: empty input");
  }
  double count = 0.0;
  for (double a : episode_max_angles_deg) {
    if (a > threshold_deg) count += 1.0;
  }
  return count / static_cast<double>(episode_max_angles_deg.size());
}

std::vector<std::pair<double, double>> calibration_points(
    std::span<const EvalSnapshot> snapshots) {
  std::vector<std::pair<double, double>> points;
  points.reserve(snapshots.size());
  for (const EvalSnapshot& s : snapshots) {
    points.emplace_back(s.q_at_start, s.discounted_return);
  }
  return points;
}

std::vector<ReturnBin> bin_by_return(std::span<const BinRecord> records,
                                     int num_bins) {
  if (records.empty()) {
    throw std::invalid_argument("bin_by_return: need at least one record");
  }
  if (num_bins < 1) {
    throw std::invalid_argument("bin_by_return: need at least one bin");
  }
  double lo = records[0].ret;
  double hi = records[0].ret;
  for (const BinRecord& r : records) {
    lo = std::min(lo, r.ret);
    hi = std::max(hi, r.ret);
  }
  const double width = (hi - lo) / num_bins;
  std::vector<ReturnBin> bins(num_bins);
  for (int b = 0; b < num_bins; ++b) {
    bins[b].lo = lo + b * width;
    bins[b].hi = (b + 1 == num_bins) ? hi : lo + (b + 1) * width;
  }
  for (const BinRecord& r : records) {
    int b = width > 0.0 ? static_cast<int>((r.ret - lo) / width) : 0;
    b = std::clamp(b, 0, num_bins - 1);
    bins[b].count += 1;
    bins[b].mean_max_angle_deg += r.max_angle_deg;
    bins[b].mean_risk_severity_deg += r.risk_severity_deg;
    bins[b].mean_unsafe_rate += r.unsafe_rate;
  }
  for (ReturnBin& bin : bins) {
    if (bin.count == 0) continue;
    bin.mean_max_angle_deg /= bin.count;
    bin.mean_risk_severity_deg /= bin.count;
    bin.mean_unsafe_rate /= bin.count;
  }
  return bins;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

const char* const kMetricsCsvHeader =
    "seed,episode,ep_return,success,max_abs_angle_deg,risk_severity_deg,"
    "unsafe_episode,unsafe_visits,q_at_start,greedy_return";

std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_metrics_csv(const std::string& path,
                       std::span<const MetricsRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << kMetricsCsvHeader << '\n';
  for (const MetricsRecord& r : records) {
    out << r.seed << ',' << r.episode << ',' << format_float(r.ep_return) << ','
        << r.success << ',' << format_float(r.max_abs_angle_deg) << ','
        << format_float(r.risk_severity_deg) << ',' << r.unsafe_episode << ','
        << r.unsafe_visits << ',' << format_float(r.q_at_start) << ','
        << format_float(r.greedy_return) << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw std::runtime_error("bad metrics CSV header in " + path);
  }
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    MetricsRecord r;
    char comma;
    ss >> r.seed >> comma >> r.episode >> comma >> r.ep_return >> comma >>
        r.success >> comma >> r.max_abs_angle_deg >> comma >>
        r.risk_severity_deg >> comma >> r.unsafe_episode >> comma >>
        r.unsafe_visits >> comma >> r.q_at_start >> comma >> r.greedy_return;
    if (!ss) throw std::runtime_error("malformed metrics row: " + line);
    records.push_back(r);
  }
  return records;
}

namespace {
const char* const kEvalCsvHeader =
    "episode,q_at_start,discounted_return,undiscounted_return,max_angle_deg,"
    "risk_severity_deg,unsafe_rate,success_rate";
}

void write_eval_csv(const std::string& path,
                    std::span<const EvalSnapshot> snapshots) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << kEvalCsvHeader << '\n';
  for (const EvalSnapshot& s : snapshots) {
    out << s.episode << ',' << format_float(s.q_at_start) << ','
        << format_float(s.discounted_return) << ','
        << format_float(s.undiscounted_return) << ','
        << format_float(s.max_angle_deg) << ','
        << format_float(s.risk_severity_deg) << ','
        << format_float(s.unsafe_rate) << ',' << format_float(s.success_rate)
        << '\n';
  }
}

std::vector<EvalSnapshot> read_eval_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kEvalCsvHeader) {
    throw std::runtime_error("bad eval CSV header in " + path);
  }
  std::vector<EvalSnapshot> snapshots;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    EvalSnapshot s;
    char comma;
    ss >> s.episode >> comma >> s.q_at_start >> comma >> s.discounted_return >>
        comma >> s.undiscounted_return >> comma >> s.max_angle_deg >> comma >>
        s.risk_severity_deg >> comma >> s.unsafe_rate >> comma >>
        s.success_rate;
    if (!ss) throw std::runtime_error("malformed eval row: " + line);
    snapshots.push_back(s);
  }
  return snapshots;
}

void write_aggregate_csv(
    const std::string& path,
    const std::vector<std::vector<MetricsRecord>>& per_seed) {
  if (per_seed.empty()) {
    throw std::invalid_argument("write_aggregate_csv: no per-seed data");
  }
  std::size_t rows = per_seed.front().size();
  for (const auto& seed_rows : per_seed) rows = std::min(rows, seed_rows.size());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "episode,mean_ep_return,std_ep_return,mean_success,std_success,"
         "mean_max_abs_angle_deg,std_max_abs_angle_deg,mean_risk_severity_deg,"
         "std_risk_severity_deg,mean_unsafe_episode,std_unsafe_episode,"
         "mean_unsafe_visits,std_unsafe_visits,mean_q_at_start,std_q_at_start,"
         "mean_greedy_return,std_greedy_return\n";

  const double n = static_cast<double>(per_seed.size());
  auto mean_std = [&](auto&& get, std::size_t row) {
    double mean = 0.0;
    for (const auto& seed_rows : per_seed) mean += get(seed_rows[row]);
    mean /= n;
    double var = 0.0;
    for (const auto& seed_rows : per_seed) {
      const double d = get(seed_rows[row]) - mean;
      var += d * d;
    }
    return std::pair<double, double>(mean, std::sqrt(var / n));
  };

  for (std::size_t row = 0; row < rows; ++row) {
    out << per_seed.front()[row].episode;
    const auto emit = [&](auto&& get) {
      const auto [m, s] = mean_std(get, row);
      out << ',' << format_float(m) << ',' << format_float(s);
    };
    emit([](const MetricsRecord& r) { return r.ep_return; });
    emit([](const MetricsRecord& r) { return static_cast<double>(r.success); });
    emit([](const MetricsRecord& r) { return r.max_abs_angle_deg; });
    emit([](const MetricsRecord& r) { return r.risk_severity_deg; });
    emit([](const MetricsRecord& r) { return static_cast<double>(r.unsafe_episode); });
    emit([](const MetricsRecord& r) { return static_cast<double>(r.unsafe_visits); });
    emit([](const MetricsRecord& r) { return r.q_at_start; });
    emit([](const MetricsRecord& r) { return r.greedy_return; });
    out << '\n';
  }
}

}  // namespace safeq
