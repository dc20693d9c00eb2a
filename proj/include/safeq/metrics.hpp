#ifndef SAFEQ_METRICS_HPP
#define SAFEQ_METRICS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "safeq/core.hpp"

namespace safeq {

// One row of the per-seed metrics CSV. Online runs emit one row per
// training episode; offline runs emit one row per evaluation point with
// `episode` holding the gradient-step index. Angle columns are zero for
// FrozenLake, the success column is zero for cart-pole. The last two
// columns carry the most recent greedy evaluation.
struct MetricsRecord {
  std::uint64_t seed = 0;
  int episode = 0;
  double ep_return = 0.0;
  int success = 0;
  double max_abs_angle_deg = 0.0;
  double risk_severity_deg = 0.0;
  int unsafe_episode = 0;
  long unsafe_visits = 0;         // training-time unsafe visits this episode
  double q_at_start = 0.0;        // max_a Q(s0, a) at the latest evaluation
  double greedy_return = 0.0;     // discounted MC return of the greedy policy
};

// One greedy-policy evaluation checkpoint (every eval_period episodes or
// offline steps); feeds the calibration and return-binned safety pipelines.
struct EvalSnapshot {
  int episode = 0;
  double q_at_start = 0.0;
  double discounted_return = 0.0;
  double undiscounted_return = 0.0;
  double max_angle_deg = 0.0;
  double risk_severity_deg = 0.0;
  double unsafe_rate = 0.0;
  double success_rate = 0.0;
};

// Fraction of true flags.
double success_rate(std::span<const int> success_flags);

// Windowed success curve: entry k is the mean over the trailing window
// ending at episode k (shorter prefix windows use what is available).
Vec windowed_success_rate(std::span<const int> success_flags, int window = 100);

// (1/T) sum_t max(0, |theta_t| - margin), angles and margin in degrees.
double risk_severity(std::span<const double> abs_angles_deg,
                     double margin_deg = 7.0);

// Fraction of episodes whose max |theta| exceeds the unsafe threshold.
double unsafe_episode_rate(std::span<const double> episode_max_angles_deg,
                           double threshold_deg = 9.0);

// (max_a Q(s0,a), discounted MC return) pairs of a checkpoint sequence.
std::vector<std::pair<double, double>> calibration_points(
    std::span<const EvalSnapshot> snapshots);

struct BinRecord {
  double ret = 0.0;
  double max_angle_deg = 0.0;
  double risk_severity_deg = 0.0;
  double unsafe_rate = 0.0;
};

struct ReturnBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;  // 0 marks a bin without data
  double mean_max_angle_deg = 0.0;
  double mean_risk_severity_deg = 0.0;
  double mean_unsafe_rate = 0.0;
};

// Equal-width bins over [min return, max return]; the top edge is
// inclusive. Bins without data keep count == 0 and zero means.
std::vector<ReturnBin> bin_by_return(std::span<const BinRecord> records,
                                     int num_bins = 10);

// ---------------------------------------------------------------------------
// CSV input/output. Floats are printed with 9 significant digits; equal
// configs and seeds reproduce byte-identical files.
// ---------------------------------------------------------------------------

extern const char* const kMetricsCsvHeader;

void write_metrics_csv(const std::string& path,
                       std::span<const MetricsRecord> records);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

void write_eval_csv(const std::string& path,
                    std::span<const EvalSnapshot> snapshots);
std::vector<EvalSnapshot> read_eval_csv(const std::string& path);

// Per-episode mean and population standard deviation across the per-seed
// files, for each numeric metric column.
void write_aggregate_csv(const std::string& path,
                         const std::vector<std::vector<MetricsRecord>>& per_seed);

std::string format_float(double v);  // 9 significant digits

}  // namespace safeq

#endif  // SAFEQ_METRICS_HPP
