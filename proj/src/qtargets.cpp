#include "safeq/qtargets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safeq {

double weighted_log_sum_exp(std::span<const double> values,
                            std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) {
    throw std::invalid_argument("weighted_log_sum_exp: size mismatch");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] > 0.0 && values[i] > m) m = values[i];
  }
  if (!std::isfinite(m)) {
    throw std::invalid_argument("weighted_log_sum_exp: no positive weight");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] > 0.0) sum += weights[i] * std::exp(values[i] - m);
  }
  return m + std::log(sum);
}

double standard_q_target(double reward, std::span<const double> next_q_row,
                         bool terminal, double gamma) {
  if (terminal) return reward;
  return reward + gamma * next_q_row[greedy_action(next_q_row)];
}

double soft_q_target(double reward, std::span<const double> next_q_row,
                     bool terminal, double gamma, double lambda) {
  if (lambda <= 0.0) throw std::invalid_argument("soft_q_target: lambda must be > 0");
  if (terminal) return reward;
  Vec scaled(next_q_row.size());
  Vec ones(next_q_row.size(), 1.0);
  for (std::size_t i = 0; i < next_q_row.size(); ++i) scaled[i] = next_q_row[i] / lambda;
  return reward + gamma * lambda * weighted_log_sum_exp(scaled, ones);
}

double safe_target_discrete(double reward, std::span<const double> next_q_row,
                            std::span<const double> smoothed_behavior_row,
                            bool terminal, double gamma, double lambda) {
  if (lambda <= 0.0) {
    throw std::invalid_argument("safe_target_discrete: lambda must be > 0");
  }
  if (next_q_row.size() != smoothed_behavior_row.size()) {
    throw std::invalid_argument("safe_target_discrete: row size mismatch");
  }
  double wsum = 0.0;
  for (double w : smoothed_behavior_row) {
    if (w <= 0.0) {
      throw std::invalid_argument(
          "safe_target_discrete: behavior row must be strictly positive");
    }
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw std::invalid_argument("safe_target_discrete: behavior row must sum to 1");
  }
  if (terminal) return reward;
  Vec scaled(next_q_row.size());
  for (std::size_t i = 0; i < next_q_row.size(); ++i) scaled[i] = next_q_row[i] / lambda;
  return reward + gamma * lambda *
                      weighted_log_sum_exp(scaled, smoothed_behavior_row);
}

double mc_safe_target(double reward, std::span<const double> q_samples,
                      bool terminal, double gamma, double lambda) {
  if (lambda <= 0.0) throw std::invalid_argument("mc_safe_target: lambda must be > 0");
  if (q_samples.empty()) throw std::invalid_argument("mc_safe_target: need N >= 1");
  if (terminal) return reward;
  const double inv_n = 1.0 / static_cast<double>(q_samples.size());
  Vec scaled(q_samples.size());
  Vec weights(q_samples.size(), inv_n);
  for (std::size_t i = 0; i < q_samples.size(); ++i) scaled[i] = q_samples[i] / lambda;
  return reward + gamma * lambda * weighted_log_sum_exp(scaled, weights);
}

}  // namespace safeq
