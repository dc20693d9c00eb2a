#ifndef SAFEQ_QTARGETS_HPP
#define SAFEQ_QTARGETS_HPP

#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <vector>

#include "safeq/core.hpp"

namespace safeq {

// Stabilized log-sum-exp with non-negative weights:
//   log sum_i w_i exp(x_i)  computed as  m + log sum_i w_i exp(x_i - m),
// m = max over entries with w_i > 0. Required for lambda as small as 1e-3.
double weighted_log_sum_exp(std::span<const double> values,
                            std::span<const double> weights);

// y = r + 1(s') * gamma * max_a' Q(s', a').
double standard_q_target(double reward, std::span<const double> next_q_row,
                         bool terminal, double gamma);

// y = r + 1(s') * gamma * lambda * ln sum_a exp(Q(s',a)/lambda).
double soft_q_target(double reward, std::span<const double> next_q_row,
                     bool terminal, double gamma, double lambda);

// y = r + 1(s') * gamma * lambda * ln sum_a pi_b~(a|s') exp(Q(s',a)/lambda).
// The smoothed behavior row must be strictly positive (KL is undefined
// otherwise) and sum to 1.
double safe_target_discrete(double reward, std::span<const double> next_q_row,
                            std::span<const double> smoothed_behavior_row,
                            bool terminal, double gamma, double lambda);

// Monte Carlo form of the continuous-action safe target:
// y = r + 1(s') * gamma * lambda * ln( (1/N) sum_i exp(q_samples[i]/lambda) ),
// where q_samples[i] = Q_target(s', a_i) for a_i drawn from the smoothed
// behavior policy at s'.
double mc_safe_target(double reward, std::span<const double> q_samples,
                      bool terminal, double gamma, double lambda);

// Action-value table over a finite state-action space, zero-initialized.
// Entries of never-updated pairs stay exactly at initialization.
class QTable {
 public:
  QTable(int num_states, int num_actions)
      : num_states_(num_states),
        num_actions_(num_actions),
        values_(static_cast<std::size_t>(num_states) * num_actions, 0.0) {}

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double operator()(int s, int a) const { return values_[idx(s, a)]; }
  double& operator()(int s, int a) { return values_[idx(s, a)]; }

  std::span<const double> row(int s) const {
    return {values_.data() + idx(s, 0), static_cast<std::size_t>(num_actions_)};
  }

  Vec& values() { return values_; }
  const Vec& values() const { return values_; }

 private:
  std::size_t idx(int s, int a) const {
    return static_cast<std::size_t>(s) * num_actions_ + a;
  }

  int num_states_;
  int num_actions_;
  Vec values_;
};

struct SafeQHyperparams {
  double lambda = 1.0;        // KL weight
  double eta = 0.01;          // discrete smoothing mass
  double alpha = 0.1;         // tabular learning rate
  double gamma = 0.95;        // discount
  int target_sync_period = 200;  // C
  int mc_samples = 16;           // N
  int batch_size = 64;
  int buffer_capacity = 50000;
  int episode_horizon = 500;     // tau

  void validate() const {
    if (lambda <= 0.0) throw std::invalid_argument("lambda must be > 0");
    if (eta <= 0.0 || eta >= 1.0) throw std::invalid_argument("eta must be in (0,1)");
    if (alpha <= 0.0) throw std::invalid_argument("alpha must be > 0");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("gamma must be in [0,1)");
    if (target_sync_period < 1) throw std::invalid_argument("target_sync_period must be >= 1");
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
    if (episode_horizon < 1) throw std::invalid_argument("episode_horizon must be >= 1");
  }
};

// Bounded FIFO of transitions; eviction is strictly oldest-first.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
      throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  void push(T item) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(item));
  }

  const T& operator[](std::size_t i) const { return items_[i]; }

  const T& sample(RngStream& rng) const {
    return items_[static_cast<std::size_t>(rng.next_int(static_cast<int>(items_.size())))];
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

}  // namespace safeq

#endif  // SAFEQ_QTARGETS_HPP
