#ifndef SAFEQ_CORE_HPP
#define SAFEQ_CORE_HPP

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "safeq/rng.hpp"

namespace safeq {

using Vec = std::vector<double>;

// Probability distribution over action indices 0..n-1.
// Construction rejects negative entries and sums off by more than 1e-9,
// then renormalizes so the stored entries sum to 1 within 1e-12.
class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(Vec probs);

  static DiscreteDistribution uniform(int n);
  static DiscreteDistribution point_mass(int n, int index);

  const Vec& probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  int size() const { return static_cast<int>(probs_.size()); }

 private:
  Vec probs_;
};

// Draws an index with probability dist[i]; advances rng.
int sample_discrete(const DiscreteDistribution& dist, RngStream& rng);

// Index of the maximum entry; ties broken by lowest index.
int greedy_action(std::span<const double> q_row);

// Sum of gamma^k * rewards[k].
double discounted_return(std::span<const double> rewards, double gamma);

// One step of experience in a finite-state environment.
// terminal marks environment failure or goal, never time truncation:
// when terminal is true, the bootstrapping indicator 1(s') is zero.
struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool terminal = false;
};

// One step of experience in the cart-pole environment. action holds the
// continuous force command, or the action index (0/1) in discrete mode.
struct CartTransition {
  std::array<double, 4> state{};
  double action = 0.0;
  double reward = 0.0;
  std::array<double, 4> next_state{};
  bool terminal = false;
};

// Explicit finite MDP with expected rewards R(s,a), used by the oracle
// suite and the exact-expectation checks.
class TabularMdp {
 public:
  TabularMdp(int num_states, int num_actions, double gamma);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double gamma() const { return gamma_; }

  void set_transition(int s, int a, DiscreteDistribution dist);
  void set_reward(int s, int a, double r) { reward_[idx(s, a)] = r; }
  void set_terminal(int s, bool t) { terminal_[s] = t; }

  const DiscreteDistribution& transition(int s, int a) const;
  double reward(int s, int a) const { return reward_[idx(s, a)]; }
  bool is_terminal(int s) const { return terminal_[s]; }

  // Throws unless every transition row has been assigned.
  void validate() const;

 private:
  std::size_t idx(int s, int a) const {
    return static_cast<std::size_t>(s) * num_actions_ + a;
  }

  int num_states_;
  int num_actions_;
  double gamma_;
  std::vector<DiscreteDistribution> transition_;
  std::vector<bool> transition_set_;
  Vec reward_;
  std::vector<bool> terminal_;
};

}  // namespace safeq

#endif  // SAFEQ_CORE_HPP
