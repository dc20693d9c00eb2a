#include "safeq/core.hpp"

#include <cmath>
#include <stdexcept>

namespace safeq {

DiscreteDistribution::DiscreteDistribution(Vec probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw std::invalid_argument("DiscreteDistribution: empty probability vector");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) {
      throw std::invalid_argument("DiscreteDistribution: negative or NaN entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("DiscreteDistribution: entries do not sum to 1");
  }
  for (double& p : probs_) p /= sum;
}

DiscreteDistribution DiscreteDistribution::uniform(int n) {
  return DiscreteDistribution(Vec(n, 1.0 / n));
}

DiscreteDistribution DiscreteDistribution::point_mass(int n, int index) {
  Vec p(n, 0.0);
  p.at(index) = 1.0;
  return DiscreteDistribution(std::move(p));
}

int sample_discrete(const DiscreteDistribution& dist, RngStream& rng) {
  const double u = rng.next_double();
  double cum = 0.0;
  const int n = dist.size();
  for (int i = 0; i < n; ++i) {
    cum += dist[i];
    if (u < cum) return i;
  }
  return n - 1;  // guards against rounding at u ~ 1
}

int greedy_action(std::span<const double> q_row) {
  if (q_row.empty()) {
    throw std::invalid_argument("greedy_action: empty row");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(q_row.size()); ++i) {
    if (q_row[i] > q_row[best]) best = i;
  }
  return best;
}

double discounted_return(std::span<const double> rewards, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("discounted_return: gamma must be in [0,1)");
  }
  double total = 0.0;
  double factor = 1.0;
  for (double r : rewards) {
    total += factor * r;
    factor *= gamma;
  }
  return total;
}

TabularMdp::TabularMdp(int num_states, int num_actions, double gamma)
    : num_states_(num_states),
      num_actions_(num_actions),
      gamma_(gamma),
      reward_(static_cast<std::size_t>(num_states) * num_actions, 0.0),
      terminal_(num_states, false) {
  if (num_states < 1 || num_actions < 1) {
    throw std::invalid_argument("TabularMdp: need at least one state and action");
  }
  if (gamma < 0.0 || gamma >= 1.0) {
    throw std::invalid_argument("TabularMdp: gamma must be in [0,1)");
  }
  transition_.reserve(reward_.size());
  for (std::size_t i = 0; i < reward_.size(); ++i) {
    transition_.push_back(DiscreteDistribution::point_mass(num_states, 0));
  }
  transition_set_.assign(reward_.size(), false);
}

void TabularMdp::set_transition(int s, int a, DiscreteDistribution dist) {
  if (dist.size() != num_states_) {
    throw std::invalid_argument("TabularMdp: transition row has wrong length");
  }
  transition_[idx(s, a)] = std::move(dist);
  transition_set_[idx(s, a)] = true;
}

const DiscreteDistribution& TabularMdp::transition(int s, int a) const {
  return transition_[idx(s, a)];
}

void TabularMdp::validate() const {
  for (std::size_t i = 0; i < transition_set_.size(); ++i) {
    if (!transition_set_[i]) {
      throw std::logic_error("TabularMdp: transition row never assigned");
    }
  }
}

}  // namespace safeq
