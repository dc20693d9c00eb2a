#ifndef SAFEQ_BEHAVIOR_HPP
#define SAFEQ_BEHAVIOR_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include "safeq/core.hpp"
#include "safeq/envs.hpp"
#include "safeq/neural.hpp"
#include "safeq/rng.hpp"

namespace safeq {

// ---------------------------------------------------------------------------
// Discrete behavior policies
// ---------------------------------------------------------------------------

// One probability row per state of a finite-state environment.
struct TabularBehaviorPolicy {
  std::vector<DiscreteDistribution> table;

  const DiscreteDistribution& row(int state) const { return table.at(state); }
  int sample(int state, RngStream& rng) const {
    return sample_discrete(table.at(state), rng);
  }
};

// Hand-crafted FrozenLake behavior: hole-leading actions get probability
// exactly 0; the designated on-path action gets weight 3 and the remaining
// safe actions weight 1 each, normalized. Terminal states get uniform rows
// (never consulted during rollouts).
TabularBehaviorPolicy hc_frozenlake_policy();

// Actions of `state` whose deterministic successor is not a hole.
std::array<bool, frozenlake::kNumActions> frozenlake_safe_actions(int state);

// Maximum-likelihood tabular policy from safe transitions: empirical action
// frequencies per state; states absent from the data fall back to uniform.
TabularBehaviorPolicy estimate_tabular_behavior(
    const std::vector<Transition>& data, int num_states, int num_actions);

// pi~_b(a|s) = (1 - eta) * pi_b(a|s) + eta / |A|; rows strictly positive.
class SmoothedDiscretePolicy {
 public:
  SmoothedDiscretePolicy(TabularBehaviorPolicy base, double eta);

  const DiscreteDistribution& row(int state) const { return rows_.at(state); }
  double eta() const { return eta_; }
  int sample(int state, RngStream& rng) const {
    return sample_discrete(rows_.at(state), rng);
  }

 private:
  TabularBehaviorPolicy base_;
  double eta_;
  std::vector<DiscreteDistribution> rows_;
};

// Row-level smoothing for policies whose rows are computed on the fly
// (cart-pole discrete behaviors over continuous states).
Vec smooth_row(std::span<const double> probs, double eta);

// Epsilon-greedy restricted to a safe-action mask: with probability
// 1 - epsilon the greedy action among masked entries, otherwise uniform
// over masked entries. Unsafe actions are never returned.
int safe_epsilon_greedy(std::span<const double> q_row,
                        std::span<const bool> safe_mask, double epsilon,
                        RngStream& rng);

// ---------------------------------------------------------------------------
// PID controller and the cart-pole hand-crafted behaviors
// ---------------------------------------------------------------------------

// u = k_theta*theta + k_theta_dot*theta_dot + k_x*x + k_x_dot*x_dot,
// clipped to (-1, 1) before force scaling.
struct PidController {
  double k_theta = 14.0;
  double k_theta_dot = 3.0;
  double k_x = 0.7;
  double k_x_dot = 1.6;

  double force(const cartpole::State& s) const;
};

// Discrete cart-pole hand-crafted behavior: Bernoulli over {left, right}
// with P(right|s) = (1 + clip(sharpness * u(s), -1, 1)) / 2. Saturates to a
// deterministic push near the safe-set boundary, stays stochastic elsewhere.
DiscreteDistribution hc_cartpole_discrete_row(const PidController& pid,
                                              const cartpole::State& s,
                                              double sharpness);

inline constexpr double kHcCartSharpness = 4.0;

// ---------------------------------------------------------------------------
// Continuous behavior policies (network parameterized)
// ---------------------------------------------------------------------------

// Deterministic mean network with execution noise:
// a = clip(mu(s) + w, a_min, a_max), w ~ N(0, sigma_m^2 I).
// The smoothed form used in target computation is the unclipped Gaussian
// N(mu(s), sigma_smooth^2 I); its samples are clipped into the action box
// before any Q evaluation so targets stay on supported actions.
class MeanNoisePolicy {
 public:
  MeanNoisePolicy(DenseNet net, double sigma_m, double a_min = -1.0,
                  double a_max = 1.0);

  int action_dim() const { return net_.output_dim(); }
  double sigma_m() const { return sigma_m_; }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  void mean(std::span<const double> state, std::span<double> out) const;
  void sample(std::span<const double> state, std::span<double> out,
              RngStream& rng) const;
  void sample_smoothed(std::span<const double> state, double sigma_smooth,
                       std::span<double> out, RngStream& rng) const;

  // Gaussian log density with mean mu(s) and variance sigma_m^2 I.
  double log_density(std::span<const double> state,
                     std::span<const double> action) const;

  // Mean log-likelihood of (state, action) pairs; accumulates the gradient
  // of the mean into param_grad. Used by the dataset-based trainer.
  double log_likelihood_grad(const std::vector<Vec>& states,
                             const std::vector<Vec>& actions,
                             Vec& param_grad) const;

 private:
  DenseNet net_;  // tanh output head, one unit per action dimension
  double sigma_m_;
  double a_min_;
  double a_max_;
};

// tanh-squashed Gaussian: z ~ N(mu(s), sigma(s)^2 I), a = tanh(z).
// The network outputs [mu, sigma_raw]; sigma(s) = sigma_floor +
// softplus(sigma_raw) keeps the scale above the floor everywhere.
class DistributionalPolicy {
 public:
  DistributionalPolicy(DenseNet net, double sigma_floor = 0.02);

  int action_dim() const { return net_.output_dim() / 2; }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  void head(std::span<const double> state, std::span<double> mu,
            std::span<double> sigma) const;
  void sample(std::span<const double> state, std::span<double> out,
              RngStream& rng) const;

  // a = tanh(mu(s)), the deterministic mode used for evaluation.
  void mean_action(std::span<const double> state, std::span<double> out) const;

  // tanh-Gaussian log density with the log-Jacobian correction
  // -sum_i ln(1 - a_i^2). Throws std::domain_error at |a_i| >= 1.
  double log_density(std::span<const double> state,
                     std::span<const double> action) const;

  // log density plus its gradient with respect to the action.
  double log_density_action_grad(std::span<const double> state,
                                 std::span<const double> action,
                                 std::span<double> dlogp_da) const;

  double log_likelihood_grad(const std::vector<Vec>& states,
                             const std::vector<Vec>& actions,
                             Vec& param_grad) const;

 private:
  double sigma_from_raw(double raw) const;

  DenseNet net_;  // identity output head: [mu (d), sigma_raw (d)]
  double sigma_floor_;
};

// Softmax policy over a discrete action set conditioned on a continuous
// state; the dataset-based behavior for cart-pole's discrete cases.
class CategoricalPolicy {
 public:
  explicit CategoricalPolicy(DenseNet net);

  int num_actions() const { return net_.output_dim(); }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  Vec probs(std::span<const double> state) const;
  int sample(std::span<const double> state, RngStream& rng) const;
  double log_density(std::span<const double> state, int action) const;

  double log_likelihood_grad(const std::vector<Vec>& states,
                             const std::vector<int>& actions,
                             Vec& param_grad) const;

 private:
  DenseNet net_;
};

// ---------------------------------------------------------------------------
// Safe datasets
// ---------------------------------------------------------------------------

// Immutable offline dataset; ingestion rejects any transition whose state
// or next state violates the safety predicate.
class TabularSafeDataset {
 public:
  static TabularSafeDataset from_transitions(std::vector<Transition> data);

  std::size_t size() const { return data_.size(); }
  const Transition& operator[](std::size_t i) const { return data_[i]; }
  const std::vector<Transition>& transitions() const { return data_; }

  void save(const std::string& path) const;
  static TabularSafeDataset load(const std::string& path);

 private:
  std::vector<Transition> data_;
};

class CartSafeDataset {
 public:
  static CartSafeDataset from_transitions(std::vector<CartTransition> data);

  std::size_t size() const { return data_.size(); }
  const CartTransition& operator[](std::size_t i) const { return data_[i]; }
  const std::vector<CartTransition>& transitions() const { return data_; }

  void save(const std::string& path) const;
  static CartSafeDataset load(const std::string& path);

 private:
  std::vector<CartTransition> data_;
};

// Rolls the hand-crafted FrozenLake policy until `num_transitions` safe
// transitions are collected.
TabularSafeDataset collect_frozenlake_dataset(const TabularBehaviorPolicy& policy,
                                              int num_transitions,
                                              int episode_horizon,
                                              RngStream& rng);

// Rolls the discrete cart-pole hand-crafted behavior for `episodes`.
CartSafeDataset collect_cartpole_discrete_dataset(const PidController& pid,
                                                  double sharpness,
                                                  int episodes, RngStream& rng);

// Rolls the PID controller with Gaussian dither on its output (exploration
// within the safe region) for `episodes`; records the dithered actions.
CartSafeDataset collect_cartpole_pid_dataset(const PidController& pid,
                                             double dither_std, int episodes,
                                             RngStream& rng);

// ---------------------------------------------------------------------------
// Behavior training (dataset likelihood maximization; controller imitation)
// ---------------------------------------------------------------------------

struct BehaviorTrainConfig {
  int steps = 4000;
  int batch_size = 64;
  double alpha = 1e-3;
  double sigma_m = 0.1;
  double sigma_floor = 0.02;
  int hidden = 64;
};

// Gradient ascent on the batch log-likelihood of dataset actions.
MeanNoisePolicy train_mean_noise_behavior(const std::vector<Vec>& states,
                                          const std::vector<Vec>& actions,
                                          const BehaviorTrainConfig& cfg,
                                          RngStream& rng);

DistributionalPolicy train_distributional_behavior(
    const std::vector<Vec>& states, const std::vector<Vec>& actions,
    const BehaviorTrainConfig& cfg, RngStream& rng);

CategoricalPolicy train_categorical_behavior(const std::vector<Vec>& states,
                                             const std::vector<int>& actions,
                                             const BehaviorTrainConfig& cfg,
                                             RngStream& rng);

// Normalized states and recorded actions of a cart-pole dataset, the
// training pairs for the continuous behavior heads.
void cart_dataset_training_pairs(const CartSafeDataset& data,
                                 std::vector<Vec>& states,
                                 std::vector<Vec>& actions);

}  // namespace safeq

#endif  // SAFEQ_BEHAVIOR_HPP
