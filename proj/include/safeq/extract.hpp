#ifndef SAFEQ_EXTRACT_HPP
#define SAFEQ_EXTRACT_HPP

#include <span>
#include <stdexcept>
#include <vector>

#include "safeq/behavior.hpp"
#include "safeq/neural.hpp"
#include "safeq/qtargets.hpp"

namespace safeq {

struct ExtractionHyperparams {
  double lambda = 0.5;
  double sigma_1 = 0.5;   // std of the state reference distribution
  double sigma_2 = 0.1;   // std of the extracted Gaussian policy
  int p_states = 64;      // states per extraction batch
  int q_noises = 4;       // noise samples per state
  double alpha_pi = 3e-4;
  int steps = 5000;
  int hidden = 64;

  void validate() const {
    if (lambda <= 0.0) throw std::invalid_argument("lambda must be > 0");
    if (sigma_1 <= 0.0) throw std::invalid_argument("sigma_1 must be > 0");
    if (sigma_2 <= 0.0) throw std::invalid_argument("sigma_2 must be > 0");
    if (p_states < 1) throw std::invalid_argument("p_states must be >= 1");
    if (q_noises < 1) throw std::invalid_argument("q_noises must be >= 1");
    if (alpha_pi <= 0.0) throw std::invalid_argument("alpha_pi must be > 0");
    if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  }
};

// Behavior-weighted softmax row:
// pi(a) = prior(a) exp(q(a)/lambda) / sum_a' prior(a') exp(q(a')/lambda),
// max-stabilized. prior must be strictly positive.
Vec behavior_softmax_row(std::span<const double> q_row,
                         std::span<const double> prior_row, double lambda);

// Closed-form optimal policy of the KL-regularized objective for every
// state of a Q-table.
std::vector<DiscreteDistribution> discrete_optimal_policy(
    const QTable& q, const SmoothedDiscretePolicy& smoothed, double lambda);

// Mean-noise surrogate objective
//   sum_i sum_j [ ||mu_phi(s_i)+w_j-mu_b(s_i)||^2 / (2 sigma_M^2)
//                 - Q(s_i, mu_phi(s_i)+w_j) / lambda ]
// evaluated with a frozen Q-network; gradients flow into the policy
// parameters through the action input of Q. Accumulates into policy_grad.
double surrogate_loss_mean_noise(const DenseNet& policy_net,
                                 const DenseNet& q_net,
                                 const MeanNoisePolicy& behavior,
                                 const std::vector<Vec>& states,
                                 const std::vector<Vec>& noises, double lambda,
                                 Vec& policy_grad);

// Distributional surrogate objective
//   sum_i sum_j [ -ln pi~_b(mu_phi(s_i)+w_j | s_i)
//                 - Q(s_i, mu_phi(s_i)+w_j) / lambda ].
// Actions on the tanh boundary are clamped into the open interval with
// margin 1e-6 (a warning is emitted once).
double surrogate_loss_distributional(const DenseNet& policy_net,
                                     const DenseNet& q_net,
                                     const DistributionalPolicy& behavior,
                                     const std::vector<Vec>& states,
                                     const std::vector<Vec>& noises,
                                     double lambda, Vec& policy_grad);

struct ExtractionResult {
  DenseNet policy_net;        // mu_phi with tanh output
  Vec loss_trace;             // one entry per gradient step
};

// Stage-2 policy extraction: T gradient steps on the case-appropriate
// surrogate with states from N(0, sigma_1^2 I) and noises from
// N(0, sigma_2^2 I). Exactly one of the behavior pointers must be set.
// When state_pool is given, extraction states are drawn from the pool
// instead of the Gaussian reference distribution.
ExtractionResult extract_continuous_policy(const DenseNet& q_net,
                                           const MeanNoisePolicy* mean_noise,
                                           const DistributionalPolicy* distributional,
                                           const ExtractionHyperparams& hyper,
                                           RngStream& rng,
                                           const std::vector<Vec>* state_pool = nullptr);

}  // namespace safeq

#endif  // SAFEQ_EXTRACT_HPP
