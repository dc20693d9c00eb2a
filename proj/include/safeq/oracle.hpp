#ifndef SAFEQ_ORACLE_HPP
#define SAFEQ_ORACLE_HPP

#include <functional>
#include <utility>
#include <vector>

#include "safeq/core.hpp"
#include "safeq/envs.hpp"
#include "safeq/qtargets.hpp"
#include "safeq/rng.hpp"

// Brute-force verification of the regularized Bellman machinery. Everything
// here recomputes results from first principles (exact expectations, simplex
// search, linear solves, plain rollouts) and stays independent of the
// learner's target-computation path, so the two can check each other.
namespace safeq::oracle {

struct OracleReport {
  double max_abs_error = 0.0;
  int iterations = 0;
  bool converged = false;
};

// One exact application of the regularized operator:
// (T Q)(s,a) = R(s,a) + gamma * sum_{s'} P(s'|s,a) 1(s') * lambda *
//              ln sum_a' prior(a'|s') exp(Q(s',a')/lambda),
// with 1(s') = 0 at terminal states.
QTable exact_bellman_apply(const TabularMdp& mdp, const QTable& q,
                           const std::vector<DiscreteDistribution>& prior,
                           double lambda);

// Iterates the exact operator until the sup-norm step change is at most
// tol * (1 - gamma) / gamma, which bounds the fixed-point residual by tol.
std::pair<QTable, OracleReport> value_iteration_fixed_point(
    const TabularMdp& mdp, const std::vector<DiscreteDistribution>& prior,
    double lambda, double tol, int max_iterations = 100000);

// True iff ||T q1 - T q2||_inf <= gamma * ||q1 - q2||_inf + 1e-12.
bool contraction_check(const TabularMdp& mdp,
                       const std::vector<DiscreteDistribution>& prior,
                       double lambda, const QTable& q1, const QTable& q2);

struct GridMaximizerResult {
  Vec maximizer;
  double value = 0.0;
};

// Maximizes sum_a pi(a) q(a) - lambda * KL(pi || prior) by enumerating a
// barycentric grid over the simplex (step 1/resolution) and then running
// golden-section line searches over pairwise mass transfers until the
// improvement stalls. Limited to small action sets (|A| <= 6).
GridMaximizerResult grid_kl_maximizer(std::span<const double> q_row,
                                      std::span<const double> prior_row,
                                      double lambda, int resolution = 200);

// Exact KL-regularized return
// J = (1-gamma) * sum_s mu0(s) V(s),  with per-state reward
// sum_a pi(a|s) R(s,a) - lambda * KL(pi(.|s) || prior(.|s)),
// V solved by Gaussian elimination with partial pivoting.
double eval_kl_return(const TabularMdp& mdp,
                      const std::vector<DiscreteDistribution>& policy,
                      const std::vector<DiscreteDistribution>& prior,
                      double lambda, const DiscreteDistribution& initial);

// Dense linear solve, partial pivoting; throws on singular systems.
Vec solve_linear_system(std::vector<Vec> a, Vec b);

// ---------------------------------------------------------------------------
// Monte Carlo policy evaluation by plain environment rollouts
// ---------------------------------------------------------------------------

struct EpisodeRecord {
  double undiscounted = 0.0;
  double discounted = 0.0;
  int steps = 0;
  bool success = false;          // FrozenLake: reached the goal
  bool unsafe = false;           // visited an unsafe state
  double max_angle_deg = 0.0;    // cart-pole
  double risk_severity_deg = 0.0;
};

struct RolloutStats {
  double mean_undiscounted = 0.0;
  double mean_discounted = 0.0;
  double success_rate = 0.0;
  double unsafe_episode_rate = 0.0;
  double mean_max_angle_deg = 0.0;
  double mean_risk_severity_deg = 0.0;
};

RolloutStats aggregate(const std::vector<EpisodeRecord>& episodes);

std::vector<EpisodeRecord> rollout_frozenlake(
    const std::function<int(int state, RngStream&)>& policy, int episodes,
    double gamma, int horizon, RngStream& rng);

// Discrete mode when `discrete` is true (policy returns the action index as
// a double); otherwise the policy returns a force command in (-1, 1).
std::vector<EpisodeRecord> rollout_cartpole(
    const std::function<double(const cartpole::State&, RngStream&)>& policy,
    bool discrete, int episodes, double gamma, RngStream& rng);

std::pair<double, double> mc_policy_return_frozenlake(
    const std::function<int(int, RngStream&)>& policy, int episodes,
    double gamma, int horizon, RngStream& rng);

std::pair<double, double> mc_policy_return_cartpole(
    const std::function<double(const cartpole::State&, RngStream&)>& policy,
    bool discrete, int episodes, double gamma, RngStream& rng);

}  // namespace safeq::oracle

#endif  // SAFEQ_ORACLE_HPP
