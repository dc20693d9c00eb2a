#ifndef SAFEQ_TRAINERS_HPP
#define SAFEQ_TRAINERS_HPP

#include <functional>
#include <optional>
#include <vector>

#include "safeq/behavior.hpp"
#include "safeq/envs.hpp"
#include "safeq/metrics.hpp"
#include "safeq/neural.hpp"
#include "safeq/qtargets.hpp"

namespace safeq {

// Bellman target flavor: the proposed behavior-anchored target, the plain
// max target, or the entropy-regularized log-sum-exp target.
enum class TargetKind { kSafe, kStandard, kSoft };

// Stream ids of the per-component random streams derived from a run seed.
namespace streams {
inline constexpr std::uint64_t kEnv = 1;
inline constexpr std::uint64_t kBehavior = 2;
inline constexpr std::uint64_t kAgent = 3;
inline constexpr std::uint64_t kEval = 4;  // eval k uses substream(kEval, k)
inline constexpr std::uint64_t kExtract = 5;
}  // namespace streams

// ---------------------------------------------------------------------------
// FrozenLake (tabular)
// ---------------------------------------------------------------------------

struct FrozenLakeRunConfig {
  TargetKind target = TargetKind::kSafe;
  SafeQHyperparams hyper;        // lambda, eta, alpha, gamma, episode_horizon
  int episodes = 3000;           // online episode budget
  int offline_steps = 50000;     // offline update budget
  int eval_period = 100;         // episodes (online) / steps (offline)
  int eval_episodes = 1;
  int eval_horizon = 100;
  bool collect_eps_greedy = false;  // alternative Table-1 reading
  double epsilon = 0.1;
  std::uint64_t seed = 1;
};

struct FrozenLakeRunResult {
  QTable q{frozenlake::kNumStates, frozenlake::kNumActions};
  std::vector<MetricsRecord> metrics;
  std::vector<EvalSnapshot> evals;
  long total_unsafe_visits = 0;
  // First episode (online) or step (offline) whose evaluation reached a
  // greedy success rate >= 0.99; -1 when never reached.
  int episodes_to_success = -1;
};

FrozenLakeRunResult train_frozenlake_online(const FrozenLakeRunConfig& cfg);

// Offline variant: updates sample uniformly from the dataset; the behavior
// row used by the safe target comes from the smoothed `behavior` estimate.
// Touches no environment except inside greedy evaluations.
FrozenLakeRunResult train_frozenlake_offline(const TabularSafeDataset& dataset,
                                             const TabularBehaviorPolicy& behavior,
                                             const FrozenLakeRunConfig& cfg);

// Synchronous exact-expectation sweep: every (s,a) moves toward the exact
// expected target under the model with step alpha. With alpha = 1 this is
// one application of the regularized operator through the learner's own
// target path.
void exact_expected_sweep(const TabularMdp& mdp, QTable& q,
                          const std::vector<DiscreteDistribution>& smoothed_rows,
                          double lambda, double alpha);

// The shipped FrozenLake grid as an explicit model (deterministic moves,
// reward 1 on entering the goal).
TabularMdp frozenlake_mdp(double gamma);

// ---------------------------------------------------------------------------
// Cart-pole, discrete actions (deep Q-network)
// ---------------------------------------------------------------------------

// Discrete behavior over continuous states: pi_b rows produced on the fly,
// smoothed toward uniform with mass eta for target computation.
struct DiscreteCartBehavior {
  std::function<Vec(const cartpole::State&)> row_fn;
  double eta = 0.01;

  Vec smoothed_row(const cartpole::State& s) const {
    return smooth_row(row_fn(s), eta);
  }
  int sample(const cartpole::State& s, RngStream& rng) const {
    return sample_discrete(DiscreteDistribution(row_fn(s)), rng);
  }
};

DiscreteCartBehavior hc_cartpole_behavior(const PidController& pid,
                                          double sharpness, double eta);
DiscreteCartBehavior ds_cartpole_behavior(const CategoricalPolicy& policy,
                                          double eta);

struct DqnRunConfig {
  TargetKind target = TargetKind::kSafe;
  SafeQHyperparams hyper;  // lambda, eta, gamma, C, batch, buffer, horizon
  double alpha_q = 1e-3;
  int episodes = 150;         // online episode budget
  int offline_steps = 20000;  // offline gradient-step budget
  int min_buffer = 1000;      // steps before training starts
  int eval_period = 20;       // episodes (online) / steps (offline)
  int eval_episodes = 10;
  int hidden = 64;
  std::uint64_t seed = 1;
};

using NetCheckpointHook = std::function<void(int episode, const DenseNet&)>;

struct DqnRunResult {
  DenseNet q_net{{5, 1}, {Activation::kIdentity}};  // replaced by the run
  std::vector<MetricsRecord> metrics;
  std::vector<EvalSnapshot> evals;
  long total_unsafe_visits = 0;
};

// Per-sample targets for a mini-batch under the configured flavor;
// the safe flavor consumes the smoothed behavior row at the successor.
Vec dqn_targets(const DenseNet& target_net,
                const std::vector<CartTransition>& batch, TargetKind kind,
                const DiscreteCartBehavior* behavior,
                const SafeQHyperparams& hyper);

// One optimizer step on L = 1/(2|B|) sum (y - Q(s,a))^2; returns the loss.
double dqn_regression_step(DenseNet& online, Optimizer& opt,
                           const std::vector<Vec>& inputs,
                           const std::vector<int>& actions, const Vec& targets);

DqnRunResult train_cartpole_dqn_online(const DiscreteCartBehavior& behavior,
                                       const DqnRunConfig& cfg,
                                       const NetCheckpointHook& checkpoint = {});

DqnRunResult train_cartpole_dqn_offline(const CartSafeDataset& dataset,
                                        const DiscreteCartBehavior& behavior,
                                        const DqnRunConfig& cfg,
                                        const NetCheckpointHook& checkpoint = {});

// ---------------------------------------------------------------------------
// Cart-pole, continuous actions (Monte Carlo safe targets)
// ---------------------------------------------------------------------------

// Exactly one pointer set; sampling draws execution actions (data
// collection) or smoothed-policy actions (target estimation).
struct ContinuousCartBehavior {
  const MeanNoisePolicy* mean_noise = nullptr;
  const DistributionalPolicy* distributional = nullptr;
  double sigma_smooth = 0.1;  // smoothing std for the mean-noise case

  double sample_execution(const cartpole::State& s, RngStream& rng) const;
  double sample_smoothed(const cartpole::State& s, RngStream& rng) const;
};

struct ContinuousRunConfig {
  SafeQHyperparams hyper;  // lambda, gamma, C, N, batch, buffer, horizon
  double alpha_q = 1e-3;
  int episodes = 100;
  int offline_steps = 20000;
  int min_buffer = 1000;
  int eval_period = 20;
  int eval_episodes = 10;
  int hidden = 64;
  int greedy_grid = 21;  // action grid for greedy evaluation
  std::uint64_t seed = 1;
};

struct ContinuousRunResult {
  DenseNet q_net{{5, 1}, {Activation::kIdentity}};
  std::vector<MetricsRecord> metrics;
  std::vector<EvalSnapshot> evals;
  long total_unsafe_visits = 0;
};

// Monte Carlo safe target for one transition: draws N actions from the
// smoothed behavior at s', evaluates the target network, and applies the
// stabilized log-mean-exp.
double continuous_safe_target(const DenseNet& target_net,
                              const CartTransition& t,
                              const ContinuousCartBehavior& behavior,
                              const SafeQHyperparams& hyper, RngStream& rng);

ContinuousRunResult train_cartpole_continuous_online(
    const ContinuousCartBehavior& behavior, const ContinuousRunConfig& cfg,
    const NetCheckpointHook& checkpoint = {});

ContinuousRunResult train_cartpole_continuous_offline(
    const CartSafeDataset& dataset, const ContinuousCartBehavior& behavior,
    const ContinuousRunConfig& cfg, const NetCheckpointHook& checkpoint = {});

// Greedy action of a continuous Q-network by exhaustive search over an
// evenly spaced action grid on [-1, 1].
double continuous_greedy_action(const DenseNet& q_net,
                                const cartpole::State& s, int grid_points);

}  // namespace safeq

#endif  // SAFEQ_TRAINERS_HPP
