#include "safeq/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "safeq/oracle.hpp"

namespace safeq {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
constexpr double kRiskMarginDeg = 7.0;

double target_value(TargetKind kind, double reward,
                    std::span<const double> next_q_row,
                    std::span<const double> smoothed_row, bool terminal,
                    const SafeQHyperparams& hyper) {
  switch (kind) {
    case TargetKind::kSafe:
      return safe_target_discrete(reward, next_q_row, smoothed_row, terminal,
                                  hyper.gamma, hyper.lambda);
    case TargetKind::kStandard:
      return standard_q_target(reward, next_q_row, terminal, hyper.gamma);
    case TargetKind::kSoft:
      return soft_q_target(reward, next_q_row, terminal, hyper.gamma,
                           hyper.lambda);
  }
  throw std::logic_error("unknown target kind");
}

// Greedy FrozenLake evaluation; both the rollouts and the value probe are
// deterministic, so the snapshot is reproducible from (seed, eval index).
EvalSnapshot eval_frozenlake(const QTable& q, int episode_index,
                             const FrozenLakeRunConfig& cfg, RngStream rng) {
  const auto greedy = [&q](int s, RngStream&) { return greedy_action(q.row(s)); };
  const auto records = oracle::rollout_frozenlake(
      greedy, cfg.eval_episodes, cfg.hyper.gamma, cfg.eval_horizon, rng);
  const oracle::RolloutStats stats = oracle::aggregate(records);
  EvalSnapshot snap;
  snap.episode = episode_index;
  snap.q_at_start = q.row(frozenlake::kStart)[greedy_action(q.row(frozenlake::kStart))];
  snap.discounted_return = stats.mean_discounted;
  snap.undiscounted_return = stats.mean_undiscounted;
  snap.success_rate = stats.success_rate;
  snap.unsafe_rate = stats.unsafe_episode_rate;
  return snap;
}

// Greedy cart-pole evaluation for a deterministic policy. Policies draw no
// randomness during steps, so a rollout pass and a value-probe pass from
// copies of the same stream see identical initial states.
EvalSnapshot eval_cartpole(
    const std::function<double(const cartpole::State&, RngStream&)>& policy,
    bool discrete, const std::function<double(const cartpole::State&)>& value_at,
    int episode_index, double gamma, int episodes, const RngStream& rng) {
  RngStream rollout_rng = rng;
  const auto records =
      oracle::rollout_cartpole(policy, discrete, episodes, gamma, rollout_rng);
  const oracle::RolloutStats stats = oracle::aggregate(records);

  RngStream probe_rng = rng;
  CartPoleEnv env;
  double q_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    q_sum += value_at(env.reset(probe_rng));
  }

  EvalSnapshot snap;
  snap.episode = episode_index;
  snap.q_at_start = q_sum / episodes;
  snap.discounted_return = stats.mean_discounted;
  snap.undiscounted_return = stats.mean_undiscounted;
  snap.max_angle_deg = stats.mean_max_angle_deg;
  snap.risk_severity_deg = stats.mean_risk_severity_deg;
  snap.unsafe_rate = stats.unsafe_episode_rate;
  return snap;
}

MetricsRecord offline_metrics_row(std::uint64_t seed, const EvalSnapshot& snap) {
  MetricsRecord rec;
  rec.seed = seed;
  rec.episode = snap.episode;
  rec.ep_return = snap.undiscounted_return;
  rec.success = snap.success_rate >= 1.0 ? 1 : 0;
  rec.max_abs_angle_deg = snap.max_angle_deg;
  rec.risk_severity_deg = snap.risk_severity_deg;
  rec.unsafe_episode = snap.unsafe_rate > 0.0 ? 1 : 0;
  rec.unsafe_visits = 0;
  rec.q_at_start = snap.q_at_start;
  rec.greedy_return = snap.discounted_return;
  return rec;
}

}  // namespace

// ---------------------------------------------------------------------------
// FrozenLake
// ---------------------------------------------------------------------------

TabularMdp frozenlake_mdp(double gamma) {
  using namespace frozenlake;
  TabularMdp mdp(kNumStates, kNumActions, gamma);
  for (int s = 0; s < kNumStates; ++s) {
    if (is_terminal(s)) mdp.set_terminal(s, true);
    for (int a = 0; a < kNumActions; ++a) {
      if (is_terminal(s)) {
        mdp.set_transition(s, a, DiscreteDistribution::point_mass(kNumStates, s));
        mdp.set_reward(s, a, 0.0);
        continue;
      }
      const int sn = next_state(s, a);
      mdp.set_transition(s, a, DiscreteDistribution::point_mass(kNumStates, sn));
      mdp.set_reward(s, a, sn == kGoal ? 1.0 : 0.0);
    }
  }
  return mdp;
}

void exact_expected_sweep(const TabularMdp& mdp, QTable& q,
                          const std::vector<DiscreteDistribution>& smoothed_rows,
                          double lambda, double alpha) {
  QTable updated = q;
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const DiscreteDistribution& row = mdp.transition(s, a);
      double expected = 0.0;
      for (int sn = 0; sn < mdp.num_states(); ++sn) {
        if (row[sn] == 0.0) continue;
        expected += row[sn] * safe_target_discrete(
                                  mdp.reward(s, a), q.row(sn),
                                  smoothed_rows[sn].probs(),
                                  mdp.is_terminal(sn), mdp.gamma(), lambda);
      }
      updated(s, a) = q(s, a) + alpha * (expected - q(s, a));
    }
  }
  q = std::move(updated);
}

FrozenLakeRunResult train_frozenlake_online(const FrozenLakeRunConfig& cfg) {
  cfg.hyper.validate();
  const TabularBehaviorPolicy policy = hc_frozenlake_policy();
  const SmoothedDiscretePolicy smoothed(policy, cfg.hyper.eta);

  RngStream behavior_rng(cfg.seed, streams::kBehavior);
  RngStream eval_base(cfg.seed, streams::kEval);

  FrozenLakeRunResult result;
  FrozenLakeEnv env;
  int eval_count = 0;
  double last_q = 0.0;
  double last_greedy = 0.0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env.reset();
    MetricsRecord rec;
    rec.seed = cfg.seed;
    rec.episode = ep + 1;
    for (int k = 0; k < cfg.hyper.episode_horizon && !env.done(); ++k) {
      const int s = env.state();
      int a;
      if (cfg.collect_eps_greedy) {
        const auto mask = frozenlake_safe_actions(s);
        a = safe_epsilon_greedy(result.q.row(s), mask, cfg.epsilon, behavior_rng);
      } else {
        a = policy.sample(s, behavior_rng);
      }
      const Transition t = env.step(a);
      rec.ep_return += t.reward;
      if (is_unsafe_frozenlake(t.next_state)) {
        ++rec.unsafe_visits;
        rec.unsafe_episode = 1;
      }
      if (t.next_state == frozenlake::kGoal) rec.success = 1;
      const double y =
          target_value(cfg.target, t.reward, result.q.row(t.next_state),
                       smoothed.row(t.next_state).probs(), t.terminal, cfg.hyper);
      result.q(s, a) += cfg.hyper.alpha * (y - result.q(s, a));
    }
    result.total_unsafe_visits += rec.unsafe_visits;

    if ((ep + 1) % cfg.eval_period == 0) {
      const EvalSnapshot snap =
          eval_frozenlake(result.q, ep + 1, cfg, eval_base.substream(eval_count));
      ++eval_count;
      result.evals.push_back(snap);
      last_q = snap.q_at_start;
      last_greedy = snap.discounted_return;
      if (result.episodes_to_success < 0 && snap.success_rate >= 0.99) {
        result.episodes_to_success = ep + 1;
      }
    }
    rec.q_at_start = last_q;
    rec.greedy_return = last_greedy;
    result.metrics.push_back(rec);
  }
  return result;
}

FrozenLakeRunResult train_frozenlake_offline(const TabularSafeDataset& dataset,
                                             const TabularBehaviorPolicy& behavior,
                                             const FrozenLakeRunConfig& cfg) {
  cfg.hyper.validate();
  if (dataset.size() == 0) {
    throw std::invalid_argument("train_frozenlake_offline: empty dataset");
  }
  const SmoothedDiscretePolicy smoothed(behavior, cfg.hyper.eta);
  RngStream agent_rng(cfg.seed, streams::kAgent);
  RngStream eval_base(cfg.seed, streams::kEval);

  FrozenLakeRunResult result;
  int eval_count = 0;
  for (int step = 1; step <= cfg.offline_steps; ++step) {
    const Transition& t =
        dataset[static_cast<std::size_t>(agent_rng.next_int(static_cast<int>(dataset.size())))];
    const double y =
        target_value(cfg.target, t.reward, result.q.row(t.next_state),
                     smoothed.row(t.next_state).probs(), t.terminal, cfg.hyper);
    result.q(t.state, t.action) += cfg.hyper.alpha * (y - result.q(t.state, t.action));

    if (step % cfg.eval_period == 0) {
      const EvalSnapshot snap =
          eval_frozenlake(result.q, step, cfg, eval_base.substream(eval_count));
      ++eval_count;
      result.evals.push_back(snap);
      result.metrics.push_back(offline_metrics_row(cfg.seed, snap));
      if (result.episodes_to_success < 0 && snap.success_rate >= 0.99) {
        result.episodes_to_success = step;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Cart-pole DQN
// ---------------------------------------------------------------------------

DiscreteCartBehavior hc_cartpole_behavior(const PidController& pid,
                                          double sharpness, double eta) {
  DiscreteCartBehavior behavior;
  behavior.eta = eta;
  behavior.row_fn = [pid, sharpness](const cartpole::State& s) {
    return hc_cartpole_discrete_row(pid, s, sharpness).probs();
  };
  return behavior;
}

DiscreteCartBehavior ds_cartpole_behavior(const CategoricalPolicy& policy,
                                          double eta) {
  DiscreteCartBehavior behavior;
  behavior.eta = eta;
  behavior.row_fn = [&policy](const cartpole::State& s) {
    return policy.probs(cartpole::normalize_state(s));
  };
  return behavior;
}

Vec dqn_targets(const DenseNet& target_net,
                const std::vector<CartTransition>& batch, TargetKind kind,
                const DiscreteCartBehavior* behavior,
                const SafeQHyperparams& hyper) {
  if (kind == TargetKind::kSafe && behavior == nullptr) {
    throw std::invalid_argument("dqn_targets: safe targets need a behavior policy");
  }
  Vec targets(batch.size());
  DenseNet::Cache cache;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const CartTransition& t = batch[i];
    const Vec& row = target_net.forward(cartpole::normalize_state(t.next_state), cache);
    if (kind == TargetKind::kSafe) {
      targets[i] = safe_target_discrete(t.reward, row,
                                        behavior->smoothed_row(t.next_state),
                                        t.terminal, hyper.gamma, hyper.lambda);
    } else {
      targets[i] = target_value(kind, t.reward, row, {}, t.terminal, hyper);
    }
  }
  return targets;
}

double dqn_regression_step(DenseNet& online, Optimizer& opt,
                           const std::vector<Vec>& inputs,
                           const std::vector<int>& actions, const Vec& targets) {
  const std::size_t n = inputs.size();
  if (n == 0 || actions.size() != n || targets.size() != n) {
    throw std::invalid_argument("dqn_regression_step: batch size mismatch");
  }
  DenseNet::Cache cache;
  Vec grad(online.num_params(), 0.0);
  Vec out_grad(online.output_dim());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& out = online.forward(inputs[i], cache);
    const double diff = out[actions[i]] - targets[i];
    loss += 0.5 * diff * diff;
    std::fill(out_grad.begin(), out_grad.end(), 0.0);
    out_grad[actions[i]] = diff / static_cast<double>(n);
    online.backward(cache, out_grad, grad);
  }
  opt.step(online.params(), grad);
  return loss / static_cast<double>(n);
}

namespace {

// Shared mini-batch Q-update machinery of the four deep trainers.
struct DqnCore {
  DenseNet online;
  DenseNet target;
  Optimizer opt;
  long train_steps = 0;

  DqnCore(int input_dim, int output_dim, int hidden, double alpha,
          RngStream& rng)
      : online(DenseNet::mlp(input_dim, output_dim, hidden)),
        target({1, 1}, {Activation::kIdentity}),
        opt(0, alpha) {
    online.init(rng);
    target = online;
    opt = Optimizer(online.num_params(), alpha);
  }

  void sync_if_due(int period) {
    if (train_steps % period == 0) target.params() = online.params();
  }
};

EvalSnapshot eval_cartpole_dqn(const DenseNet& net, int episode_index,
                               double gamma, int episodes,
                               const RngStream& rng) {
  const auto greedy = [&net](const cartpole::State& s, RngStream&) {
    const Vec row = net.forward(cartpole::normalize_state(s));
    return static_cast<double>(greedy_action(row));
  };
  const auto value_at = [&net](const cartpole::State& s) {
    const Vec row = net.forward(cartpole::normalize_state(s));
    return row[greedy_action(row)];
  };
  return eval_cartpole(greedy, true, value_at, episode_index, gamma, episodes,
                       rng);
}

EvalSnapshot eval_cartpole_continuous(const DenseNet& net, int grid_points,
                                      int episode_index, double gamma,
                                      int episodes, const RngStream& rng) {
  const auto greedy = [&net, grid_points](const cartpole::State& s, RngStream&) {
    return continuous_greedy_action(net, s, grid_points);
  };
  const auto value_at = [&net, grid_points](const cartpole::State& s) {
    const double a = continuous_greedy_action(net, s, grid_points);
    Vec input = cartpole::normalize_state(s);
    input.push_back(a);
    return net.forward(input)[0];
  };
  return eval_cartpole(greedy, false, value_at, episode_index, gamma, episodes,
                       rng);
}

}  // namespace

DqnRunResult train_cartpole_dqn_online(const DiscreteCartBehavior& behavior,
                                       const DqnRunConfig& cfg,
                                       const NetCheckpointHook& checkpoint) {
  cfg.hyper.validate();
  RngStream env_rng(cfg.seed, streams::kEnv);
  RngStream behavior_rng(cfg.seed, streams::kBehavior);
  RngStream agent_rng(cfg.seed, streams::kAgent);
  RngStream eval_base(cfg.seed, streams::kEval);

  DqnCore core(4, 2, cfg.hidden, cfg.alpha_q, agent_rng);
  ReplayBuffer<CartTransition> buffer(
      static_cast<std::size_t>(cfg.hyper.buffer_capacity));
  DqnRunResult result{core.online, {}, {}, 0};

  std::vector<CartTransition> batch(cfg.hyper.batch_size);
  std::vector<Vec> inputs(cfg.hyper.batch_size);
  std::vector<int> actions(cfg.hyper.batch_size);

  CartPoleEnv env;
  int eval_count = 0;
  double last_q = 0.0;
  double last_greedy = 0.0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env.reset(env_rng);
    MetricsRecord rec;
    rec.seed = cfg.seed;
    rec.episode = ep + 1;
    double severity_sum = 0.0;
    int steps = 0;
    for (int k = 0; k < cfg.hyper.episode_horizon && !env.done(); ++k) {
      CartTransition t;
      t.state = env.state();
      const int a = behavior.sample(env.state(), behavior_rng);
      const CartStepResult res = env.step_discrete(a);
      t.action = static_cast<double>(a);
      t.reward = res.reward;
      t.next_state = res.next_state;
      t.terminal = res.terminal;
      buffer.push(t);

      rec.ep_return += res.reward;
      ++steps;
      const double angle_deg = std::abs(res.next_state[2]) * kRadToDeg;
      rec.max_abs_angle_deg = std::max(rec.max_abs_angle_deg, angle_deg);
      severity_sum += std::max(0.0, angle_deg - kRiskMarginDeg);
      if (is_unsafe_cartpole(res.next_state)) {
        ++rec.unsafe_visits;
        rec.unsafe_episode = 1;
      }

      if (buffer.size() >= static_cast<std::size_t>(cfg.min_buffer)) {
        for (int i = 0; i < cfg.hyper.batch_size; ++i) {
          batch[i] = buffer.sample(agent_rng);
          inputs[i] = cartpole::normalize_state(batch[i].state);
          actions[i] = static_cast<int>(batch[i].action);
        }
        const Vec targets =
            dqn_targets(core.target, batch, cfg.target, &behavior, cfg.hyper);
        dqn_regression_step(core.online, core.opt, inputs, actions, targets);
        ++core.train_steps;
        core.sync_if_due(cfg.hyper.target_sync_period);
      }
    }
    rec.risk_severity_deg = steps > 0 ? severity_sum / steps : 0.0;
    result.total_unsafe_visits += rec.unsafe_visits;

    if ((ep + 1) % cfg.eval_period == 0) {
      const EvalSnapshot snap =
          eval_cartpole_dqn(core.online, ep + 1, cfg.hyper.gamma,
                            cfg.eval_episodes, eval_base.substream(eval_count));
      ++eval_count;
      result.evals.push_back(snap);
      last_q = snap.q_at_start;
      last_greedy = snap.discounted_return;
      if (checkpoint) checkpoint(ep + 1, core.online);
    }
    rec.q_at_start = last_q;
    rec.greedy_return = last_greedy;
    result.metrics.push_back(rec);
  }
  result.q_net = core.online;
  return result;
}

DqnRunResult train_cartpole_dqn_offline(const CartSafeDataset& dataset,
                                        const DiscreteCartBehavior& behavior,
                                        const DqnRunConfig& cfg,
                                        const NetCheckpointHook& checkpoint) {
  cfg.hyper.validate();
  if (dataset.size() == 0) {
    throw std::invalid_argument("train_cartpole_dqn_offline: empty dataset");
  }
  RngStream agent_rng(cfg.seed, streams::kAgent);
  RngStream eval_base(cfg.seed, streams::kEval);

  DqnCore core(4, 2, cfg.hidden, cfg.alpha_q, agent_rng);
  DqnRunResult result{core.online, {}, {}, 0};

  std::vector<CartTransition> batch(cfg.hyper.batch_size);
  std::vector<Vec> inputs(cfg.hyper.batch_size);
  std::vector<int> actions(cfg.hyper.batch_size);

  int eval_count = 0;
  for (int step = 1; step <= cfg.offline_steps; ++step) {
    for (int i = 0; i < cfg.hyper.batch_size; ++i) {
      batch[i] = dataset[static_cast<std::size_t>(
          agent_rng.next_int(static_cast<int>(dataset.size())))];
      inputs[i] = cartpole::normalize_state(batch[i].state);
      actions[i] = static_cast<int>(batch[i].action);
    }
    const Vec targets =
        dqn_targets(core.target, batch, cfg.target, &behavior, cfg.hyper);
    dqn_regression_step(core.online, core.opt, inputs, actions, targets);
    ++core.train_steps;
    core.sync_if_due(cfg.hyper.target_sync_period);

    if (step % cfg.eval_period == 0) {
      const EvalSnapshot snap =
          eval_cartpole_dqn(core.online, step, cfg.hyper.gamma,
                            cfg.eval_episodes, eval_base.substream(eval_count));
      ++eval_count;
      result.evals.push_back(snap);
      result.metrics.push_back(offline_metrics_row(cfg.seed, snap));
      if (checkpoint) checkpoint(step, core.online);
    }
  }
  result.q_net = core.online;
  return result;
}

// ---------------------------------------------------------------------------
// Cart-pole continuous
// ---------------------------------------------------------------------------

double ContinuousCartBehavior::sample_execution(const cartpole::State& s,
                                                RngStream& rng) const {
  const Vec norm = cartpole::normalize_state(s);
  double a = 0.0;
  if (mean_noise) {
    mean_noise->sample(norm, {&a, 1}, rng);
  } else if (distributional) {
    distributional->sample(norm, {&a, 1}, rng);
  } else {
    throw std::logic_error("ContinuousCartBehavior: no policy set");
  }
  return a;
}

double ContinuousCartBehavior::sample_smoothed(const cartpole::State& s,
                                               RngStream& rng) const {
  const Vec norm = cartpole::normalize_state(s);
  double a = 0.0;
  if (mean_noise) {
    mean_noise->sample_smoothed(norm, sigma_smooth, {&a, 1}, rng);
  } else if (distributional) {
    distributional->sample(norm, {&a, 1}, rng);
  } else {
    throw std::logic_error("ContinuousCartBehavior: no policy set");
  }
  return a;
}

double continuous_safe_target(const DenseNet& target_net,
                              const CartTransition& t,
                              const ContinuousCartBehavior& behavior,
                              const SafeQHyperparams& hyper, RngStream& rng) {
  if (t.terminal) return t.reward;
  Vec q_samples(hyper.mc_samples);
  Vec input = cartpole::normalize_state(t.next_state);
  input.push_back(0.0);
  DenseNet::Cache cache;
  for (int i = 0; i < hyper.mc_samples; ++i) {
    input.back() = behavior.sample_smoothed(t.next_state, rng);
    q_samples[i] = target_net.forward(input, cache)[0];
  }
  return mc_safe_target(t.reward, q_samples, false, hyper.gamma, hyper.lambda);
}

double continuous_greedy_action(const DenseNet& q_net,
                                const cartpole::State& s, int grid_points) {
  if (grid_points < 2) {
    throw std::invalid_argument("continuous_greedy_action: need >= 2 grid points");
  }
  Vec input = cartpole::normalize_state(s);
  input.push_back(0.0);
  DenseNet::Cache cache;
  double best_a = -1.0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double a = -1.0 + 2.0 * i / (grid_points - 1);
    input.back() = a;
    const double q = q_net.forward(input, cache)[0];
    if (q > best_q) {
      best_q = q;
      best_a = a;
    }
  }
  return best_a;
}

namespace {

double continuous_train_step(DqnCore& core, const std::vector<CartTransition>& batch,
                             const ContinuousCartBehavior& behavior,
                             const SafeQHyperparams& hyper, RngStream& rng,
                             std::vector<Vec>& inputs, Vec& targets) {
  const std::size_t n = batch.size();
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] = continuous_safe_target(core.target, batch[i], behavior, hyper, rng);
    inputs[i] = cartpole::normalize_state(batch[i].state);
    inputs[i].push_back(batch[i].action);
  }
  // scalar-output regression: output index is always 0
  const std::vector<int> zeros(n, 0);
  return dqn_regression_step(core.online, core.opt, inputs, zeros, targets);
}

}  // namespace

ContinuousRunResult train_cartpole_continuous_online(
    const ContinuousCartBehavior& behavior, const ContinuousRunConfig& cfg,
    const NetCheckpointHook& checkpoint) {
  cfg.hyper.validate();
  RngStream env_rng(cfg.seed, streams::kEnv);
  RngStream behavior_rng(cfg.seed, streams::kBehavior);
  RngStream agent_rng(cfg.seed, streams::kAgent);
  RngStream eval_base(cfg.seed, streams::kEval);

  DqnCore core(5, 1, cfg.hidden, cfg.alpha_q, agent_rng);
  ReplayBuffer<CartTransition> buffer(static_cast<std::size_t>(cfg.hyper.buffer_capacity));
  ContinuousRunResult result{core.online, {}, {}, 0};

  std::vector<CartTransition> batch(cfg.hyper.batch_size);
  std::vector<Vec> inputs(cfg.hyper.batch_size);
  Vec targets(cfg.hyper.batch_size);

  CartPoleEnv env;
  int eval_count = 0;
  double last_q = 0.0;
  double last_greedy = 0.0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env.reset(env_rng);
    MetricsRecord rec;
    rec.seed = cfg.seed;
    rec.episode = ep + 1;
    double severity_sum = 0.0;
    int steps = 0;
    for (int k = 0; k < cfg.hyper.episode_horizon && !env.done(); ++k) {
      CartTransition t;
      t.state = env.state();
      const double a = behavior.sample_execution(env.state(), behavior_rng);
      const CartStepResult res = env.step_force(a);
      t.action = a;
      t.reward = res.reward;
      t.next_state = res.next_state;
      t.terminal = res.terminal;
      buffer.push(t);

      rec.ep_return += res.reward;
      ++steps;
      const double angle_deg = std::abs(res.next_state[2]) * kRadToDeg;
      rec.max_abs_angle_deg = std::max(rec.max_abs_angle_deg, angle_deg);
      severity_sum += std::max(0.0, angle_deg - kRiskMarginDeg);
      if (is_unsafe_cartpole(res.next_state)) {
        ++rec.unsafe_visits;
        rec.unsafe_episode = 1;
      }

      if (buffer.size() >= static_cast<std::size_t>(cfg.min_buffer)) {
        for (int i = 0; i < cfg.hyper.batch_size; ++i) {
          batch[i] = buffer.sample(agent_rng);
        }
        continuous_train_step(core, batch, behavior, cfg.hyper, agent_rng,
                              inputs, targets);
        ++core.train_steps;
        core.sync_if_due(cfg.hyper.target_sync_period);
      }
    }
    rec.risk_severity_deg = steps > 0 ? severity_sum / steps : 0.0;
    result.total_unsafe_visits += rec.unsafe_visits;

    if ((ep + 1) % cfg.eval_period == 0) {
      const EvalSnapshot snap = eval_cartpole_continuous(
          core.online, cfg.greedy_grid, ep + 1, cfg.hyper.gamma,
          cfg.eval_episodes, eval_base.substream(eval_count));
      ++eval_count;
      result.evals.push_back(snap);
      last_q = snap.q_at_start;
      last_greedy = snap.discounted_return;
      if (checkpoint) checkpoint(ep + 1, core.online);
    }
    rec.q_at_start = last_q;
    rec.greedy_return = last_greedy;
    result.metrics.push_back(rec);
  }
  result.q_net = core.online;
  return result;
}

ContinuousRunResult train_cartpole_continuous_offline(
    const CartSafeDataset& dataset, const ContinuousCartBehavior& behavior,
    const ContinuousRunConfig& cfg, const NetCheckpointHook& checkpoint) {
  cfg.hyper.validate();
  if (dataset.size() == 0) {
    throw std::invalid_argument("train_cartpole_continuous_offline: empty dataset");
  }
  RngStream agent_rng(cfg.seed, streams::kAgent);
  RngStream eval_base(cfg.seed, streams::kEval);

  DqnCore core(5, 1, cfg.hidden, cfg.alpha_q, agent_rng);
  ContinuousRunResult result{core.online, {}, {}, 0};

  std::vector<CartTransition> batch(cfg.hyper.batch_size);
  std::vector<Vec> inputs(cfg.hyper.batch_size);
  Vec targets(cfg.hyper.batch_size);

  int eval_count = 0;
  for (int step = 1; step <= cfg.offline_steps; ++step) {
    for (int i = 0; i < cfg.hyper.batch_size; ++i) {
      batch[i] = dataset[static_cast<std::size_t>(
          agent_rng.next_int(static_cast<int>(dataset.size())))];
    }
    continuous_train_step(core, batch, behavior, cfg.hyper, agent_rng, inputs,
                          targets);
    ++core.train_steps;
    core.sync_if_due(cfg.hyper.target_sync_period);

    if (step % cfg.eval_period == 0) {
      const EvalSnapshot snap = eval_cartpole_continuous(
          core.online, cfg.greedy_grid, step, cfg.hyper.gamma,
          cfg.eval_episodes, eval_base.substream(eval_count));
      ++eval_count;
      result.evals.push_back(snap);
      result.metrics.push_back(offline_metrics_row(cfg.seed, snap));
      if (checkpoint) checkpoint(step, core.online);
    }
  }
  result.q_net = core.online;
  return result;
}

}  // namespace safeq
