#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "safeq/oracle.hpp"
#include "safeq/trainers.hpp"
#include "test_util.hpp"

using namespace safeq;

TEST_CASE("frozenlake mdp model matches the environment") {
  const TabularMdp mdp = frozenlake_mdp(0.95);
  CHECK(mdp.num_states() == 16);
  CHECK(mdp.num_actions() == 4);
  CHECK(mdp.is_terminal(5));
  CHECK(mdp.is_terminal(15));
  CHECK_FALSE(mdp.is_terminal(0));
  CHECK(mdp.reward(14, frozenlake::kRight) == 1.0);
  CHECK(mdp.reward(0, frozenlake::kDown) == 0.0);
  CHECK(mdp.transition(0, frozenlake::kDown)[4] == 1.0);
  CHECK_NOTHROW(mdp.validate());
}

TEST_CASE("exact-expectation sweep with alpha=1 is one oracle operator application") {
  const TabularMdp mdp = frozenlake_mdp(0.95);
  const SmoothedDiscretePolicy smoothed(hc_frozenlake_policy(), 0.01);
  std::vector<DiscreteDistribution> rows;
  for (int s = 0; s < 16; ++s) rows.push_back(smoothed.row(s));

  RngStream rng(101, 1);
  QTable q(16, 4);
  for (double& v : q.values()) v = rng.next_uniform(-1.0, 1.0);

  QTable learner = q;
  exact_expected_sweep(mdp, learner, rows, 1.0, 1.0);
  const QTable oracle_result = oracle::exact_bellman_apply(mdp, q, rows, 1.0);
  for (std::size_t i = 0; i < learner.values().size(); ++i) {
    CHECK(std::abs(learner.values()[i] - oracle_result.values()[i]) <= 1e-12);
  }
}

TEST_CASE("alpha = 0 leaves the table unchanged") {
  const TabularMdp mdp = frozenlake_mdp(0.95);
  const SmoothedDiscretePolicy smoothed(hc_frozenlake_policy(), 0.01);
  std::vector<DiscreteDistribution> rows;
  for (int s = 0; s < 16; ++s) rows.push_back(smoothed.row(s));

  RngStream rng(100, 1);
  QTable q(16, 4);
  for (double& v : q.values()) v = rng.next_uniform(-1.0, 1.0);
  QTable updated = q;
  exact_expected_sweep(mdp, updated, rows, 1.0, 0.0);
  CHECK(updated.values() == q.values());
}

TEST_CASE("frozenlake online case 1: safe, converges, holes stay zero") {
  FrozenLakeRunConfig cfg;
  cfg.episodes = 1000;
  cfg.eval_period = 50;
  cfg.hyper.lambda = 1.0;
  cfg.hyper.alpha = 0.2;
  cfg.hyper.gamma = 0.95;
  cfg.hyper.episode_horizon = 100;
  cfg.seed = 3;
  const FrozenLakeRunResult result = train_frozenlake_online(cfg);

  CHECK(result.total_unsafe_visits == 0);
  for (const MetricsRecord& rec : result.metrics) {
    CHECK(rec.unsafe_visits == 0);
  }
  // hole and goal rows were never updated
  for (int hole : frozenlake::kHoles) {
    for (int a = 0; a < 4; ++a) CHECK(result.q(hole, a) == 0.0);
  }
  for (int a = 0; a < 4; ++a) CHECK(result.q(15, a) == 0.0);

  // greedy policy reaches the goal
  CHECK(result.episodes_to_success > 0);
  CHECK(result.evals.back().success_rate == 1.0);

  // positive values along the optimal path
  CHECK(result.q(0, frozenlake::kDown) > 0.0);
  CHECK(result.q(14, frozenlake::kRight) > 0.0);
}

TEST_CASE("frozenlake online runs are reproducible per seed") {
  FrozenLakeRunConfig cfg;
  cfg.episodes = 200;
  cfg.eval_period = 50;
  cfg.seed = 11;
  const FrozenLakeRunResult a = train_frozenlake_online(cfg);
  const FrozenLakeRunResult b = train_frozenlake_online(cfg);
  CHECK(a.q.values() == b.q.values());
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].ep_return == b.metrics[i].ep_return);
    CHECK(a.metrics[i].greedy_return == b.metrics[i].greedy_return);
  }
  cfg.seed = 12;
  const FrozenLakeRunResult c = train_frozenlake_online(cfg);
  CHECK(a.q.values() != c.q.values());
}

TEST_CASE("frozenlake offline case 2 learns from the dataset alone") {
  RngStream collect_rng(7, streams::kBehavior);
  const TabularSafeDataset dataset = collect_frozenlake_dataset(
      hc_frozenlake_policy(), 3000, 100, collect_rng);
  const TabularBehaviorPolicy behavior =
      estimate_tabular_behavior(dataset.transitions(), 16, 4);

  FrozenLakeRunConfig cfg;
  cfg.offline_steps = 30000;
  cfg.eval_period = 2000;
  cfg.hyper.alpha = 0.2;
  cfg.seed = 7;
  const FrozenLakeRunResult result =
      train_frozenlake_offline(dataset, behavior, cfg);

  CHECK(result.total_unsafe_visits == 0);
  CHECK(result.evals.back().success_rate == 1.0);
  for (int hole : frozenlake::kHoles) {
    for (int a = 0; a < 4; ++a) CHECK(result.q(hole, a) == 0.0);
  }

  // pure function of (dataset, seed): identical reruns
  const FrozenLakeRunResult again =
      train_frozenlake_offline(dataset, behavior, cfg);
  CHECK(result.q.values() == again.q.values());
}

TEST_CASE("standard and soft baselines also solve frozenlake online") {
  // The soft temperature must keep the entropy value lambda ln|A| / (1-gamma)
  // below the goal reward, or entropy farming beats terminating at the goal.
  for (const TargetKind kind : {TargetKind::kStandard, TargetKind::kSoft}) {
    FrozenLakeRunConfig cfg;
    cfg.target = kind;
    cfg.episodes = 1500;
    cfg.eval_period = 100;
    cfg.hyper.alpha = 0.2;
    cfg.hyper.lambda = 0.01;
    cfg.seed = 5;
    const FrozenLakeRunResult result = train_frozenlake_online(cfg);
    CHECK(result.total_unsafe_visits == 0);  // same behavior policy
    CHECK(result.evals.back().success_rate == 1.0);
  }
}

TEST_CASE("dqn targets: terminal, per-sample equality, uniform reduction") {
  RngStream rng(102, 1);
  DenseNet target_net = DenseNet::mlp(4, 2, 8);
  target_net.init(rng);
  SafeQHyperparams hyper;
  hyper.lambda = 0.5;
  hyper.gamma = 0.99;
  hyper.eta = 0.01;

  const PidController pid{};
  const DiscreteCartBehavior behavior =
      hc_cartpole_behavior(pid, kHcCartSharpness, hyper.eta);

  // batch of one terminal transition -> [r]
  CartTransition terminal_t;
  terminal_t.state = {0.0, 0.0, 0.1, 0.0};
  terminal_t.action = 1;
  terminal_t.reward = 1.0;
  terminal_t.next_state = {0.0, 0.0, 0.22, 0.0};
  terminal_t.terminal = true;
  const Vec term_targets = dqn_targets(target_net, {terminal_t},
                                       TargetKind::kSafe, &behavior, hyper);
  CHECK(term_targets[0] == 1.0);

  // random batch: target vector equals per-sample recomputation
  std::vector<CartTransition> batch;
  for (int i = 0; i < 16; ++i) {
    CartTransition t;
    for (double& c : t.state) c = rng.next_uniform(-0.1, 0.1);
    for (double& c : t.next_state) c = rng.next_uniform(-0.1, 0.1);
    t.action = rng.next_int(2);
    t.reward = 1.0;
    t.terminal = false;
    batch.push_back(t);
  }
  const Vec safe_targets =
      dqn_targets(target_net, batch, TargetKind::kSafe, &behavior, hyper);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec row = target_net.forward(cartpole::normalize_state(batch[i].next_state));
    const double expected =
        safe_target_discrete(batch[i].reward, row,
                             behavior.smoothed_row(batch[i].next_state), false,
                             hyper.gamma, hyper.lambda);
    CHECK(std::abs(safe_targets[i] - expected) <= 1e-12);
  }

  // uniform behavior row: safe target equals soft target - gamma lambda ln|A|
  DiscreteCartBehavior uniform_behavior;
  uniform_behavior.eta = hyper.eta;
  uniform_behavior.row_fn = [](const cartpole::State&) { return Vec{0.5, 0.5}; };
  const Vec uniform_targets = dqn_targets(target_net, batch, TargetKind::kSafe,
                                          &uniform_behavior, hyper);
  const Vec soft_targets =
      dqn_targets(target_net, batch, TargetKind::kSoft, nullptr, hyper);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(uniform_targets[i] ==
          doctest::Approx(soft_targets[i] - hyper.gamma * hyper.lambda * std::log(2.0))
              .epsilon(1e-12));
  }
}

TEST_CASE("dqn regression step: fixed point has zero loss and zero update") {
  RngStream rng(103, 1);
  DenseNet online = DenseNet::mlp(4, 2, 8);
  online.init(rng);
  const Vec saved = online.params();

  std::vector<Vec> inputs;
  std::vector<int> actions;
  Vec targets;
  DenseNet::Cache cache;
  for (int i = 0; i < 8; ++i) {
    Vec x(4);
    for (double& c : x) c = rng.next_uniform(-1.0, 1.0);
    const int a = rng.next_int(2);
    targets.push_back(online.forward(x, cache)[a]);  // y = Q(s,a)
    inputs.push_back(std::move(x));
    actions.push_back(a);
  }
  Optimizer opt(online.num_params(), 1e-3);
  const double loss = dqn_regression_step(online, opt, inputs, actions, targets);
  CHECK(loss == 0.0);
  CHECK(online.params() == saved);
}

TEST_CASE("dqn regression loss decreases on a frozen batch") {
  RngStream rng(104, 1);
  DenseNet online = DenseNet::mlp(4, 2, 16);
  online.init(rng);
  std::vector<Vec> inputs;
  std::vector<int> actions;
  Vec targets;
  for (int i = 0; i < 32; ++i) {
    Vec x(4);
    for (double& c : x) c = rng.next_uniform(-1.0, 1.0);
    inputs.push_back(std::move(x));
    actions.push_back(rng.next_int(2));
    targets.push_back(rng.next_uniform(0.0, 10.0));
  }
  Optimizer opt(online.num_params(), 1e-3, Optimizer::Mode::kSgd);
  double first = -1.0;
  double last = 0.0;
  for (int step = 0; step < 50; ++step) {
    last = dqn_regression_step(online, opt, inputs, actions, targets);
    if (first < 0.0) first = last;
  }
  CHECK(last < first);
}

TEST_CASE("dqn regression gradient matches finite differences") {
  RngStream rng(105, 1);
  RngStream coord_rng(105, 2);
  DenseNet online = DenseNet::mlp(4, 2, 8);
  online.init(rng);
  std::vector<Vec> inputs;
  std::vector<int> actions;
  Vec targets;
  for (int i = 0; i < 8; ++i) {
    Vec x(4);
    for (double& c : x) c = rng.next_uniform(-1.0, 1.0);
    inputs.push_back(std::move(x));
    actions.push_back(rng.next_int(2));
    targets.push_back(rng.next_uniform(-1.0, 1.0));
  }

  const auto loss_at = [&](const Vec& params) {
    DenseNet probe = online;
    probe.params() = params;
    DenseNet::Cache cache;
    double loss = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const double diff = probe.forward(inputs[i], cache)[actions[i]] - targets[i];
      loss += 0.5 * diff * diff;
    }
    return loss / inputs.size();
  };

  // reproduce the analytic gradient of the regression loss
  DenseNet::Cache cache;
  Vec grad(online.num_params(), 0.0);
  Vec out_grad(2);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vec& out = online.forward(inputs[i], cache);
    std::fill(out_grad.begin(), out_grad.end(), 0.0);
    out_grad[actions[i]] = (out[actions[i]] - targets[i]) / inputs.size();
    online.backward(cache, out_grad, grad);
  }
  CHECK(test::gradient_check(loss_at, online.params(), grad, 60, coord_rng) <= 1e-4);
}

TEST_CASE("continuous safe target: terminal and constant-Q collapse") {
  RngStream rng(106, 1);
  DenseNet target_net({5, 1}, {Activation::kIdentity});
  target_net.params().back() = 0.7;  // Q == 0.7 everywhere

  DenseNet mean_net = DenseNet::mlp(4, 1, 8, Activation::kTanh);
  mean_net.init(rng);
  const MeanNoisePolicy policy(std::move(mean_net), 0.1);
  ContinuousCartBehavior behavior;
  behavior.mean_noise = &policy;
  behavior.sigma_smooth = 0.1;

  SafeQHyperparams hyper;
  hyper.lambda = 0.5;
  hyper.gamma = 0.99;
  hyper.mc_samples = 16;

  CartTransition t;
  t.state = {0.0, 0.0, 0.0, 0.0};
  t.next_state = {0.01, 0.0, 0.01, 0.0};
  t.reward = 1.0;
  t.terminal = true;
  CHECK(continuous_safe_target(target_net, t, behavior, hyper, rng) == 1.0);

  t.terminal = false;
  CHECK(continuous_safe_target(target_net, t, behavior, hyper, rng) ==
        doctest::Approx(1.0 + 0.99 * 0.7).epsilon(1e-12));

  // N = 1 collapses to r + gamma Q(s', a_1)
  hyper.mc_samples = 1;
  RngStream fixed(106, 5);
  RngStream fixed_replay(106, 5);
  const double y = continuous_safe_target(target_net, t, behavior, hyper, fixed);
  // constant net: any sampled action gives the same value
  CHECK(y == doctest::Approx(1.0 + 0.99 * 0.7).epsilon(1e-12));
  (void)fixed_replay;
}

TEST_CASE("continuous greedy action scans the grid") {
  // Q(s, a) = a: the grid maximum is the largest action
  DenseNet q_net({5, 1}, {Activation::kIdentity});
  q_net.params()[4] = 1.0;
  const double a = continuous_greedy_action(q_net, {0.0, 0.0, 0.0, 0.0}, 21);
  CHECK(a == doctest::Approx(1.0));

  // Q(s, a) = -(a - 0.3)^2 has its grid optimum at 0.3
  DenseNet bowl({5, 8, 1}, {Activation::kTanh, Activation::kIdentity});
  RngStream rng(107, 1);
  bowl.init(rng);
  // evaluate on the grid directly for the reference
  Vec input(5, 0.0);
  double best_q = -1e300, best_a = 0.0;
  for (int i = 0; i < 21; ++i) {
    const double cand = -1.0 + 2.0 * i / 20.0;
    input[4] = cand;
    const double v = bowl.forward(input)[0];
    if (v > best_q) {
      best_q = v;
      best_a = cand;
    }
  }
  CHECK(continuous_greedy_action(bowl, {0.0, 0.0, 0.0, 0.0}, 21) ==
        doctest::Approx(best_a));
}

TEST_CASE("dqn online smoke run: finite, safe, reproducible") {
  DqnRunConfig cfg;
  cfg.hyper.lambda = 0.5;
  cfg.hyper.gamma = 0.99;
  cfg.hyper.batch_size = 16;
  cfg.hyper.buffer_capacity = 5000;
  cfg.hyper.episode_horizon = 100;
  cfg.hyper.target_sync_period = 50;
  cfg.episodes = 10;
  cfg.min_buffer = 200;
  cfg.eval_period = 5;
  cfg.eval_episodes = 2;
  cfg.hidden = 16;
  cfg.seed = 21;

  const DiscreteCartBehavior behavior =
      hc_cartpole_behavior(PidController{}, kHcCartSharpness, cfg.hyper.eta);
  const DqnRunResult a = train_cartpole_dqn_online(behavior, cfg);
  CHECK(a.total_unsafe_visits == 0);
  CHECK(a.metrics.size() == 10);
  CHECK(a.evals.size() == 2);
  for (double p : a.q_net.params()) CHECK(std::isfinite(p));

  const DqnRunResult b = train_cartpole_dqn_online(behavior, cfg);
  CHECK(a.q_net.params() == b.q_net.params());
}

TEST_CASE("dqn offline smoke run never touches an environment") {
  RngStream collect_rng(22, streams::kBehavior);
  const CartSafeDataset dataset = collect_cartpole_discrete_dataset(
      PidController{}, kHcCartSharpness, 4, collect_rng);

  std::vector<Vec> states;
  std::vector<int> actions;
  for (const CartTransition& t : dataset.transitions()) {
    states.push_back(cartpole::normalize_state(t.state));
    actions.push_back(static_cast<int>(t.action));
  }
  BehaviorTrainConfig btc;
  btc.steps = 300;
  btc.hidden = 16;
  RngStream train_rng(22, 7);
  const CategoricalPolicy ds_policy =
      train_categorical_behavior(states, actions, btc, train_rng);

  DqnRunConfig cfg;
  cfg.hyper.lambda = 0.5;
  cfg.hyper.gamma = 0.99;
  cfg.hyper.batch_size = 16;
  cfg.hyper.episode_horizon = 100;
  cfg.offline_steps = 400;
  cfg.eval_period = 200;
  cfg.eval_episodes = 2;
  cfg.hidden = 16;
  cfg.seed = 22;

  const DiscreteCartBehavior behavior = ds_cartpole_behavior(ds_policy, cfg.hyper.eta);
  const DqnRunResult a = train_cartpole_dqn_offline(dataset, behavior, cfg);
  const DqnRunResult b = train_cartpole_dqn_offline(dataset, behavior, cfg);
  // pure function of (dataset, behavior, seed): no hidden env interaction
  CHECK(a.q_net.params() == b.q_net.params());
  CHECK(a.metrics.size() == 2);
  for (const MetricsRecord& rec : a.metrics) CHECK(rec.unsafe_visits == 0);
}

TEST_CASE("continuous online smoke run is finite and reproducible") {
  RngStream data_rng(23, streams::kBehavior);
  const CartSafeDataset rollouts =
      collect_cartpole_pid_dataset(PidController{}, 0.05, 5, data_rng);
  std::vector<Vec> states, actions;
  cart_dataset_training_pairs(rollouts, states, actions);
  BehaviorTrainConfig btc;
  btc.steps = 300;
  btc.hidden = 16;
  RngStream train_rng(23, 9);
  const MeanNoisePolicy policy =
      train_mean_noise_behavior(states, actions, btc, train_rng);

  ContinuousCartBehavior behavior;
  behavior.mean_noise = &policy;
  behavior.sigma_smooth = 0.1;

  ContinuousRunConfig cfg;
  cfg.hyper.lambda = 0.5;
  cfg.hyper.gamma = 0.99;
  cfg.hyper.batch_size = 8;
  cfg.hyper.mc_samples = 4;
  cfg.hyper.episode_horizon = 60;
  cfg.episodes = 4;
  cfg.min_buffer = 100;
  cfg.eval_period = 2;
  cfg.eval_episodes = 2;
  cfg.hidden = 16;
  cfg.seed = 23;

  // the briefly-trained imitation here exercises mechanics, not the safety
  // bar; containment under fully trained behaviors is covered elsewhere
  const ContinuousRunResult a = train_cartpole_continuous_online(behavior, cfg);
  CHECK(a.metrics.size() == 4);
  CHECK(a.evals.size() == 2);
  for (double p : a.q_net.params()) CHECK(std::isfinite(p));

  const ContinuousRunResult b = train_cartpole_continuous_online(behavior, cfg);
  CHECK(a.q_net.params() == b.q_net.params());
}
