#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "safeq/behavior.hpp"
#include "safeq/envs.hpp"
#include "test_util.hpp"

using namespace safeq;

namespace {
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
}

TEST_CASE("hand-crafted frozenlake policy zeroes hole-leading actions") {
  const TabularBehaviorPolicy policy = hc_frozenlake_policy();

  // state 6 has holes on both sides
  CHECK(policy.row(6)[frozenlake::kLeft] == 0.0);
  CHECK(policy.row(6)[frozenlake::kRight] == 0.0);
  CHECK(policy.row(6)[frozenlake::kDown] > 0.0);

  for (int s = 0; s < frozenlake::kNumStates; ++s) {
    double sum = 0.0;
    for (int a = 0; a < frozenlake::kNumActions; ++a) {
      sum += policy.row(s)[a];
      if (!frozenlake::is_terminal(s) &&
          frozenlake::is_hole(frozenlake::next_state(s, a))) {
        CHECK(policy.row(s)[a] == 0.0);
      }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // the designated on-path action carries 3x the weight of other safe actions
  CHECK(policy.row(0)[frozenlake::kDown] ==
        doctest::Approx(3.0 * policy.row(0)[frozenlake::kRight]));
}

TEST_CASE("1e4 hand-crafted rollouts never visit a hole") {
  const TabularBehaviorPolicy policy = hc_frozenlake_policy();
  RngStream rng(41, 1);
  FrozenLakeEnv env;
  int goal_hits = 0;
  for (int ep = 0; ep < 10000; ++ep) {
    env.reset();
    for (int k = 0; k < 100 && !env.done(); ++k) {
      const Transition t = env.step(policy.sample(env.state(), rng));
      CHECK_FALSE(is_unsafe_frozenlake(t.next_state));
      if (t.next_state == frozenlake::kGoal) ++goal_hits;
    }
  }
  CHECK(goal_hits > 0);  // the stochastic walk does reach the goal
}

TEST_CASE("count-based behavior estimate matches empirical frequencies") {
  std::vector<Transition> data;
  data.push_back({0, 1, 0.0, 4, false});
  data.push_back({0, 1, 0.0, 4, false});
  data.push_back({0, 2, 0.0, 1, false});
  const TabularBehaviorPolicy est = estimate_tabular_behavior(data, 16, 4);
  CHECK(est.row(0)[1] == doctest::Approx(2.0 / 3.0));
  CHECK(est.row(0)[2] == doctest::Approx(1.0 / 3.0));
  // unvisited states fall back to uniform
  CHECK(est.row(9)[0] == doctest::Approx(0.25));
}

TEST_CASE("smoothing arithmetic and bounds") {
  const Vec smoothed = smooth_row(Vec{1.0, 0.0}, 0.1);
  CHECK(smoothed[0] == doctest::Approx(0.95));
  CHECK(smoothed[1] == doctest::Approx(0.05));

  const Vec uniform = smooth_row(Vec{0.25, 0.25, 0.25, 0.25}, 0.37);
  for (double p : uniform) CHECK(p == doctest::Approx(0.25));

  RngStream rng(42, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.next_int(4);
    Vec row(n, 0.0);
    row[rng.next_int(n)] = 1.0;
    const double eta = rng.next_uniform(0.001, 0.999);
    const Vec s = smooth_row(row, eta);
    double sum = 0.0;
    for (double p : s) {
      CHECK(p >= eta / n - 1e-15);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(smooth_row(Vec{1.0, 0.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(smooth_row(Vec{1.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("smoothed discrete policy rows are strictly positive") {
  const SmoothedDiscretePolicy smoothed(hc_frozenlake_policy(), 0.01);
  for (int s = 0; s < frozenlake::kNumStates; ++s) {
    double sum = 0.0;
    for (int a = 0; a < frozenlake::kNumActions; ++a) {
      CHECK(smoothed.row(s)[a] > 0.0);
      sum += smoothed.row(s)[a];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("safe epsilon-greedy behavior") {
  RngStream rng(43, 1);
  const Vec q_row{0.1, 0.9, 0.5, 0.2};
  const std::array<bool, 4> mask{true, true, false, false};

  // epsilon = 1: uniform over the masked actions, never unsafe
  int count0 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int a = safe_epsilon_greedy(q_row, mask, 1.0, rng);
    CHECK(a <= 1);
    if (a == 0) ++count0;
  }
  CHECK(std::abs(count0 / static_cast<double>(n) - 0.5) < 0.01);

  // epsilon = 0: masked argmax
  CHECK(safe_epsilon_greedy(q_row, mask, 0.0, rng) == 1);

  // epsilon = 0.2: non-greedy safe action frequency ~= eps/|safe|
  int nongreedy = 0;
  for (int i = 0; i < n; ++i) {
    if (safe_epsilon_greedy(q_row, mask, 0.2, rng) == 0) ++nongreedy;
  }
  CHECK(std::abs(nongreedy / static_cast<double>(n) - 0.1) < 0.01);

  const std::array<bool, 4> empty{false, false, false, false};
  CHECK_THROWS_AS(safe_epsilon_greedy(q_row, empty, 0.1, rng),
                  std::invalid_argument);
}

TEST_CASE("pid force arithmetic") {
  const PidController pid{12.0, 2.0, 0.5, 1.0};
  CHECK(pid.force({0.0, 0.0, 0.0, 0.0}) == 0.0);
  CHECK(pid.force({0.0, 0.0, 0.05, 0.0}) == doctest::Approx(0.6));
  CHECK(pid.force({0.0, 0.0, 0.5, 0.5}) == 1.0);  // clipped
  CHECK(pid.force({0.0, 0.0, -0.5, -0.5}) == -1.0);
}

TEST_CASE("default pid keeps 500-step episodes within 9 degrees") {
  const PidController pid{};
  RngStream rng(44, 1);
  CartPoleEnv env;
  for (int ep = 0; ep < 300; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      const CartStepResult res = env.step_force(pid.force(env.state()));
      CHECK(std::abs(res.next_state[2]) * kRadToDeg <= 9.0);
    }
    CHECK(env.step_count() == cartpole::kMaxSteps);  // never terminates early
  }
}

TEST_CASE("bernoulli hand-crafted rows and containment") {
  const PidController pid{};
  const DiscreteDistribution row =
      hc_cartpole_discrete_row(pid, {0.0, 0.0, 0.05, 0.0}, kHcCartSharpness);
  // u = 14 * 0.05 = 0.7 -> clip(4 * 0.7) = 1 -> P(right) = 1
  CHECK(row[1] == doctest::Approx(1.0));
  const DiscreteDistribution balanced =
      hc_cartpole_discrete_row(pid, {0.0, 0.0, 0.0, 0.0}, kHcCartSharpness);
  CHECK(balanced[0] == doctest::Approx(0.5));
  CHECK(balanced[1] == doctest::Approx(0.5));

  RngStream rng(45, 1);
  CartPoleEnv env;
  for (int ep = 0; ep < 300; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      const int a = sample_discrete(
          hc_cartpole_discrete_row(pid, env.state(), kHcCartSharpness), rng);
      const CartStepResult res = env.step_discrete(a);
      CHECK(std::abs(res.next_state[2]) * kRadToDeg <= 9.0);
    }
  }
}

TEST_CASE("mean-noise log density values and monotone decay") {
  RngStream rng(46, 1);
  DenseNet net = DenseNet::mlp(2, 1, 8, Activation::kTanh);
  net.init(rng);
  const MeanNoisePolicy policy(std::move(net), 1.0);

  const Vec state{0.3, -0.2};
  Vec mu(1);
  policy.mean(state, mu);

  // density at the mean with unit sigma: -ln sqrt(2 pi)
  CHECK(policy.log_density(state, mu) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  // moving away from the mean decreases the density monotonically
  double prev = policy.log_density(state, mu);
  for (int k = 1; k <= 10; ++k) {
    const Vec a{mu[0] + 0.2 * k};
    const double lp = policy.log_density(state, a);
    CHECK(lp < prev);
    prev = lp;
  }
}

TEST_CASE("tanh-gaussian samples stay strictly inside (-1,1)") {
  RngStream rng(47, 1);
  DenseNet net = DenseNet::mlp(4, 2, 8, Activation::kIdentity);
  net.init(rng);
  // widen sigma by pushing the raw head up
  DistributionalPolicy policy(std::move(net), 0.02);
  const Vec state{0.1, 0.2, -0.1, 0.4};
  Vec a(1);
  for (int i = 0; i < 20000; ++i) {
    policy.sample(state, a, rng);
    CHECK(std::abs(a[0]) < 1.0);
  }
}

TEST_CASE("tanh-gaussian density integrates to one over (-1,1)") {
  RngStream rng(48, 1);
  DenseNet net = DenseNet::mlp(3, 2, 8, Activation::kIdentity);
  net.init(rng);
  const DistributionalPolicy policy(std::move(net), 0.02);
  const Vec state{0.5, -0.3, 0.2};

  // composite Simpson over the open interval, endpoints excluded
  const int n = 4000;  // even
  const double lo = -1.0 + 1e-9;
  const double hi = 1.0 - 1e-9;
  const double h = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const Vec a{lo + i * h};
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    integral += w * std::exp(policy.log_density(state, a));
  }
  integral *= h / 3.0;
  CHECK(std::abs(integral - 1.0) <= 1e-3);
}

TEST_CASE("log density rejects boundary actions") {
  RngStream rng(49, 1);
  DenseNet net = DenseNet::mlp(2, 2, 8, Activation::kIdentity);
  net.init(rng);
  const DistributionalPolicy policy(std::move(net), 0.02);
  CHECK_THROWS_AS(policy.log_density(Vec{0.0, 0.0}, Vec{1.0}), std::domain_error);
}

TEST_CASE("behavior log-likelihood gradients match finite differences") {
  RngStream rng(50, 1);
  RngStream coord_rng(50, 2);

  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<int> int_actions;
  for (int i = 0; i < 8; ++i) {
    states.push_back(Vec{rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)});
    actions.push_back(Vec{rng.next_uniform(-0.9, 0.9)});
    int_actions.push_back(rng.next_int(2));
  }

  SUBCASE("mean-noise head") {
    DenseNet net = DenseNet::mlp(2, 1, 8, Activation::kTanh);
    net.init(rng);
    MeanNoisePolicy policy(std::move(net), 0.1);
    Vec grad(policy.net().num_params(), 0.0);
    policy.log_likelihood_grad(states, actions, grad);
    const auto f = [&](const Vec& params) {
      MeanNoisePolicy probe = policy;
      probe.net().params() = params;
      double ll = 0.0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        ll += probe.log_density(states[k], actions[k]);
      }
      return ll / states.size();
    };
    CHECK(test::gradient_check(f, policy.net().params(), grad, 60, coord_rng) <=
          1e-4);
  }

  SUBCASE("distributional head including the tanh jacobian") {
    DenseNet net = DenseNet::mlp(2, 2, 8, Activation::kIdentity);
    net.init(rng);
    DistributionalPolicy policy(std::move(net), 0.02);
    Vec grad(policy.net().num_params(), 0.0);
    policy.log_likelihood_grad(states, actions, grad);
    const auto f = [&](const Vec& params) {
      DistributionalPolicy probe = policy;
      probe.net().params() = params;
      double ll = 0.0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        ll += probe.log_density(states[k], actions[k]);
      }
      return ll / states.size();
    };
    CHECK(test::gradient_check(f, policy.net().params(), grad, 60, coord_rng) <=
          1e-4);
  }

  SUBCASE("categorical head") {
    DenseNet net = DenseNet::mlp(2, 2, 8, Activation::kIdentity);
    net.init(rng);
    CategoricalPolicy policy(std::move(net));
    Vec grad(policy.net().num_params(), 0.0);
    policy.log_likelihood_grad(states, int_actions, grad);
    const auto f = [&](const Vec& params) {
      CategoricalPolicy probe = policy;
      probe.net().params() = params;
      double ll = 0.0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        ll += probe.log_density(states[k], int_actions[k]);
      }
      return ll / states.size();
    };
    CHECK(test::gradient_check(f, policy.net().params(), grad, 60, coord_rng) <=
          1e-4);
  }
}

TEST_CASE("distributional action-gradient of the log density") {
  RngStream rng(51, 1);
  DenseNet net = DenseNet::mlp(2, 2, 8, Activation::kIdentity);
  net.init(rng);
  const DistributionalPolicy policy(std::move(net), 0.02);
  const Vec state{0.4, -0.6};
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.next_uniform(-0.9, 0.9);
    Vec dlogp(1);
    policy.log_density_action_grad(state, Vec{a}, dlogp);
    const double h = 1e-6;
    const double hi = policy.log_density(state, Vec{a + h});
    const double lo = policy.log_density(state, Vec{a - h});
    const double fd = (hi - lo) / (2.0 * h);
    CHECK(std::abs(dlogp[0] - fd) / std::max(1.0, std::abs(fd)) <= 1e-4);
  }
}

TEST_CASE("dataset-based training: zero steps returns the initial net") {
  std::vector<Vec> states{{0.0, 0.0}};
  std::vector<Vec> actions{{0.5}};
  BehaviorTrainConfig cfg;
  cfg.steps = 0;
  RngStream rng_a(52, 1);
  RngStream rng_b(52, 1);
  const MeanNoisePolicy trained =
      train_mean_noise_behavior(states, actions, cfg, rng_a);
  DenseNet expected = DenseNet::mlp(2, 1, cfg.hidden, Activation::kTanh);
  expected.init(rng_b);
  CHECK(trained.net().params() == expected.params());
}

TEST_CASE("distributional head converges toward atanh(a) on a repeated pair") {
  const double a_star = 0.4;
  std::vector<Vec> states(64, Vec{0.2, -0.1});
  std::vector<Vec> actions(64, Vec{a_star});
  BehaviorTrainConfig cfg;
  cfg.steps = 0;
  RngStream rng(53, 1);
  DenseNet net = DenseNet::mlp(2, 2, cfg.hidden, Activation::kIdentity);
  net.init(rng);
  DistributionalPolicy policy(std::move(net), cfg.sigma_floor);

  Vec mu(1), sigma(1);
  policy.head(states[0], mu, sigma);
  const double initial_gap = std::abs(mu[0] - std::atanh(a_star));

  Optimizer opt(policy.net().num_params(), 1e-3);
  Vec grad(policy.net().num_params());
  double prev_gap = initial_gap;
  for (int epoch = 0; epoch < 5; ++epoch) {
    for (int step = 0; step < 400; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0);
      policy.log_likelihood_grad(states, actions, grad);
      for (double& g : grad) g = -g;
      opt.step(policy.net().params(), grad);
    }
    policy.head(states[0], mu, sigma);
    const double gap = std::abs(mu[0] - std::atanh(a_star));
    // monotone approach until converged; tiny oscillation is fine after
    if (prev_gap > 0.05) CHECK(gap <= prev_gap + 1e-9);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.05);
  CHECK(prev_gap < initial_gap);
}

TEST_CASE("training loss is non-increasing on a fixed dataset at small step") {
  RngStream data_rng(54, 1);
  std::vector<Vec> states;
  std::vector<Vec> actions;
  const PidController pid{};
  for (int i = 0; i < 256; ++i) {
    const cartpole::State s = {data_rng.next_uniform(-0.1, 0.1),
                               data_rng.next_uniform(-0.2, 0.2),
                               data_rng.next_uniform(-0.05, 0.05),
                               data_rng.next_uniform(-0.2, 0.2)};
    states.push_back(cartpole::normalize_state(s));
    actions.push_back(Vec{pid.force(s)});
  }

  RngStream rng(54, 2);
  DenseNet net = DenseNet::mlp(4, 1, 16, Activation::kTanh);
  net.init(rng);
  MeanNoisePolicy policy(std::move(net), 0.1);
  Optimizer opt(policy.net().num_params(), 1e-3, Optimizer::Mode::kSgd);
  Vec grad(policy.net().num_params());
  double prev_nll = 1e100;
  for (int step = 0; step < 200; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double ll = policy.log_likelihood_grad(states, actions, grad);
    CHECK(-ll <= prev_nll + 1e-10);
    prev_nll = -ll;
    for (double& g : grad) g = -g;
    opt.step(policy.net().params(), grad);
  }
}

TEST_CASE("imitation beats the zero policy on held-out states") {
  const PidController pid{};
  RngStream rng(55, 1);
  const CartSafeDataset rollouts =
      collect_cartpole_pid_dataset(pid, 0.05, 40, rng);
  std::vector<Vec> states, actions;
  cart_dataset_training_pairs(rollouts, states, actions);

  BehaviorTrainConfig cfg;
  cfg.steps = 2000;
  RngStream train_rng(55, 2);
  const MeanNoisePolicy policy =
      train_mean_noise_behavior(states, actions, cfg, train_rng);

  // held-out PID states
  RngStream held_rng(55, 3);
  const CartSafeDataset held = collect_cartpole_pid_dataset(pid, 0.05, 5, held_rng);
  double mse_policy = 0.0;
  double mse_zero = 0.0;
  Vec mu(1);
  for (const CartTransition& t : held.transitions()) {
    const double target = pid.force(t.state);
    policy.mean(cartpole::normalize_state(t.state), mu);
    mse_policy += (mu[0] - target) * (mu[0] - target);
    mse_zero += target * target;
  }
  CHECK(mse_policy < mse_zero);
}

TEST_CASE("fully trained imitation policies keep rollouts within 9 degrees") {
  const PidController pid{};
  RngStream data_rng(57, 1);
  const CartSafeDataset rollouts =
      collect_cartpole_pid_dataset(pid, 0.05, 120, data_rng);
  std::vector<Vec> states, actions;
  cart_dataset_training_pairs(rollouts, states, actions);

  BehaviorTrainConfig cfg;  // committed defaults
  RngStream mn_rng(57, 2);
  const MeanNoisePolicy mean_noise =
      train_mean_noise_behavior(states, actions, cfg, mn_rng);
  RngStream dist_rng(57, 3);
  const DistributionalPolicy distributional =
      train_distributional_behavior(states, actions, cfg, dist_rng);

  const auto contained_episodes = [](auto&& act, RngStream& rng) {
    CartPoleEnv env;
    int contained = 0;
    for (int ep = 0; ep < 100; ++ep) {
      env.reset(rng);
      bool ok = true;
      while (!env.done()) {
        const CartStepResult res = env.step_force(act(env.state(), rng));
        if (std::abs(res.next_state[2]) * kRadToDeg > 9.0) ok = false;
      }
      if (ok) ++contained;
    }
    return contained;
  };

  RngStream mn_eval(57, 4);
  Vec a(1);
  const int mn_ok = contained_episodes(
      [&](const cartpole::State& s, RngStream& r) {
        mean_noise.sample(cartpole::normalize_state(s), a, r);
        return a[0];
      },
      mn_eval);
  CHECK(mn_ok >= 95);

  RngStream dist_eval(57, 5);
  const int dist_ok = contained_episodes(
      [&](const cartpole::State& s, RngStream& r) {
        distributional.sample(cartpole::normalize_state(s), a, r);
        return a[0];
      },
      dist_eval);
  CHECK(dist_ok >= 95);
}

TEST_CASE("safe datasets reject unsafe transitions and round-trip files") {
  // frozenlake: hole endpoint rejected
  std::vector<Transition> bad{{1, 1, 0.0, 5, true}};
  CHECK_THROWS_AS(TabularSafeDataset::from_transitions(bad), std::invalid_argument);

  const TabularBehaviorPolicy policy = hc_frozenlake_policy();
  RngStream rng(56, 1);
  const TabularSafeDataset dataset =
      collect_frozenlake_dataset(policy, 500, 100, rng);
  CHECK(dataset.size() == 500);
  const std::string path = "/tmp/safeq_test_fl_dataset.txt";
  dataset.save(path);
  const TabularSafeDataset loaded = TabularSafeDataset::load(path);
  REQUIRE(loaded.size() == dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    CHECK(loaded[i].state == dataset[i].state);
    CHECK(loaded[i].action == dataset[i].action);
    CHECK(loaded[i].reward == dataset[i].reward);
    CHECK(loaded[i].next_state == dataset[i].next_state);
    CHECK(loaded[i].terminal == dataset[i].terminal);
  }
  std::filesystem::remove(path);

  // cartpole: unsafe angle rejected
  CartTransition t;
  t.state = {0.0, 0.0, 0.2, 0.0};  // 11.5 degrees
  std::vector<CartTransition> bad_cart{t};
  CHECK_THROWS_AS(CartSafeDataset::from_transitions(bad_cart),
                  std::invalid_argument);

  RngStream cart_rng(56, 2);
  const CartSafeDataset cart =
      collect_cartpole_pid_dataset(PidController{}, 0.05, 3, cart_rng);
  const std::string cart_path = "/tmp/safeq_test_cart_dataset.txt";
  cart.save(cart_path);
  const CartSafeDataset cart_loaded = CartSafeDataset::load(cart_path);
  REQUIRE(cart_loaded.size() == cart.size());
  for (std::size_t i = 0; i < cart.size(); i += 97) {
    CHECK(cart_loaded[i].state == cart[i].state);
    CHECK(cart_loaded[i].action == cart[i].action);
    CHECK(cart_loaded[i].next_state == cart[i].next_state);
  }
  std::filesystem::remove(cart_path);
}
