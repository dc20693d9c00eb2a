#include "safeq/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace safeq {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;  // ln(2*pi)

double clip(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double atanh_stable(double a) {
  return 0.5 * (std::log1p(a) - std::log1p(-a));
}

}  // namespace

// ---------------------------------------------------------------------------
// FrozenLake hand-crafted policy
// ---------------------------------------------------------------------------

std::array<bool, frozenlake::kNumActions> frozenlake_safe_actions(int state) {
  std::array<bool, frozenlake::kNumActions> mask{};
  for (int a = 0; a < frozenlake::kNumActions; ++a) {
    mask[a] = !frozenlake::is_hole(frozenlake::next_state(state, a));
  }
  return mask;
}

TabularBehaviorPolicy hc_frozenlake_policy() {
  using namespace frozenlake;
  // First action of a shortest hole-free path to the goal, per state.
  constexpr std::array<int, kNumStates> on_path = {
      kDown,  kRight, kDown,  kLeft,   // row 0
      kDown,  -1,     kDown,  -1,      // row 1
      kRight, kDown,  kDown,  -1,      // row 2
      -1,     kRight, kRight, -1,      // row 3
  };

  TabularBehaviorPolicy policy;
  policy.table.reserve(kNumStates);
  for (int s = 0; s < kNumStates; ++s) {
    if (is_terminal(s)) {
      policy.table.push_back(DiscreteDistribution::uniform(kNumActions));
      continue;
    }
    const auto mask = frozenlake_safe_actions(s);
    Vec weights(kNumActions, 0.0);
    double total = 0.0;
    for (int a = 0; a < kNumActions; ++a) {
      if (!mask[a]) continue;
      weights[a] = (a == on_path[s]) ? 3.0 : 1.0;
      total += weights[a];
    }
    if (total == 0.0) {
      throw std::logic_error("hc_frozenlake_policy: state has no safe action");
    }
    for (double& w : weights) w /= total;
    policy.table.push_back(DiscreteDistribution(std::move(weights)));
  }
  return policy;
}

TabularBehaviorPolicy estimate_tabular_behavior(
    const std::vector<Transition>& data, int num_states, int num_actions) {
  std::vector<Vec> counts(num_states, Vec(num_actions, 0.0));
  for (const Transition& t : data) {
    counts.at(t.state).at(t.action) += 1.0;
  }
  TabularBehaviorPolicy policy;
  policy.table.reserve(num_states);
  for (int s = 0; s < num_states; ++s) {
    double total = 0.0;
    for (double c : counts[s]) total += c;
    if (total == 0.0) {
      policy.table.push_back(DiscreteDistribution::uniform(num_actions));
      continue;
    }
    Vec probs(num_actions);
    for (int a = 0; a < num_actions; ++a) probs[a] = counts[s][a] / total;
    policy.table.push_back(DiscreteDistribution(std::move(probs)));
  }
  return policy;
}

SmoothedDiscretePolicy::SmoothedDiscretePolicy(TabularBehaviorPolicy base,
                                               double eta)
    : base_(std::move(base)), eta_(eta) {
  if (eta <= 0.0 || eta >= 1.0) {
    throw std::invalid_argument("SmoothedDiscretePolicy: eta must be in (0,1)");
  }
  rows_.reserve(base_.table.size());
  for (const auto& row : base_.table) {
    rows_.push_back(DiscreteDistribution(smooth_row(row.probs(), eta)));
  }
}

Vec smooth_row(std::span<const double> probs, double eta) {
  if (eta <= 0.0 || eta >= 1.0) {
    throw std::invalid_argument("smooth_row: eta must be in (0,1)");
  }
  const double u = eta / static_cast<double>(probs.size());
  Vec out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = (1.0 - eta) * probs[i] + u;
  }
  return out;
}

int safe_epsilon_greedy(std::span<const double> q_row,
                        std::span<const bool> safe_mask, double epsilon,
                        RngStream& rng) {
  if (q_row.size() != safe_mask.size()) {
    throw std::invalid_argument("safe_epsilon_greedy: mask size mismatch");
  }
  std::vector<int> safe;
  for (std::size_t a = 0; a < safe_mask.size(); ++a) {
    if (safe_mask[a]) safe.push_back(static_cast<int>(a));
  }
  if (safe.empty()) {
    throw std::invalid_argument("safe_epsilon_greedy: no safe action");
  }
  if (rng.next_double() < epsilon) {
    return safe[rng.next_int(static_cast<int>(safe.size()))];
  }
  int best = safe[0];
  for (int a : safe) {
    if (q_row[a] > q_row[best]) best = a;
  }
  return best;
}

// ---------------------------------------------------------------------------
// PID and cart-pole hand-crafted behaviors
// ---------------------------------------------------------------------------

double PidController::force(const cartpole::State& s) const {
  const double u =
      k_theta * s[2] + k_theta_dot * s[3] + k_x * s[0] + k_x_dot * s[1];
  return clip(u, -1.0, 1.0);
}

DiscreteDistribution hc_cartpole_discrete_row(const PidController& pid,
                                              const cartpole::State& s,
                                              double sharpness) {
  const double p_right = 0.5 * (1.0 + clip(sharpness * pid.force(s), -1.0, 1.0));
  return DiscreteDistribution({1.0 - p_right, p_right});
}

// ---------------------------------------------------------------------------
// MeanNoisePolicy
// ---------------------------------------------------------------------------

MeanNoisePolicy::MeanNoisePolicy(DenseNet net, double sigma_m, double a_min,
                                 double a_max)
    : net_(std::move(net)), sigma_m_(sigma_m), a_min_(a_min), a_max_(a_max) {
  if (sigma_m <= 0.0) {
    throw std::invalid_argument("MeanNoisePolicy: sigma_m must be > 0");
  }
}

void MeanNoisePolicy::mean(std::span<const double> state,
                           std::span<double> out) const {
  const Vec y = net_.forward(state);
  std::copy(y.begin(), y.end(), out.begin());
}

void MeanNoisePolicy::sample(std::span<const double> state,
                             std::span<double> out, RngStream& rng) const {
  mean(state, out);
  for (double& a : out) {
    a = clip(a + sigma_m_ * rng.next_gaussian(), a_min_, a_max_);
  }
}

void MeanNoisePolicy::sample_smoothed(std::span<const double> state,
                                      double sigma_smooth,
                                      std::span<double> out,
                                      RngStream& rng) const {
  mean(state, out);
  for (double& a : out) {
    a = clip(a + sigma_smooth * rng.next_gaussian(), a_min_, a_max_);
  }
}

double MeanNoisePolicy::log_density(std::span<const double> state,
                                    std::span<const double> action) const {
  const Vec mu = net_.forward(state);
  double lp = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = action[i] - mu[i];
    lp += -0.5 * kLn2Pi - std::log(sigma_m_) - d * d / (2.0 * sigma_m_ * sigma_m_);
  }
  return lp;
}

double MeanNoisePolicy::log_likelihood_grad(const std::vector<Vec>& states,
                                            const std::vector<Vec>& actions,
                                            Vec& param_grad) const {
  const double scale = 1.0 / static_cast<double>(states.size());
  DenseNet::Cache cache;
  Vec out_grad(net_.output_dim());
  double ll = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vec& mu = net_.forward(states[k], cache);
    for (int i = 0; i < net_.output_dim(); ++i) {
      const double d = actions[k][i] - mu[i];
      ll += -0.5 * kLn2Pi - std::log(sigma_m_) -
            d * d / (2.0 * sigma_m_ * sigma_m_);
      out_grad[i] = scale * d / (sigma_m_ * sigma_m_);
    }
    net_.backward(cache, out_grad, param_grad);
  }
  return ll * scale;
}

// ---------------------------------------------------------------------------
// DistributionalPolicy
// ---------------------------------------------------------------------------

DistributionalPolicy::DistributionalPolicy(DenseNet net, double sigma_floor)
    : net_(std::move(net)), sigma_floor_(sigma_floor) {
  if (net_.output_dim() % 2 != 0) {
    throw std::invalid_argument(
        "DistributionalPolicy: net must output [mu, sigma_raw]");
  }
  if (sigma_floor <= 0.0) {
    throw std::invalid_argument("DistributionalPolicy: sigma_floor must be > 0");
  }
}

double DistributionalPolicy::sigma_from_raw(double raw) const {
  return sigma_floor_ + softplus(raw);
}

void DistributionalPolicy::head(std::span<const double> state,
                                std::span<double> mu,
                                std::span<double> sigma) const {
  const Vec y = net_.forward(state);
  const int d = action_dim();
  for (int i = 0; i < d; ++i) {
    mu[i] = y[i];
    sigma[i] = sigma_from_raw(y[d + i]);
  }
}

void DistributionalPolicy::sample(std::span<const double> state,
                                  std::span<double> out,
                                  RngStream& rng) const {
  const int d = action_dim();
  Vec mu(d), sigma(d);
  head(state, mu, sigma);
  for (int i = 0; i < d; ++i) {
    out[i] = std::tanh(mu[i] + sigma[i] * rng.next_gaussian());
  }
}

void DistributionalPolicy::mean_action(std::span<const double> state,
                                       std::span<double> out) const {
  const Vec y = net_.forward(state);
  for (int i = 0; i < action_dim(); ++i) out[i] = std::tanh(y[i]);
}

double DistributionalPolicy::log_density(std::span<const double> state,
                                         std::span<const double> action) const {
  const int d = action_dim();
  Vec mu(d), sigma(d);
  head(state, mu, sigma);
  double lp = 0.0;
  for (int i = 0; i < d; ++i) {
    const double a = action[i];
    if (std::abs(a) >= 1.0) {
      throw std::domain_error("DistributionalPolicy: action on tanh boundary");
    }
    const double z = atanh_stable(a);
    const double dz = z - mu[i];
    lp += -0.5 * kLn2Pi - std::log(sigma[i]) -
          dz * dz / (2.0 * sigma[i] * sigma[i]);
    lp -= std::log(1.0 - a * a);
  }
  return lp;
}

double DistributionalPolicy::log_density_action_grad(
    std::span<const double> state, std::span<const double> action,
    std::span<double> dlogp_da) const {
  const int d = action_dim();
  Vec mu(d), sigma(d);
  head(state, mu, sigma);
  double lp = 0.0;
  for (int i = 0; i < d; ++i) {
    const double a = action[i];
    if (std::abs(a) >= 1.0) {
      throw std::domain_error("DistributionalPolicy: action on tanh boundary");
    }
    const double z = atanh_stable(a);
    const double dz = z - mu[i];
    const double var = sigma[i] * sigma[i];
    lp += -0.5 * kLn2Pi - std::log(sigma[i]) - dz * dz / (2.0 * var);
    lp -= std::log(1.0 - a * a);
    // dz/da = 1/(1-a^2); d[-ln(1-a^2)]/da = 2a/(1-a^2)
    dlogp_da[i] = (-dz / var) / (1.0 - a * a) + 2.0 * a / (1.0 - a * a);
  }
  return lp;
}

double DistributionalPolicy::log_likelihood_grad(const std::vector<Vec>& states,
                                                 const std::vector<Vec>& actions,
                                                 Vec& param_grad) const {
  const double scale = 1.0 / static_cast<double>(states.size());
  const int d = action_dim();
  DenseNet::Cache cache;
  Vec out_grad(net_.output_dim());
  double ll = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vec& y = net_.forward(states[k], cache);
    for (int i = 0; i < d; ++i) {
      const double a = actions[k][i];
      if (std::abs(a) >= 1.0) {
        throw std::domain_error("DistributionalPolicy: action on tanh boundary");
      }
      const double mu = y[i];
      const double raw = y[d + i];
      const double sigma = sigma_from_raw(raw);
      const double z = atanh_stable(a);
      const double dz = z - mu;
      const double var = sigma * sigma;
      ll += -0.5 * kLn2Pi - std::log(sigma) - dz * dz / (2.0 * var) -
            std::log(1.0 - a * a);
      out_grad[i] = scale * dz / var;
      const double dlp_dsigma = -1.0 / sigma + dz * dz / (var * sigma);
      out_grad[d + i] = scale * dlp_dsigma * sigmoid(raw);
    }
    net_.backward(cache, out_grad, param_grad);
  }
  return ll * scale;
}

// ---------------------------------------------------------------------------
// CategoricalPolicy
// ---------------------------------------------------------------------------

CategoricalPolicy::CategoricalPolicy(DenseNet net) : net_(std::move(net)) {}

Vec CategoricalPolicy::probs(std::span<const double> state) const {
  Vec logits = net_.forward(state);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - m);
    sum += l;
  }
  for (double& l : logits) l /= sum;
  return logits;
}

int CategoricalPolicy::sample(std::span<const double> state,
                              RngStream& rng) const {
  return sample_discrete(DiscreteDistribution(probs(state)), rng);
}

double CategoricalPolicy::log_density(std::span<const double> state,
                                      int action) const {
  return std::log(probs(state).at(action));
}

double CategoricalPolicy::log_likelihood_grad(const std::vector<Vec>& states,
                                              const std::vector<int>& actions,
                                              Vec& param_grad) const {
  const double scale = 1.0 / static_cast<double>(states.size());
  DenseNet::Cache cache;
  Vec out_grad(net_.output_dim());
  double ll = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vec& logits = net_.forward(states[k], cache);
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - m);
    const double lse = m + std::log(sum);
    ll += logits[actions[k]] - lse;
    for (int a = 0; a < net_.output_dim(); ++a) {
      const double p = std::exp(logits[a] - lse);
      out_grad[a] = scale * ((a == actions[k] ? 1.0 : 0.0) - p);
    }
    net_.backward(cache, out_grad, param_grad);
  }
  return ll * scale;
}

// ---------------------------------------------------------------------------
// Safe datasets
// ---------------------------------------------------------------------------

TabularSafeDataset TabularSafeDataset::from_transitions(
    std::vector<Transition> data) {
  for (const Transition& t : data) {
    if (is_unsafe_frozenlake(t.state) || is_unsafe_frozenlake(t.next_state)) {
      throw std::invalid_argument("TabularSafeDataset: unsafe transition");
    }
  }
  TabularSafeDataset d;
  d.data_ = std::move(data);
  return d;
}

void TabularSafeDataset::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Transition& t : data_) {
    out << t.state << ' ' << t.action << ' ';
    out.precision(17);
    out << t.reward << ' ' << t.next_state << ' ' << (t.terminal ? 1 : 0)
        << '\n';
  }
}

TabularSafeDataset TabularSafeDataset::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Transition> data;
  Transition t;
  int term = 0;
  while (in >> t.state >> t.action >> t.reward >> t.next_state >> term) {
    t.terminal = (term != 0);
    data.push_back(t);
  }
  return from_transitions(std::move(data));
}

CartSafeDataset CartSafeDataset::from_transitions(
    std::vector<CartTransition> data) {
  for (const CartTransition& t : data) {
    if (is_unsafe_cartpole(t.state) || is_unsafe_cartpole(t.next_state)) {
      throw std::invalid_argument("CartSafeDataset: unsafe transition");
    }
  }
  CartSafeDataset d;
  d.data_ = std::move(data);
  return d;
}

void CartSafeDataset::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  for (const CartTransition& t : data_) {
    for (double c : t.state) out << c << ' ';
    out << t.action << ' ' << t.reward << ' ';
    for (double c : t.next_state) out << c << ' ';
    out << (t.terminal ? 1 : 0) << '\n';
  }
}

CartSafeDataset CartSafeDataset::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<CartTransition> data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    CartTransition t;
    int term = 0;
    for (double& c : t.state) ss >> c;
    ss >> t.action >> t.reward;
    for (double& c : t.next_state) ss >> c;
    ss >> term;
    if (!ss) throw std::runtime_error("malformed dataset line: " + line);
    t.terminal = (term != 0);
    data.push_back(t);
  }
  return from_transitions(std::move(data));
}

TabularSafeDataset collect_frozenlake_dataset(
    const TabularBehaviorPolicy& policy, int num_transitions,
    int episode_horizon, RngStream& rng) {
  std::vector<Transition> data;
  data.reserve(num_transitions);
  FrozenLakeEnv env;
  while (static_cast<int>(data.size()) < num_transitions) {
    env.reset();
    for (int k = 0; k < episode_horizon; ++k) {
      const Transition t = env.step(policy.sample(env.state(), rng));
      data.push_back(t);
      if (static_cast<int>(data.size()) == num_transitions) break;
      if (t.terminal) break;
    }
  }
  return TabularSafeDataset::from_transitions(std::move(data));
}

CartSafeDataset collect_cartpole_discrete_dataset(const PidController& pid,
                                                  double sharpness,
                                                  int episodes,
                                                  RngStream& rng) {
  std::vector<CartTransition> data;
  CartPoleEnv env;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      CartTransition t;
      t.state = env.state();
      const int a =
          sample_discrete(hc_cartpole_discrete_row(pid, env.state(), sharpness), rng);
      const CartStepResult res = env.step_discrete(a);
      t.action = static_cast<double>(a);
      t.reward = res.reward;
      t.next_state = res.next_state;
      t.terminal = res.terminal;
      data.push_back(t);
    }
  }
  return CartSafeDataset::from_transitions(std::move(data));
}

CartSafeDataset collect_cartpole_pid_dataset(const PidController& pid,
                                             double dither_std, int episodes,
                                             RngStream& rng) {
  std::vector<CartTransition> data;
  CartPoleEnv env;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      CartTransition t;
      t.state = env.state();
      const double a = clip(pid.force(env.state()) + dither_std * rng.next_gaussian(),
                            -1.0, 1.0);
      const CartStepResult res = env.step_force(a);
      t.action = a;
      t.reward = res.reward;
      t.next_state = res.next_state;
      t.terminal = res.terminal;
      data.push_back(t);
    }
  }
  return CartSafeDataset::from_transitions(std::move(data));
}

// ---------------------------------------------------------------------------
// Behavior training
// ---------------------------------------------------------------------------

namespace {

template <typename ActionT>
void sample_batch(const std::vector<Vec>& states,
                  const std::vector<ActionT>& actions, int batch_size,
                  RngStream& rng, std::vector<Vec>& bs,
                  std::vector<ActionT>& ba) {
  bs.clear();
  ba.clear();
  for (int i = 0; i < batch_size; ++i) {
    const int k = rng.next_int(static_cast<int>(states.size()));
    bs.push_back(states[k]);
    ba.push_back(actions[k]);
  }
}

}  // namespace

MeanNoisePolicy train_mean_noise_behavior(const std::vector<Vec>& states,
                                          const std::vector<Vec>& actions,
                                          const BehaviorTrainConfig& cfg,
                                          RngStream& rng) {
  if (states.empty() || states.size() != actions.size()) {
    throw std::invalid_argument("train_mean_noise_behavior: bad dataset");
  }
  const int in_dim = static_cast<int>(states.front().size());
  const int act_dim = static_cast<int>(actions.front().size());
  DenseNet net = DenseNet::mlp(in_dim, act_dim, cfg.hidden, Activation::kTanh);
  net.init(rng);
  MeanNoisePolicy policy(std::move(net), cfg.sigma_m);
  Optimizer opt(policy.net().num_params(), cfg.alpha);
  Vec grad(policy.net().num_params());
  std::vector<Vec> bs, ba;
  for (int step = 0; step < cfg.steps; ++step) {
    sample_batch(states, actions, cfg.batch_size, rng, bs, ba);
    std::fill(grad.begin(), grad.end(), 0.0);
    policy.log_likelihood_grad(bs, ba, grad);
    for (double& g : grad) g = -g;  // ascent on the log-likelihood
    opt.step(policy.net().params(), grad);
  }
  return policy;
}

DistributionalPolicy train_distributional_behavior(
    const std::vector<Vec>& states, const std::vector<Vec>& actions,
    const BehaviorTrainConfig& cfg, RngStream& rng) {
  if (states.empty() || states.size() != actions.size()) {
    throw std::invalid_argument("train_distributional_behavior: bad dataset");
  }
  const int in_dim = static_cast<int>(states.front().size());
  const int act_dim = static_cast<int>(actions.front().size());
  DenseNet net =
      DenseNet::mlp(in_dim, 2 * act_dim, cfg.hidden, Activation::kIdentity);
  net.init(rng);
  DistributionalPolicy policy(std::move(net), cfg.sigma_floor);
  Optimizer opt(policy.net().num_params(), cfg.alpha);
  Vec grad(policy.net().num_params());
  std::vector<Vec> bs, ba;
  for (int step = 0; step < cfg.steps; ++step) {
    sample_batch(states, actions, cfg.batch_size, rng, bs, ba);
    std::fill(grad.begin(), grad.end(), 0.0);
    policy.log_likelihood_grad(bs, ba, grad);
    for (double& g : grad) g = -g;
    opt.step(policy.net().params(), grad);
  }
  return policy;
}

CategoricalPolicy train_categorical_behavior(const std::vector<Vec>& states,
                                             const std::vector<int>& actions,
                                             const BehaviorTrainConfig& cfg,
                                             RngStream& rng) {
  if (states.empty() || states.size() != actions.size()) {
    throw std::invalid_argument("train_categorical_behavior: bad dataset");
  }
  const int in_dim = static_cast<int>(states.front().size());
  int num_actions = 0;
  for (int a : actions) num_actions = std::max(num_actions, a + 1);
  DenseNet net =
      DenseNet::mlp(in_dim, num_actions, cfg.hidden, Activation::kIdentity);
  net.init(rng);
  CategoricalPolicy policy(std::move(net));
  Optimizer opt(policy.net().num_params(), cfg.alpha);
  Vec grad(policy.net().num_params());
  std::vector<Vec> bs;
  std::vector<int> ba;
  for (int step = 0; step < cfg.steps; ++step) {
    sample_batch(states, actions, cfg.batch_size, rng, bs, ba);
    std::fill(grad.begin(), grad.end(), 0.0);
    policy.log_likelihood_grad(bs, ba, grad);
    for (double& g : grad) g = -g;
    opt.step(policy.net().params(), grad);
  }
  return policy;
}

void cart_dataset_training_pairs(const CartSafeDataset& data,
                                 std::vector<Vec>& states,
                                 std::vector<Vec>& actions) {
  states.clear();
  actions.clear();
  states.reserve(data.size());
  actions.reserve(data.size());
  for (const CartTransition& t : data.transitions()) {
    states.push_back(cartpole::normalize_state(t.state));
    actions.push_back(Vec{t.action});
  }
}

}  // namespace safeq
