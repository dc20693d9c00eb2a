#include "safeq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safeq::oracle {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

// sum_a pi(a) q(a) - lambda * KL(pi || prior), with 0 ln 0 = 0.
double regularized_objective(std::span<const double> pi,
                             std::span<const double> q_row,
                             std::span<const double> prior,
                             double lambda) {
  double value = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    if (pi[a] <= 0.0) continue;
    value += pi[a] * q_row[a] - lambda * pi[a] * std::log(pi[a] / prior[a]);
  }
  return value;
}

// Exact backup of one (s,a) pair: expectation over the full transition row
// of the regularized next-state value, zero at terminal successors.
double backup_value(const TabularMdp& mdp, const QTable& q,
                    const std::vector<DiscreteDistribution>& prior,
                    double lambda, int s, int a) {
  const DiscreteDistribution& row = mdp.transition(s, a);
  double acc = mdp.reward(s, a);
  for (int sn = 0; sn < mdp.num_states(); ++sn) {
    const double p = row[sn];
    if (p == 0.0 || mdp.is_terminal(sn)) continue;
    // lambda * ln sum_a' prior(a'|sn) exp(Q(sn,a')/lambda), max-stabilized
    const auto q_row = q.row(sn);
    const auto& w = prior[sn].probs();
    double m = -std::numeric_limits<double>::infinity();
    for (int an = 0; an < mdp.num_actions(); ++an) {
      if (w[an] > 0.0) m = std::max(m, q_row[an] / lambda);
    }
    double sum = 0.0;
    for (int an = 0; an < mdp.num_actions(); ++an) {
      if (w[an] > 0.0) sum += w[an] * std::exp(q_row[an] / lambda - m);
    }
    acc += p * mdp.gamma() * lambda * (m + std::log(sum));
  }
  return acc;
}

double sup_norm_diff(const QTable& a, const QTable& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  }
  return m;
}

}  // namespace

QTable exact_bellman_apply(const TabularMdp& mdp, const QTable& q,
                           const std::vector<DiscreteDistribution>& prior,
                           double lambda) {
  if (static_cast<int>(prior.size()) != mdp.num_states()) {
    throw std::invalid_argument("exact_bellman_apply: prior size mismatch");
  }
  QTable out(mdp.num_states(), mdp.num_actions());
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(); ++a) {
      out(s, a) = backup_value(mdp, q, prior, lambda, s, a);
    }
  }
  return out;
}

std::pair<QTable, OracleReport> value_iteration_fixed_point(
    const TabularMdp& mdp, const std::vector<DiscreteDistribution>& prior,
    double lambda, double tol, int max_iterations) {
  if (tol <= 0.0) {
    throw std::invalid_argument("value_iteration_fixed_point: tol must be > 0");
  }
  const double gamma = mdp.gamma();
  const double stop =
      gamma > 0.0 ? tol * (1.0 - gamma) / gamma : std::numeric_limits<double>::max();
  QTable q(mdp.num_states(), mdp.num_actions());
  OracleReport report;
  for (int it = 0; it < max_iterations; ++it) {
    QTable next = exact_bellman_apply(mdp, q, prior, lambda);
    const double change = sup_norm_diff(next, q);
    q = std::move(next);
    report.iterations = it + 1;
    if (change <= stop) {
      report.converged = true;
      break;
    }
  }
  const QTable residual_check = exact_bellman_apply(mdp, q, prior, lambda);
  report.max_abs_error = sup_norm_diff(residual_check, q);
  if (report.max_abs_error > tol) report.converged = false;
  return {std::move(q), report};
}

bool contraction_check(const TabularMdp& mdp,
                       const std::vector<DiscreteDistribution>& prior,
                       double lambda, const QTable& q1, const QTable& q2) {
  const QTable t1 = exact_bellman_apply(mdp, q1, prior, lambda);
  const QTable t2 = exact_bellman_apply(mdp, q2, prior, lambda);
  return sup_norm_diff(t1, t2) <= mdp.gamma() * sup_norm_diff(q1, q2) + 1e-12;
}

GridMaximizerResult grid_kl_maximizer(std::span<const double> q_row,
                                      std::span<const double> prior_row,
                                      double lambda, int resolution) {
  const int n = static_cast<int>(q_row.size());
  if (n < 1 || n > 6) {
    throw std::invalid_argument("grid_kl_maximizer: need 1 <= |A| <= 6");
  }
  if (prior_row.size() != q_row.size()) {
    throw std::invalid_argument("grid_kl_maximizer: row size mismatch");
  }
  for (double p : prior_row) {
    if (p <= 0.0) {
      throw std::invalid_argument("grid_kl_maximizer: prior must be positive");
    }
  }

  // Stage 1: barycentric grid enumeration.
  Vec best(n, 0.0);
  double best_value = -std::numeric_limits<double>::infinity();
  Vec counts(n, 0.0);
  Vec candidate(n, 0.0);
  const double step = 1.0 / resolution;
  std::function<void(int, int)> enumerate = [&](int index, int remaining) {
    if (index == n - 1) {
      candidate[index] = remaining * step;
      const double v = regularized_objective(candidate, q_row, prior_row, lambda);
      if (v > best_value) {
        best_value = v;
        best = candidate;
      }
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      candidate[index] = k * step;
      enumerate(index + 1, remaining - k);
    }
  };
  enumerate(0, resolution);

  // Stage 2: golden-section searches over pairwise mass transfers.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto pair_objective = [&](int i, int j, double t) {
    Vec pi = best;
    pi[i] -= t;
    pi[j] += t;
    return regularized_objective(pi, q_row, prior_row, lambda);
  };
  for (int sweep = 0; sweep < 200; ++sweep) {
    double improvement = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double lo = -best[j];
        double hi = best[i];
        if (hi - lo < 1e-15) continue;
        double x1 = hi - inv_phi * (hi - lo);
        double x2 = lo + inv_phi * (hi - lo);
        double f1 = pair_objective(i, j, x1);
        double f2 = pair_objective(i, j, x2);
        for (int it = 0; it < 90; ++it) {
          if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = pair_objective(i, j, x2);
          } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = pair_objective(i, j, x1);
          }
        }
        const double t = 0.5 * (lo + hi);
        const double v = pair_objective(i, j, t);
        if (v > best_value) {
          improvement += v - best_value;
          best_value = v;
          best[i] -= t;
          best[j] += t;
        }
      }
    }
    if (improvement < 1e-14) break;
  }

  GridMaximizerResult result;
  result.maximizer = std::move(best);
  result.value = best_value;
  return result;
}

Vec solve_linear_system(std::vector<Vec> a, Vec b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-14) {
      throw std::runtime_error("solve_linear_system: singular matrix");
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < n; ++r) {
      const double factor = a[r][col] / a[col][col];
      if (factor == 0.0) continue;
      for (int c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  Vec x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
    x[r] = acc / a[r][r];
  }
  return x;
}

double eval_kl_return(const TabularMdp& mdp,
                      const std::vector<DiscreteDistribution>& policy,
                      const std::vector<DiscreteDistribution>& prior,
                      double lambda, const DiscreteDistribution& initial) {
  const int n = mdp.num_states();
  const int na = mdp.num_actions();

  // Per-state regularized reward and policy-induced transition matrix;
  // terminal states are absorbing with zero reward and no KL penalty.
  std::vector<Vec> a(n, Vec(n, 0.0));
  Vec g(n, 0.0);
  for (int s = 0; s < n; ++s) {
    a[s][s] = 1.0;
    if (mdp.is_terminal(s)) continue;
    double reward = 0.0;
    double kl = 0.0;
    for (int act = 0; act < na; ++act) {
      const double p = policy[s][act];
      if (p <= 0.0) continue;
      reward += p * mdp.reward(s, act);
      kl += p * std::log(p / prior[s][act]);
    }
    g[s] = reward - lambda * kl;
    for (int act = 0; act < na; ++act) {
      const double p = policy[s][act];
      if (p <= 0.0) continue;
      const DiscreteDistribution& row = mdp.transition(s, act);
      for (int sn = 0; sn < n; ++sn) {
        if (mdp.is_terminal(sn)) continue;  // terminal continuation is zero
        a[s][sn] -= mdp.gamma() * p * row[sn];
      }
    }
  }
  const Vec v = solve_linear_system(std::move(a), std::move(g));
  double j = 0.0;
  for (int s = 0; s < n; ++s) j += initial[s] * v[s];
  return (1.0 - mdp.gamma()) * j;
}

RolloutStats aggregate(const std::vector<EpisodeRecord>& episodes) {
  RolloutStats stats;
  if (episodes.empty()) return stats;
  for (const EpisodeRecord& e : episodes) {
    stats.mean_undiscounted += e.undiscounted;
    stats.mean_discounted += e.discounted;
    stats.success_rate += e.success ? 1.0 : 0.0;
    stats.unsafe_episode_rate += e.unsafe ? 1.0 : 0.0;
    stats.mean_max_angle_deg += e.max_angle_deg;
    stats.mean_risk_severity_deg += e.risk_severity_deg;
  }
  const double inv = 1.0 / static_cast<double>(episodes.size());
  stats.mean_undiscounted *= inv;
  stats.mean_discounted *= inv;
  stats.success_rate *= inv;
  stats.unsafe_episode_rate *= inv;
  stats.mean_max_angle_deg *= inv;
  stats.mean_risk_severity_deg *= inv;
  return stats;
}

std::vector<EpisodeRecord> rollout_frozenlake(
    const std::function<int(int state, RngStream&)>& policy, int episodes,
    double gamma, int horizon, RngStream& rng) {
  std::vector<EpisodeRecord> records;
  records.reserve(episodes);
  FrozenLakeEnv env;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset();
    EpisodeRecord rec;
    double factor = 1.0;
    for (int k = 0; k < horizon && !env.done(); ++k) {
      const Transition t = env.step(policy(env.state(), rng));
      rec.undiscounted += t.reward;
      rec.discounted += factor * t.reward;
      factor *= gamma;
      ++rec.steps;
      if (is_unsafe_frozenlake(t.next_state)) rec.unsafe = true;
      if (t.next_state == frozenlake::kGoal) rec.success = true;
    }
    records.push_back(rec);
  }
  return records;
}

std::vector<EpisodeRecord> rollout_cartpole(
    const std::function<double(const cartpole::State&, RngStream&)>& policy,
    bool discrete, int episodes, double gamma, RngStream& rng) {
  std::vector<EpisodeRecord> records;
  records.reserve(episodes);
  CartPoleEnv env;
  const double margin_deg = 7.0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    EpisodeRecord rec;
    double factor = 1.0;
    double severity_sum = 0.0;
    while (!env.done()) {
      const double a = policy(env.state(), rng);
      const CartStepResult res =
          discrete ? env.step_discrete(static_cast<int>(a)) : env.step_force(a);
      rec.undiscounted += res.reward;
      rec.discounted += factor * res.reward;
      factor *= gamma;
      ++rec.steps;
      const double angle_deg = std::abs(res.next_state[2]) * kRadToDeg;
      rec.max_angle_deg = std::max(rec.max_angle_deg, angle_deg);
      severity_sum += std::max(0.0, angle_deg - margin_deg);
      if (is_unsafe_cartpole(res.next_state)) rec.unsafe = true;
    }
    rec.risk_severity_deg = rec.steps > 0 ? severity_sum / rec.steps : 0.0;
    records.push_back(rec);
  }
  return records;
}

std::pair<double, double> mc_policy_return_frozenlake(
    const std::function<int(int, RngStream&)>& policy, int episodes,
    double gamma, int horizon, RngStream& rng) {
  const auto records = rollout_frozenlake(policy, episodes, gamma, horizon, rng);
  const RolloutStats stats = aggregate(records);
  return {stats.mean_discounted, stats.mean_undiscounted};
}

std::pair<double, double> mc_policy_return_cartpole(
    const std::function<double(const cartpole::State&, RngStream&)>& policy,
    bool discrete, int episodes, double gamma, RngStream& rng) {
  const auto records = rollout_cartpole(policy, discrete, episodes, gamma, rng);
  const RolloutStats stats = aggregate(records);
  return {stats.mean_discounted, stats.mean_undiscounted};
}

}  // namespace safeq::oracle
