#include "safeq/extract.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace safeq {

Vec behavior_softmax_row(std::span<const double> q_row,
                         std::span<const double> prior_row, double lambda) {
  if (q_row.size() != prior_row.size() || q_row.empty()) {
    throw std::invalid_argument("behavior_softmax_row: size mismatch");
  }
  if (lambda <= 0.0) {
    throw std::invalid_argument("behavior_softmax_row: lambda must be > 0");
  }
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < q_row.size(); ++a) {
    if (prior_row[a] <= 0.0) {
      throw std::invalid_argument("behavior_softmax_row: prior must be positive");
    }
    m = std::max(m, q_row[a]);
  }
  Vec out(q_row.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < q_row.size(); ++a) {
    out[a] = prior_row[a] * std::exp((q_row[a] - m) / lambda);
    sum += out[a];
  }
  for (double& p : out) p /= sum;
  return out;
}

std::vector<DiscreteDistribution> discrete_optimal_policy(
    const QTable& q, const SmoothedDiscretePolicy& smoothed, double lambda) {
  std::vector<DiscreteDistribution> policy;
  policy.reserve(q.num_states());
  for (int s = 0; s < q.num_states(); ++s) {
    policy.push_back(DiscreteDistribution(
        behavior_softmax_row(q.row(s), smoothed.row(s).probs(), lambda)));
  }
  return policy;
}

namespace {

// Shared scaffolding of the two surrogates: evaluates mu_phi(s_i), forms
// a = mu_phi(s_i) + w_j, obtains dL/da from the case-specific term, adds the
// frozen-Q contribution through the action input, and backpropagates into
// the policy parameters.
template <typename TermFn>
double surrogate_loss_impl(const DenseNet& policy_net, const DenseNet& q_net,
                           const std::vector<Vec>& states,
                           const std::vector<Vec>& noises, double lambda,
                           Vec& policy_grad, TermFn&& term) {
  const int act_dim = policy_net.output_dim();
  const int state_dim = policy_net.input_dim();
  if (q_net.input_dim() != state_dim + act_dim) {
    throw std::invalid_argument("surrogate loss: Q input dimension mismatch");
  }
  DenseNet::Cache policy_cache, q_cache;
  Vec q_param_sink(q_net.num_params(), 0.0);
  Vec q_out_grad{1.0};
  Vec action(act_dim);
  Vec dl_da(act_dim);
  Vec mu_grad(act_dim);
  Vec q_input(state_dim + act_dim);

  double loss = 0.0;
  for (const Vec& s : states) {
    const Vec& mu = policy_net.forward(s, policy_cache);
    std::fill(mu_grad.begin(), mu_grad.end(), 0.0);
    for (const Vec& w : noises) {
      for (int d = 0; d < act_dim; ++d) action[d] = mu[d] + w[d];

      // case-specific term: value and d(term)/da
      loss += term(s, action, dl_da);

      // -Q(s, a)/lambda term through the frozen Q-network
      std::copy(s.begin(), s.end(), q_input.begin());
      std::copy(action.begin(), action.end(), q_input.begin() + state_dim);
      const Vec& qv = q_net.forward(q_input, q_cache);
      loss -= qv[0] / lambda;
      std::fill(q_param_sink.begin(), q_param_sink.end(), 0.0);
      const Vec q_in_grad = q_net.backward(q_cache, q_out_grad, q_param_sink);
      for (int d = 0; d < act_dim; ++d) {
        dl_da[d] -= q_in_grad[state_dim + d] / lambda;
      }
      for (int d = 0; d < act_dim; ++d) mu_grad[d] += dl_da[d];
    }
    policy_net.backward(policy_cache, mu_grad, policy_grad);
  }
  return loss;
}

}  // namespace

double surrogate_loss_mean_noise(const DenseNet& policy_net,
                                 const DenseNet& q_net,
                                 const MeanNoisePolicy& behavior,
                                 const std::vector<Vec>& states,
                                 const std::vector<Vec>& noises, double lambda,
                                 Vec& policy_grad) {
  const int act_dim = policy_net.output_dim();
  Vec mu_b(act_dim);
  const double inv_var = 1.0 / (behavior.sigma_m() * behavior.sigma_m());
  return surrogate_loss_impl(
      policy_net, q_net, states, noises, lambda, policy_grad,
      [&](const Vec& s, const Vec& action, Vec& dl_da) {
        behavior.mean(s, mu_b);
        double term = 0.0;
        for (int d = 0; d < act_dim; ++d) {
          const double diff = action[d] - mu_b[d];
          term += 0.5 * inv_var * diff * diff;
          dl_da[d] = inv_var * diff;
        }
        return term;
      });
}

double surrogate_loss_distributional(const DenseNet& policy_net,
                                     const DenseNet& q_net,
                                     const DistributionalPolicy& behavior,
                                     const std::vector<Vec>& states,
                                     const std::vector<Vec>& noises,
                                     double lambda, Vec& policy_grad) {
  const int act_dim = policy_net.output_dim();
  constexpr double kMargin = 1e-6;
  static bool warned = false;
  Vec clamped(act_dim);
  Vec dlogp_da(act_dim);
  return surrogate_loss_impl(
      policy_net, q_net, states, noises, lambda, policy_grad,
      [&](const Vec& s, const Vec& action, Vec& dl_da) {
        bool hit_boundary = false;
        for (int d = 0; d < act_dim; ++d) {
          clamped[d] = std::clamp(action[d], -1.0 + kMargin, 1.0 - kMargin);
          if (clamped[d] != action[d]) hit_boundary = true;
        }
        if (hit_boundary && !warned) {
          std::cerr << "warning: action clamped to tanh-density domain\n";
          warned = true;
        }
        const double logp =
            behavior.log_density_action_grad(s, clamped, dlogp_da);
        for (int d = 0; d < act_dim; ++d) {
          dl_da[d] = (clamped[d] == action[d]) ? -dlogp_da[d] : 0.0;
        }
        return -logp;
      });
}

ExtractionResult extract_continuous_policy(const DenseNet& q_net,
                                           const MeanNoisePolicy* mean_noise,
                                           const DistributionalPolicy* distributional,
                                           const ExtractionHyperparams& hyper,
                                           RngStream& rng,
                                           const std::vector<Vec>* state_pool) {
  hyper.validate();
  if ((mean_noise == nullptr) == (distributional == nullptr)) {
    throw std::invalid_argument(
        "extract_continuous_policy: exactly one behavior policy required");
  }
  if (state_pool && state_pool->empty()) {
    throw std::invalid_argument("extract_continuous_policy: empty state pool");
  }
  const int act_dim = mean_noise ? mean_noise->action_dim()
                                 : distributional->action_dim();
  const int state_dim = q_net.input_dim() - act_dim;

  ExtractionResult result{
      DenseNet::mlp(state_dim, act_dim, hyper.hidden, Activation::kTanh), {}};
  result.policy_net.init(rng);
  Optimizer opt(result.policy_net.num_params(), hyper.alpha_pi);
  Vec grad(result.policy_net.num_params());
  std::vector<Vec> states(hyper.p_states, Vec(state_dim));
  std::vector<Vec> noises(hyper.q_noises, Vec(act_dim));
  result.loss_trace.reserve(hyper.steps);

  for (int t = 0; t < hyper.steps; ++t) {
    for (Vec& s : states) {
      if (state_pool) {
        s = (*state_pool)[static_cast<std::size_t>(
            rng.next_int(static_cast<int>(state_pool->size())))];
      } else {
        for (double& c : s) c = hyper.sigma_1 * rng.next_gaussian();
      }
    }
    for (Vec& w : noises) {
      for (double& c : w) c = hyper.sigma_2 * rng.next_gaussian();
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss;
    if (mean_noise) {
      loss = surrogate_loss_mean_noise(result.policy_net, q_net, *mean_noise,
                                       states, noises, hyper.lambda, grad);
    } else {
      loss = surrogate_loss_distributional(result.policy_net, q_net,
                                           *distributional, states, noises,
                                           hyper.lambda, grad);
    }
    opt.step(result.policy_net.params(), grad);
    result.loss_trace.push_back(loss);
  }
  return result;
}

}  // namespace safeq
