#include "safeq/neural.hpp"

#include <cmath>
#include <stdexcept>

namespace safeq {

namespace {

double apply_activation(Activation act, double z) {
  switch (act) {
    case Activation::kIdentity: return z;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
  }
  return z;
}

// Derivative in terms of pre-activation z and output y = act(z).
double activation_grad(Activation act, double z, double y) {
  switch (act) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

}  // namespace

DenseNet::DenseNet(std::vector<int> dims, std::vector<Activation> acts)
    : dims_(std::move(dims)), acts_(std::move(acts)) {
  if (dims_.size() < 2 || acts_.size() != dims_.size() - 1) {
    throw std::invalid_argument("DenseNet: dims/activations size mismatch");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] < 1 || dims_[l + 1] < 1) {
      throw std::invalid_argument("DenseNet: layer dimension must be positive");
    }
    layer_offset_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]) * dims_[l] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

DenseNet DenseNet::mlp(int input, int output, int hidden,
                       Activation output_act) {
  return DenseNet({input, hidden, hidden, output},
                  {Activation::kTanh, Activation::kTanh, output_act});
}

void DenseNet::init(RngStream& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const int fan_in = dims_[l];
    const int fan_out = dims_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    double* w = params_.data() + layer_offset_[l];
    for (int i = 0; i < fan_out * fan_in; ++i) {
      w[i] = rng.next_uniform(-bound, bound);
    }
    double* b = w + static_cast<std::size_t>(fan_out) * fan_in;
    for (int i = 0; i < fan_out; ++i) {
      b[i] = rng.next_uniform(-bound, bound);
    }
  }
}

Vec DenseNet::forward(std::span<const double> input) const {
  Cache cache;
  return forward(input, cache);
}

const Vec& DenseNet::forward(std::span<const double> input, Cache& cache) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw std::invalid_argument("DenseNet::forward: input dimension mismatch");
  }
  const int layers = num_layers();
  cache.pre.resize(layers);
  cache.post.resize(layers + 1);
  cache.post[0].assign(input.begin(), input.end());
  for (int l = 0; l < layers; ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + layer_offset_[l];
    const double* b = w + static_cast<std::size_t>(out) * in;
    const Vec& x = cache.post[l];
    Vec& z = cache.pre[l];
    Vec& y = cache.post[l + 1];
    z.resize(out);
    y.resize(out);
    for (int i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * x[j];
      z[i] = acc;
      y[i] = apply_activation(acts_[l], acc);
    }
  }
  return cache.post[layers];
}

Vec DenseNet::backward(const Cache& cache, std::span<const double> output_grad,
                       Vec& param_grad) const {
  const int layers = num_layers();
  if (static_cast<int>(cache.post.size()) != layers + 1) {
    throw std::logic_error("DenseNet::backward: stale or missing forward cache");
  }
  if (static_cast<int>(output_grad.size()) != output_dim()) {
    throw std::invalid_argument("DenseNet::backward: output gradient size mismatch");
  }
  if (param_grad.size() != params_.size()) {
    throw std::invalid_argument("DenseNet::backward: param_grad size mismatch");
  }

  Vec delta(output_grad.begin(), output_grad.end());
  for (int l = layers - 1; l >= 0; --l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + layer_offset_[l];
    double* gw = param_grad.data() + layer_offset_[l];
    double* gb = gw + static_cast<std::size_t>(out) * in;
    const Vec& x = cache.post[l];
    const Vec& z = cache.pre[l];
    const Vec& y = cache.post[l + 1];

    for (int i = 0; i < out; ++i) {
      delta[i] *= activation_grad(acts_[l], z[i], y[i]);
    }
    Vec prev(in, 0.0);
    for (int i = 0; i < out; ++i) {
      const double d = delta[i];
      const double* row = w + static_cast<std::size_t>(i) * in;
      double* grow = gw + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) {
        grow[j] += d * x[j];
        prev[j] += d * row[j];
      }
      gb[i] += d;
    }
    delta = std::move(prev);
  }
  return delta;
}

Optimizer::Optimizer(std::size_t num_params, double alpha, Mode mode)
    : mode_(mode), alpha_(alpha), m_(num_params, 0.0), v_(num_params, 0.0) {
  if (alpha < 0.0) {
    throw std::invalid_argument("Optimizer: negative step size");
  }
}

void Optimizer::step(Vec& params, const Vec& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Optimizer::step: size mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("Optimizer::step: non-finite gradient");
    }
  }
  ++step_count_;
  if (mode_ == Mode::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= alpha_ * grads[i];
    }
    return;
  }
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= alpha_ * m_hat / (std::sqrt(v_hat) + eps_);
  }
}

}  // namespace safeq
