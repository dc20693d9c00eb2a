#ifndef SAFEQ_NEURAL_HPP
#define SAFEQ_NEURAL_HPP

#include <span>
#include <vector>

#include "safeq/core.hpp"
#include "safeq/rng.hpp"

namespace safeq {

enum class Activation { kIdentity, kTanh, kRelu };

// Fully connected network with a fixed layer topology and a flat parameter
// vector (per layer: row-major weight matrix, then bias). Forward caches
// pre- and post-activation values so backward can run exact reverse-mode
// differentiation; backward also returns the input gradient, which the
// policy losses need to push gradients through the action argument of a
// frozen Q-network.
class DenseNet {
 public:
  // dims = {input, hidden..., output}; acts has one entry per layer.
  DenseNet(std::vector<int> dims, std::vector<Activation> acts);

  // Two tanh hidden layers of `hidden` units each.
  static DenseNet mlp(int input, int output, int hidden = 64,
                      Activation output_act = Activation::kIdentity);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(acts_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Activation>& activations() const { return acts_; }

  std::size_t num_params() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Fan-in scaled uniform initialization, U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
  void init(RngStream& rng);

  struct Cache {
    std::vector<Vec> pre;   // pre-activation per layer
    std::vector<Vec> post;  // post[0] = input copy, post[l+1] = layer output
  };

  // Deterministic evaluation; repeated calls on equal input are bit-identical.
  Vec forward(std::span<const double> input) const;
  const Vec& forward(std::span<const double> input, Cache& cache) const;

  // Accumulates (+=) parameter gradients into param_grad (sized num_params)
  // and returns dL/dinput. Requires the cache of a preceding forward.
  Vec backward(const Cache& cache, std::span<const double> output_grad,
               Vec& param_grad) const;

 private:
  std::vector<int> dims_;
  std::vector<Activation> acts_;
  std::vector<std::size_t> layer_offset_;  // start of layer l in params_
  Vec params_;
};

// Adam-style optimizer with a plain-SGD mode. Throws on non-finite
// gradients rather than silently corrupting the parameters.
class Optimizer {
 public:
  enum class Mode { kSgd, kAdam };

  explicit Optimizer(std::size_t num_params, double alpha,
                     Mode mode = Mode::kAdam);

  double alpha() const { return alpha_; }
  void set_alpha(double a) { alpha_ = a; }
  long step_count() const { return step_count_; }

  void step(Vec& params, const Vec& grads);

 private:
  Mode mode_;
  double alpha_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long step_count_ = 0;
  Vec m_;
  Vec v_;
};

}  // namespace safeq

#endif  // SAFEQ_NEURAL_HPP
