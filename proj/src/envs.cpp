#include "safeq/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace safeq {

namespace frozenlake {

bool is_hole(int state) {
  for (int h : kHoles) {
    if (state == h) return true;
  }
  return false;
}

bool is_terminal(int state) { return is_hole(state) || state == kGoal; }

int next_state(int state, int action) {
  const int row = state / 4;
  const int col = state % 4;
  int nr = row;
  int nc = col;
  switch (action) {
    case kLeft: nc = col - 1; break;
    case kDown: nr = row + 1; break;
    case kRight: nc = col + 1; break;
    case kUp: nr = row - 1; break;
    default: throw std::invalid_argument("frozenlake: action out of range");
  }
  if (nr < 0 || nr > 3 || nc < 0 || nc > 3) return state;
  return nr * 4 + nc;
}

}  // namespace frozenlake

int FrozenLakeEnv::reset() {
  state_ = frozenlake::kStart;
  done_ = false;
  return state_;
}

Transition FrozenLakeEnv::step(int action) {
  if (done_) {
    throw std::logic_error("FrozenLakeEnv::step called after terminal state");
  }
  Transition t;
  t.state = state_;
  t.action = action;
  t.next_state = frozenlake::next_state(state_, action);
  t.reward = (t.next_state == frozenlake::kGoal) ? 1.0 : 0.0;
  t.terminal = frozenlake::is_terminal(t.next_state);
  state_ = t.next_state;
  done_ = t.terminal;
  return t;
}

namespace cartpole {

Vec normalize_state(const State& s) {
  Vec out(4);
  for (int i = 0; i < 4; ++i) out[i] = s[i] / kStateScale[i];
  return out;
}

std::array<double, 2> accelerations(const State& s, double force_newtons) {
  const double theta = s[2];
  const double theta_dot = s[3];
  const double total_mass = kCartMass + kPoleMass;
  const double pole_mass_length = kPoleMass * kHalfLength;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp =
      (force_newtons + pole_mass_length * theta_dot * theta_dot * sin_t) /
      total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;
  return {x_acc, theta_acc};
}

}  // namespace cartpole

cartpole::State CartPoleEnv::reset(RngStream& rng) {
  for (double& c : state_) c = rng.next_uniform(-0.05, 0.05);
  step_count_ = 0;
  done_ = false;
  return state_;
}

void CartPoleEnv::set_state(const cartpole::State& s) {
  state_ = s;
  step_count_ = 0;
  done_ = false;
}

CartStepResult CartPoleEnv::step_discrete(int action) {
  if (action != 0 && action != 1) {
    throw std::invalid_argument("CartPoleEnv: discrete action must be 0 or 1");
  }
  return integrate(action == 1 ? cartpole::kForceMag : -cartpole::kForceMag);
}

CartStepResult CartPoleEnv::step_force(double action) {
  double a = action;
  if (a < -1.0) a = -1.0;
  if (a > 1.0) a = 1.0;
  return integrate(a * cartpole::kForceMag);
}

CartStepResult CartPoleEnv::integrate(double force_newtons) {
  using namespace cartpole;
  if (done_) {
    throw std::logic_error("CartPoleEnv::step called after episode end");
  }
  const auto [x_acc, theta_acc] = accelerations(state_, force_newtons);
  state_[0] += kDt * state_[1];
  state_[1] += kDt * x_acc;
  state_[2] += kDt * state_[3];
  state_[3] += kDt * theta_acc;
  for (double c : state_) {
    if (!std::isfinite(c)) {
      throw std::runtime_error("CartPoleEnv: non-finite state");
    }
  }
  ++step_count_;

  CartStepResult res;
  res.next_state = state_;
  res.reward = 1.0;
  res.terminal = std::abs(state_[0]) > kPositionBound ||
                 std::abs(state_[2]) > kAngleBoundRad;
  res.truncated = !res.terminal && step_count_ >= kMaxSteps;
  done_ = res.terminal || res.truncated;
  return res;
}

bool is_unsafe_frozenlake(int state) { return frozenlake::is_hole(state); }

bool is_unsafe_cartpole(const cartpole::State& s) {
  return std::abs(s[2]) > cartpole::kUnsafeAngleRad;
}

}  // namespace safeq
