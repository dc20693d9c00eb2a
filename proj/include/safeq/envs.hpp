#ifndef SAFEQ_ENVS_HPP
#define SAFEQ_ENVS_HPP

#include <array>
#include <cstdint>

#include "safeq/core.hpp"
#include "safeq/rng.hpp"

namespace safeq {

// ---------------------------------------------------------------------------
// FrozenLake 4x4, deterministic (non-slippery) dynamics.
//
// Layout, row-major:       S F F F
//                          F H F H
//                          F F F H
//                          H F F G
// Start 0, goal 15, holes {5, 7, 11, 12}. Actions: left=0, down=1,
// right=2, up=3; moves off the grid edge stay in place. Reward +1 on
// reaching the goal, 0 otherwise; holes and goal are terminal.
// ---------------------------------------------------------------------------

namespace frozenlake {

inline constexpr int kNumStates = 16;
inline constexpr int kNumActions = 4;
inline constexpr int kStart = 0;
inline constexpr int kGoal = 15;
inline constexpr std::array<int, 4> kHoles = {5, 7, 11, 12};

inline constexpr int kLeft = 0;
inline constexpr int kDown = 1;
inline constexpr int kRight = 2;
inline constexpr int kUp = 3;

bool is_hole(int state);
bool is_terminal(int state);

// Deterministic successor of (state, action); edge moves stay in place.
int next_state(int state, int action);

}  // namespace frozenlake

class FrozenLakeEnv {
 public:
  FrozenLakeEnv() = default;

  int reset();
  int state() const { return state_; }
  bool done() const { return done_; }

  // Throws std::logic_error when called after a terminal step.
  Transition step(int action);

 private:
  int state_ = frozenlake::kStart;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Cart-pole, explicit-Euler integration of the standard cart-mounted
// inverted pendulum. Reference constants: gravity 9.8, cart mass 1.0,
// pole mass 0.1, pole half-length 0.5, force magnitude 10.0, step 0.02 s,
// position bound 2.4 m, angle bound 12 deg. An episode terminates when a
// bound is violated; the 500-step cutoff is truncation, not termination,
// so the bootstrapping indicator stays 1 there.
// ---------------------------------------------------------------------------

namespace cartpole {

inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kForceMag = 10.0;
inline constexpr double kDt = 0.02;
inline constexpr double kPositionBound = 2.4;
inline constexpr double kAngleBoundRad = 12.0 * 3.14159265358979323846 / 180.0;
inline constexpr double kUnsafeAngleRad = 9.0 * 3.14159265358979323846 / 180.0;
inline constexpr int kMaxSteps = 500;

using State = std::array<double, 4>;  // x, x_dot, theta, theta_dot

// Per-coordinate scales mapping raw states to roughly unit range over the
// reachable safe region; network inputs use the normalized coordinates.
inline constexpr State kStateScale = {2.4, 2.0, kAngleBoundRad, 2.0};

Vec normalize_state(const State& s);

// Accelerations (x_ddot, theta_ddot) for the given state and force in
// newtons; pure function of its arguments.
std::array<double, 2> accelerations(const State& s, double force_newtons);

}  // namespace cartpole

struct CartStepResult {
  cartpole::State next_state;
  double reward = 1.0;
  bool terminal = false;   // bound violation
  bool truncated = false;  // 500-step cutoff
};

class CartPoleEnv {
 public:
  CartPoleEnv() = default;

  // Each coordinate uniform in [-0.05, 0.05].
  cartpole::State reset(RngStream& rng);

  // Restarts the episode from an explicit state.
  void set_state(const cartpole::State& s);

  const cartpole::State& state() const { return state_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }

  // action in {0 (left), 1 (right)}: applies -/+ full force magnitude.
  CartStepResult step_discrete(int action);

  // action clipped to (-1, 1), scaled by the force magnitude.
  CartStepResult step_force(double action);

 private:
  CartStepResult integrate(double force_newtons);

  cartpole::State state_{};
  int step_count_ = 0;
  bool done_ = false;
};

// Safe-set predicates: FrozenLake hole cells; cart-pole |theta| > 9 deg.
bool is_unsafe_frozenlake(int state);
bool is_unsafe_cartpole(const cartpole::State& s);

}  // namespace safeq

#endif  // SAFEQ_ENVS_HPP
