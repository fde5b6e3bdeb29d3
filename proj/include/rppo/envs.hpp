#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rppo/gmm.hpp"
#include "rppo/rng.hpp"
#include "rppo/surrogate.hpp"

namespace rppo {

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_dim = 0;
  Vector action_low;
  Vector action_high;
  // Nominal observation ranges; used to spread initial policy components.
  Vector obs_low;
  Vector obs_high;
  int horizon = 0;
};

// Torque-limited pendulum, angle 0 upright. State (theta, theta_dot); reward
// on the incoming state, -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2).
std::pair<Vector, double> pendulum_step(const Vector& state, double torque);

// Double integrator on a line. State (x, v); reward on the incoming state,
// -(x^2 + 0.1 v^2 + 0.01 a^2).
std::pair<Vector, double> pointmass_step(const Vector& state, double force);

class Env {
 public:
  static Env make(const std::string& name);

  const EnvSpec& spec() const { return spec_; }

  Vector reset(Rng& rng) const;
  std::pair<Vector, double> step(const Vector& internal, const Vector& action) const;
  Vector observe(const Vector& internal) const;

  // Uniform draw from the reachable observation set (for the pendulum a box
  // draw would land off the cos/sin cylinder).
  Vector sample_observation(Rng& rng) const;

 private:
  enum class Kind { kPendulum, kPointMass };
  Kind kind_;
  EnvSpec spec_;
};

// One episode under the policy; actions sampled from the conditional mixture
// and clamped to the action bounds. The seed alone fixes the trajectory.
Trajectory rollout(const GmmConditioner& policy, const Env& env, std::uint64_t seed);
Trajectory rollout(const GmmParams& policy, const Env& env, std::uint64_t seed);

// Episodes run in parallel with per-episode derived seeds; the result is
// identical for any thread count.
std::vector<Trajectory> collect_rollouts(const GmmParams& policy, const Env& env, int episodes,
                                         std::uint64_t seed);

namespace ref {
std::vector<Trajectory> collect_rollouts(const GmmParams& policy, const Env& env, int episodes,
                                         std::uint64_t seed);
}  // namespace ref

}  // namespace rppo
