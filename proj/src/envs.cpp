#include "rppo/envs.hpp"

#include <cmath>
#include <numbers>

#include "rppo/errors.hpp"
#include "rppo/parallel.hpp"

namespace rppo {

namespace {

constexpr double kPi = std::numbers::pi;

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

Vector make_vec(std::initializer_list<double> vals) {
  Vector v(static_cast<Eigen::Index>(vals.size()));
  int i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

}  // namespace

std::pair<Vector, double> pendulum_step(const Vector& state, double torque) {
  if (state.size() != 2 || !state.allFinite() || !std::isfinite(torque)) {
    throw InvalidInputError("pendulum_step: bad state or action");
  }
  const double theta = state[0];
  const double theta_dot = state[1];
  const double u = clamp(torque, -2.0, 2.0);
  const double reward =
      -(wrap_angle(theta) * wrap_angle(theta) + 0.1 * theta_dot * theta_dot + 0.001 * u * u);
  const double accel = 15.0 * std::sin(theta) + 3.0 * u;
  const double new_dot = clamp(theta_dot + 0.05 * accel, -8.0, 8.0);
  const double new_theta = theta + 0.05 * new_dot;
  Vector next(2);
  next << new_theta, new_dot;
  return {next, reward};
}

std::pair<Vector, double> pointmass_step(const Vector& state, double force) {
  if (state.size() != 2 || !state.allFinite() || !std::isfinite(force)) {
    throw InvalidInputError("pointmass_step: bad state or action");
  }
  const double x = state[0];
  const double v = state[1];
  const double a = clamp(force, -1.0, 1.0);
  const double reward = -(x * x + 0.1 * v * v + 0.01 * a * a);
  const double new_v = v + 0.1 * a;
  const double new_x = x + 0.1 * new_v;
  Vector next(2);
  next << new_x, new_v;
  return {next, reward};
}

Env Env::make(const std::string& name) {
  Env env;
  if (name == "pendulum") {
    env.kind_ = Kind::kPendulum;
    env.spec_ = EnvSpec{name,
                        3,
                        1,
                        make_vec({-2.0}),
                        make_vec({2.0}),
                        make_vec({-1.0, -1.0, -8.0}),
                        make_vec({1.0, 1.0, 8.0}),
                        200};
  } else if (name == "pointmass") {
    env.kind_ = Kind::kPointMass;
    env.spec_ = EnvSpec{name,
                        2,
                        1,
                        make_vec({-1.0}),
                        make_vec({1.0}),
                        make_vec({-1.0, -1.0}),
                        make_vec({1.0, 1.0}),
                        100};
  } else {
    throw ConfigError("unknown environment '" + name + "'");
  }
  return env;
}

Vector Env::reset(Rng& rng) const {
  Vector internal(2);
  if (kind_ == Kind::kPendulum) {
    internal[0] = rng.uniform(-kPi, kPi);
    internal[1] = rng.uniform(-1.0, 1.0);
  } else {
    internal[0] = rng.uniform(-1.0, 1.0);
    internal[1] = 0.0;
  }
  return internal;
}

std::pair<Vector, double> Env::step(const Vector& internal, const Vector& action) const {
  if (action.size() != spec_.action_dim) throw DimensionMismatchError("Env::step: action size");
  if (kind_ == Kind::kPendulum) return pendulum_step(internal, action[0]);
  return pointmass_step(internal, action[0]);
}

Vector Env::observe(const Vector& internal) const {
  if (kind_ == Kind::kPendulum) {
    Vector obs(3);
    obs << std::cos(internal[0]), std::sin(internal[0]), internal[1];
    return obs;
  }
  return internal;
}

Vector Env::sample_observation(Rng& rng) const {
  if (kind_ == Kind::kPendulum) {
    const double theta = rng.uniform(-kPi, kPi);
    Vector obs(3);
    obs << std::cos(theta), std::sin(theta), rng.uniform(spec_.obs_low[2], spec_.obs_high[2]);
    return obs;
  }
  Vector obs(spec_.obs_dim);
  for (int i = 0; i < spec_.obs_dim; ++i) obs[i] = rng.uniform(spec_.obs_low[i], spec_.obs_high[i]);
  return obs;
}

Trajectory rollout(const GmmConditioner& policy, const Env& env, std::uint64_t seed) {
  Rng rng(seed);
  const EnvSpec& spec = env.spec();
  Trajectory traj;
  traj.steps.reserve(spec.horizon);
  Vector internal = env.reset(rng);
  Vector obs = env.observe(internal);
  for (int t = 0; t < spec.horizon; ++t) {
    const ConditionalGmm cond = policy.condition(obs);
    // The recorded action is the policy's draw: importance weights must use
    // the density the action was actually sampled from. The step clamps to
    // the actuator bounds internally.
    Vector action = sample_action(cond, rng);
    auto [next_internal, reward] = env.step(internal, action);
    Vector next_obs = env.observe(next_internal);
    traj.steps.push_back(Transition{obs, action, reward, next_obs, t == spec.horizon - 1});
    traj.total_reward += reward;
    internal = std::move(next_internal);
    obs = std::move(next_obs);
  }
  return traj;
}

Trajectory rollout(const GmmParams& policy, const Env& env, std::uint64_t seed) {
  if (policy.state_dim() != env.spec().obs_dim || policy.action_dim() != env.spec().action_dim) {
    throw DimensionMismatchError("rollout: policy/env dimension mismatch");
  }
  return rollout(GmmConditioner(policy), env, seed);
}

std::vector<Trajectory> collect_rollouts(const GmmParams& policy, const Env& env, int episodes,
                                         std::uint64_t seed) {
  if (policy.state_dim() != env.spec().obs_dim || policy.action_dim() != env.spec().action_dim) {
    throw DimensionMismatchError("collect_rollouts: policy/env dimension mismatch");
  }
  const GmmConditioner cond(policy);
  std::vector<Trajectory> out(episodes);
  parallel_for(static_cast<std::size_t>(episodes), [&](std::size_t e) {
    out[e] = rollout(cond, env, derive_seed(seed, e));
  });
  return out;
}

std::vector<Trajectory> ref::collect_rollouts(const GmmParams& policy, const Env& env,
                                              int episodes, std::uint64_t seed) {
  const GmmConditioner cond(policy);
  std::vector<Trajectory> out(episodes);
  for (int e = 0; e < episodes; ++e) {
    out[e] = rollout(cond, env, derive_seed(seed, static_cast<std::uint64_t>(e)));
  }
  return out;
}

}  // namespace rppo
