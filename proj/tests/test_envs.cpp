#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rppo/envs.hpp"
#include "rppo/errors.hpp"

using namespace rppo;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Single-component policy with a fixed action mean and tiny spread, for
// near-deterministic rollouts.
GmmParams constant_policy(int ds, double action_mean, double spread) {
  const int d = ds + 1;
  Matrix cov = Matrix::Identity(d, d);
  cov(ds, ds) = spread;
  Vector mu = Vector::Zero(d);
  mu[ds] = action_mean;
  return GmmParams(ds, 1, Vector::Zero(1),
                   {SpdMatrix(encode(DecodedGaussian{mu, SpdMatrix(cov, 0.0)}).mat(), 1e-9)}, 1e-9);
}

}  // namespace

TEST_CASE("pendulum step dynamics") {
  // Upright at rest with no torque stays put at zero reward.
  auto [s0, r0] = pendulum_step(vec2(0.0, 0.0), 0.0);
  CHECK(r0 == 0.0);
  CHECK(s0[0] == 0.0);
  CHECK(s0[1] == 0.0);

  // Hand-evaluated update from theta = pi/2.
  const double half_pi = std::numbers::pi / 2;
  auto [s1, r1] = pendulum_step(vec2(half_pi, 0.0), 0.0);
  CHECK(s1[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(s1[0] == doctest::Approx(half_pi + 0.0375).epsilon(1e-12));
  CHECK(r1 == doctest::Approx(-(half_pi * half_pi)).epsilon(1e-12));

  // Torque saturates at +-2 exactly.
  auto [sa, ra] = pendulum_step(vec2(1.0, 0.5), 5.0);
  auto [sb, rb] = pendulum_step(vec2(1.0, 0.5), 2.0);
  CHECK(sa[0] == sb[0]);
  CHECK(sa[1] == sb[1]);
  CHECK(ra == rb);

  CHECK_THROWS_AS(pendulum_step(vec2(0.0, 0.0), std::nan("")), InvalidInputError);
}

TEST_CASE("pendulum rewards are bounded below") {
  Rng rng(5);
  const double bound = -(std::numbers::pi * std::numbers::pi + 0.1 * 64.0 + 0.001 * 4.0);
  const Env env = Env::make("pendulum");
  Vector internal = env.reset(rng);
  for (int t = 0; t < 500; ++t) {
    Vector u(1);
    u << rng.uniform(-3.0, 3.0);
    auto [next, reward] = env.step(internal, u);
    CHECK(reward >= bound);
    internal = next;
  }
}

TEST_CASE("pointmass step dynamics") {
  auto [s0, r0] = pointmass_step(vec2(0.0, 0.0), 0.0);
  CHECK(r0 == 0.0);
  CHECK(s0.norm() == 0.0);

  auto [s1, r1] = pointmass_step(vec2(1.0, 0.0), -1.0);
  CHECK(s1[1] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(s1[0] == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(r1 == doctest::Approx(-1.01).epsilon(1e-15));

  // Two zero-force steps from (1, 1): x = 1 + 0.1 + 0.1 = 1.2 exactly.
  auto [sa, ra] = pointmass_step(vec2(1.0, 1.0), 0.0);
  auto [sb, rb] = pointmass_step(sa, 0.0);
  CHECK(sb[0] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(sb[1] == 1.0);
}

TEST_CASE("environment construction and observation sampling") {
  CHECK_THROWS_AS(Env::make("lunarlander"), ConfigError);
  const Env pend = Env::make("pendulum");
  CHECK(pend.spec().obs_dim == 3);
  CHECK(pend.spec().horizon == 200);
  const Env pm = Env::make("pointmass");
  CHECK(pm.spec().obs_dim == 2);
  CHECK(pm.spec().horizon == 100);

  Rng rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector obs = pend.sample_observation(rng);
    CHECK(obs[0] * obs[0] + obs[1] * obs[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(obs[2]) <= 8.0);
  }
}

TEST_CASE("rollout length, determinism, chaining") {
  const Env env = Env::make("pointmass");
  const GmmParams policy = constant_policy(2, 0.0, 0.25);

  Trajectory one = rollout(policy, env, 42);
  CHECK(one.steps.size() == 100);
  CHECK(one.steps.back().done);

  const Trajectory again = rollout(policy, env, 42);
  REQUIRE(again.steps.size() == one.steps.size());
  for (std::size_t t = 0; t < one.steps.size(); ++t) {
    CHECK((one.steps[t].state - again.steps[t].state).norm() == 0.0);
    CHECK((one.steps[t].action - again.steps[t].action).norm() == 0.0);
    CHECK(one.steps[t].reward == again.steps[t].reward);
  }
  for (std::size_t t = 0; t + 1 < one.steps.size(); ++t) {
    CHECK((one.steps[t].next_state - one.steps[t + 1].state).norm() == 0.0);
  }
  double total = 0.0;
  for (const auto& s : one.steps) total += s.reward;
  CHECK(one.total_reward == doctest::Approx(total).epsilon(1e-15));
}

TEST_CASE("near-deterministic policy tracks the mean rollout") {
  const Env env = Env::make("pointmass");
  const GmmParams policy = constant_policy(2, 0.4, 1e-9);
  const GmmConditioner cond(policy);
  const Trajectory traj = rollout(policy, env, 7);

  // Replay the environment applying the conditional mean directly.
  Rng rng(7);
  Vector internal = env.reset(rng);
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const Vector mean_action = cond.condition(env.observe(internal)).means[0];
    CHECK(std::abs(traj.steps[t].action[0] - mean_action[0]) <= 1e-3);
    auto [next, reward] = env.step(internal, mean_action);
    CHECK((traj.steps[t].state - env.observe(internal)).norm() <= 1e-3);
    internal = next;
  }
}

TEST_CASE("parallel episode collection equals the serial reference bitwise") {
  const Env env = Env::make("pendulum");
  const GmmParams policy = constant_policy(3, 0.0, 0.5);
  const auto par = collect_rollouts(policy, env, 12, 99);
  const auto ser = ref::collect_rollouts(policy, env, 12, 99);
  REQUIRE(par.size() == ser.size());
  for (std::size_t e = 0; e < par.size(); ++e) {
    REQUIRE(par[e].steps.size() == ser[e].steps.size());
    CHECK(par[e].total_reward == ser[e].total_reward);
    for (std::size_t t = 0; t < par[e].steps.size(); ++t) {
      CHECK((par[e].steps[t].state - ser[e].steps[t].state).norm() == 0.0);
      CHECK((par[e].steps[t].action - ser[e].steps[t].action).norm() == 0.0);
    }
  }
}
