#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rppo/checkpoint.hpp"
#include "rppo/errors.hpp"
#include "rppo/ot.hpp"
#include "rppo/trainer.hpp"

using namespace rppo;

namespace {

TrainConfig micro_config() {
  TrainConfig cfg;
  cfg.env = "pointmass";
  cfg.components = 2;
  cfg.outer_iters = 3;
  cfg.episodes_per_iter = 4;
  cfg.inner_prox_iters = 5;
  cfg.seed = 11;
  cfg.timing = false;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
  const KvDocument kv = KvDocument::parse_text("env = pendulum\nK = 3\nseed = 9\n");
  const TrainConfig cfg = train_config_from_kv(kv);
  CHECK(cfg.env == "pendulum");
  CHECK(cfg.components == 3);
  CHECK(cfg.seed == 9);
  CHECK(cfg.gamma == doctest::Approx(0.99));
  CHECK(cfg.proximity == ProximityKind::kEuclidean);

  try {
    train_config_from_kv(KvDocument::parse_text("betta = 1.0\n"));
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("betta") != std::string::npos);
  }

  CHECK_THROWS_AS(train_config_from_kv(KvDocument::parse_text("gamma = 1.5\n")), ConfigError);
  CHECK_THROWS_AS(train_config_from_kv(KvDocument::parse_text("K = 0\n")), ConfigError);
}

TEST_CASE("zero outer iterations yields empty metrics and the initial policy") {
  TrainConfig cfg = micro_config();
  cfg.outer_iters = 0;
  cfg.out_dir = "/tmp/rppo_test_train0";
  std::filesystem::remove_all(cfg.out_dir);
  const TrainResult result = train(cfg);
  CHECK(result.rows.empty());
  CHECK(std::filesystem::exists(cfg.out_dir + "/checkpoint.txt"));
  const std::string csv = slurp(cfg.out_dir + "/metrics.csv");
  CHECK(csv == "iter,mean_reward,surrogate,phi,w2sq,descent_ok,seconds\n");
  // Checkpoint holds a usable policy of the configured shape.
  const GmmParams g = read_checkpoint(cfg.out_dir + "/checkpoint.txt");
  CHECK(g.components() == 2);
  CHECK(g.state_dim() == 2);
}

TEST_CASE("micro training run keeps every invariant") {
  const TrainResult result = train(micro_config());
  REQUIRE(result.rows.size() == 3);
  for (int i = 0; i < 3; ++i) {
    const TrainIterRow& row = result.rows[i];
    CHECK(row.iter == i);
    CHECK(std::isfinite(row.mean_reward));
    CHECK(std::isfinite(row.surrogate));
    CHECK(std::isfinite(row.phi));
    CHECK(row.w2_sq >= 0.0);
    CHECK(row.seconds == 0.0);
    if (row.accepted) {
      CHECK(row.objective < 0.0);
    } else {
      // Rejected iterations keep the previous policy verbatim.
      const GmmParams& cur = result.policy_history[i + 1];
      const GmmParams& prev = result.policy_history[i];
      for (int c = 0; c < cur.components(); ++c) {
        CHECK((cur.component(c).mat() - prev.component(c).mat()).norm() == 0.0);
      }
    }
  }
  CHECK(result.policy_history.size() == 4);  // initial plus one per iteration
  // Final policy passes the mixture invariants.
  const GmmParams& fin = result.final_policy;
  CHECK(fin.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fin.eta()[fin.components() - 1] == 0.0);
}

TEST_CASE("training runs are deterministic given the seed") {
  TrainConfig cfg = micro_config();
  cfg.out_dir = "/tmp/rppo_test_det_a";
  std::filesystem::remove_all(cfg.out_dir);
  train(cfg);
  const std::string a = slurp(cfg.out_dir + "/metrics.csv");

  cfg.out_dir = "/tmp/rppo_test_det_b";
  std::filesystem::remove_all(cfg.out_dir);
  train(cfg);
  const std::string b = slurp(cfg.out_dir + "/metrics.csv");
  CHECK(a == b);
  CHECK(a.find("iter,mean_reward") == 0);
}

TEST_CASE("both proximity kinds produce finite metrics") {
  for (ProximityKind kind : {ProximityKind::kEuclidean, ProximityKind::kWasserstein}) {
    TrainConfig cfg = micro_config();
    cfg.proximity = kind;
    const TrainResult result = train(cfg);
    for (const auto& row : result.rows) {
      CHECK(std::isfinite(row.mean_reward));
      CHECK(std::isfinite(row.surrogate));
      CHECK(std::isfinite(row.phi));
      CHECK(std::isfinite(row.w2_sq));
    }
  }
}

TEST_CASE("huge beta pins the accepted update to the old policy") {
  TrainConfig cfg = micro_config();
  cfg.beta = 1e9;
  cfg.outer_iters = 2;
  const TrainResult result = train(cfg);
  REQUIRE(result.policy_history.size() == 3);
  // The proximity term dominates, so any accepted step is microscopic.
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (!result.rows[i].accepted) continue;
    const GmmParams& prev = result.policy_history[i];
    const GmmParams& cur = result.policy_history[i + 1];
    for (int c = 0; c < cur.components(); ++c) {
      CHECK((cur.component(c).mat() - prev.component(c).mat()).norm() < 1e-3);
    }
  }
}

TEST_CASE("evaluate statistics") {
  const Env env = Env::make("pointmass");
  Rng rng(3);
  Vector lo(2), hi(2), alo(1), ahi(1);
  lo << -1.0, -1.0;
  hi << 1.0, 1.0;
  alo << -1.0;
  ahi << 1.0;
  const GmmParams policy = GmmParams::broad_init(2, 1, 2, lo, hi, alo, ahi, 1e-4, rng);

  const auto [m1, s1] = evaluate(policy, env, 1, 77);
  const Trajectory traj = rollout(policy, env, derive_seed(77, 0));
  CHECK(m1 == doctest::Approx(traj.total_reward).epsilon(1e-12));
  CHECK(s1 == 0.0);

  const auto [ma, sa] = evaluate(policy, env, 6, 123);
  const auto [mb, sb] = evaluate(policy, env, 6, 123);
  CHECK(ma == mb);
  CHECK(sa == sb);
}

TEST_CASE("a hand-built regulator scores well on pointmass") {
  // Conditional mean -2x - 2v with tiny spread: gains live in the
  // cross-covariance, conditional variance is the Schur complement.
  const Matrix sigma_ss = 0.25 * Matrix::Identity(2, 2);
  Vector gains(2);
  gains << -2.0, -2.0;
  Matrix cov(3, 3);
  cov.topLeftCorner(2, 2) = sigma_ss;
  cov.block(0, 2, 2, 1) = sigma_ss * gains;
  cov.block(2, 0, 1, 2) = (sigma_ss * gains).transpose();
  cov(2, 2) = gains.dot(sigma_ss * gains) + 1e-4;
  GmmParams policy(2, 1, Vector::Zero(1),
                   {SpdMatrix(encode(DecodedGaussian{Vector::Zero(3), SpdMatrix(cov, 0.0)}).mat(),
                              1e-8)},
                   1e-8);
  const Env env = Env::make("pointmass");
  const auto [mean, sd] = evaluate(policy, env, 10, 2025);
  CHECK(mean > -5.0);
}
