// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failures. Runs everything at full scale, so expect a few minutes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rppo/diagnostics.hpp"
#include "rppo/errors.hpp"
#include "rppo/gmm.hpp"
#include "rppo/ot.hpp"
#include "rppo/prox.hpp"
#include "rppo/trainer.hpp"

using namespace rppo;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------

void criterion_param_count() {
  const bool pass =
      param_count(4, 1, 5) == 104 && param_count(11, 3, 5) == 599 && param_count(17, 6, 2) == 599;
  std::ostringstream msg;
  msg << param_count(4, 1, 5) << ", " << param_count(11, 3, 5) << ", " << param_count(17, 6, 2);
  report(1, "parameter-count formula on the three reference rows", pass, msg.str());
}

void criterion_descent_and_step_bound() {
  const auto runs = quadratic_battery(10, 2024);
  bool descent = true, bound = true;
  for (const auto& run : runs) {
    descent = descent && check_descent(run.trace);
    bound = bound && check_step_bound(run.trace, run.f_star, run.lipschitz);
  }
  report(2, "per-step descent inequality on the quadratic battery", descent, "10 seeded instances");
  report(3, "accumulated step bound with the known optimum", bound, "10 seeded instances");
}

void criterion_gradients() {
  const CheckResult res = run_gradient_fd_suite(50, 515, false);
  report(4, "analytic gradients vs central finite differences", res.pass, res.detail);
}

void criterion_gaussian_w2() {
  bool pass = true;
  for (int d = 1; d <= 10; ++d) {
    DecodedGaussian a{Vector::Zero(d), SpdMatrix(Matrix::Identity(d, d), 0.0)};
    DecodedGaussian b{Vector::Zero(d), SpdMatrix(4.0 * Matrix::Identity(d, d), 0.0)};
    pass = pass && std::abs(w2_gaussian_sq(a, b) - d) <= 1e-8;
  }
  double worst_asym = 0.0;
  Rng rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 1 + static_cast<int>(rng.raw() % 4);
    const DecodedGaussian x = random_gaussian(d, rng);
    const DecodedGaussian y = random_gaussian(d, rng);
    worst_asym = std::max(worst_asym, std::abs(w2_gaussian_sq(x, y) - w2_gaussian_sq(y, x)));
  }
  pass = pass && worst_asym <= 1e-9;
  std::ostringstream msg;
  msg << "scaled-identity rows exact, max asymmetry " << worst_asym << " over 100 pairs";
  report(5, "closed-form Gaussian W2", pass, msg.str());
}

void criterion_transport_exactness() {
  const CheckResult res = run_transport_suite(50, 2077);
  report(6, "transport optimum vs exhaustive vertex enumeration", res.pass, res.detail);
}

void criterion_tv_bound() {
  const CheckResult res = run_tv_suite(100, 3001);
  report(7, "mixture TV bound dominates quadrature truth", res.pass, res.detail);
}

struct LearningOutcome {
  std::vector<TrainResult> pointmass;  // seeds 1..3
  std::vector<TrainResult> pendulum;   // seeds 1..3
  std::string first_csv_path;
  TrainConfig first_cfg;
};

LearningOutcome run_learning() {
  LearningOutcome out;
  const std::string base = "/tmp/rppo_acceptance";
  std::filesystem::remove_all(base);

  for (int seed = 1; seed <= 3; ++seed) {
    TrainConfig cfg;
    cfg.env = "pointmass";
    cfg.components = 2;
    cfg.outer_iters = 40;
    cfg.episodes_per_iter = 20;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.timing = false;
    cfg.out_dir = base + "/pointmass_seed" + std::to_string(seed);
    if (seed == 1) {
      out.first_csv_path = cfg.out_dir + "/metrics.csv";
      out.first_cfg = cfg;
    }
    std::fprintf(stderr, "  [acceptance] pointmass seed %d...\n", seed);
    out.pointmass.push_back(train(cfg));
  }
  for (int seed = 1; seed <= 3; ++seed) {
    TrainConfig cfg;
    cfg.env = "pendulum";
    cfg.components = 5;
    cfg.outer_iters = 100;
    cfg.episodes_per_iter = 20;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.timing = false;
    cfg.out_dir = base + "/pendulum_seed" + std::to_string(seed);
    std::fprintf(stderr, "  [acceptance] pendulum seed %d...\n", seed);
    out.pendulum.push_back(train(cfg));
  }
  return out;
}

double window_mean(const std::vector<TrainIterRow>& rows, std::size_t begin, std::size_t count) {
  double sum = 0.0;
  for (std::size_t i = begin; i < begin + count; ++i) sum += rows[i].mean_reward;
  return sum / static_cast<double>(count);
}

void criterion_guard(const LearningOutcome& outcome) {
  bool pass = true;
  long accepted = 0, rejected = 0;
  auto check_run = [&](const TrainResult& result) {
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      if (result.rows[i].accepted) {
        ++accepted;
        pass = pass && result.rows[i].objective <= 0.0;
      } else {
        ++rejected;
        const GmmParams& prev = result.policy_history[i];
        const GmmParams& cur = result.policy_history[i + 1];
        pass = pass && (cur.eta() - prev.eta()).norm() == 0.0;
        for (int c = 0; c < cur.components(); ++c) {
          pass = pass && (cur.component(c).mat() - prev.component(c).mat()).norm() == 0.0;
        }
      }
    }
  };
  for (const auto& r : outcome.pointmass) check_run(r);
  for (const auto& r : outcome.pendulum) check_run(r);
  std::ostringstream msg;
  msg << accepted << " accepted updates non-positive, " << rejected
      << " rejected iterations byte-identical";
  report(8, "acceptance guard across all training runs", pass, msg.str());
}

void criterion_learning(const LearningOutcome& outcome) {
  bool pointmass_pass = true;
  std::ostringstream pm_msg;
  for (std::size_t s = 0; s < outcome.pointmass.size(); ++s) {
    const auto& rows = outcome.pointmass[s].rows;
    const double first = window_mean(rows, 0, 5);
    const double last = window_mean(rows, rows.size() - 5, 5);
    pointmass_pass = pointmass_pass && last > first;
    pm_msg << (s ? "; " : "") << "seed " << s + 1 << ": " << first << " -> " << last;
  }

  int pendulum_passing = 0;
  std::ostringstream pd_msg;
  for (std::size_t s = 0; s < outcome.pendulum.size(); ++s) {
    const auto& rows = outcome.pendulum[s].rows;
    const double first = window_mean(rows, 0, 5);
    const double last = window_mean(rows, rows.size() - 5, 5);
    const double frac = (last - first) / (0.0 - first);
    const bool ok = frac >= 0.30;
    pendulum_passing += ok ? 1 : 0;
    pd_msg << (s ? "; " : "") << "seed " << s + 1 << ": " << static_cast<int>(100.0 * frac + 0.5)
           << "%";
  }
  const bool pendulum_pass = pendulum_passing >= 2;
  report(9, "learning at desk scale",
         pointmass_pass && pendulum_pass,
         "pointmass " + pm_msg.str() + " | pendulum improvement " + pd_msg.str() + " (need 30% on 2 of 3)");
}

void criterion_determinism(const LearningOutcome& outcome) {
  const std::string first = slurp(outcome.first_csv_path);
  TrainConfig cfg = outcome.first_cfg;
  cfg.out_dir = "/tmp/rppo_acceptance/pointmass_seed1_repeat";
  train(cfg);
  const std::string repeat = slurp(cfg.out_dir + "/metrics.csv");
  const bool pass = !first.empty() && first == repeat;
  std::ostringstream msg;
  msg << first.size() << " bytes" << (pass ? " identical" : " differ");
  report(10, "repeated seed gives a byte-identical metrics CSV", pass, msg.str());
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion_param_count();
  criterion_descent_and_step_bound();
  criterion_gradients();
  criterion_gaussian_w2();
  criterion_transport_exactness();
  criterion_tv_bound();

  const LearningOutcome outcome = run_learning();
  criterion_guard(outcome);
  criterion_learning(outcome);
  criterion_determinism(outcome);

  std::printf("%d criterion failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
