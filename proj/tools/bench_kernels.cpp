// Times the OpenMP batch kernels against their serial references and reports
// the largest result difference alongside the speedup.

#include <chrono>
#include <cstdio>
#include <functional>

#include "rppo/diagnostics.hpp"
#include "rppo/envs.hpp"
#include "rppo/ot.hpp"
#include "rppo/parallel.hpp"
#include "rppo/surrogate.hpp"

using namespace rppo;

namespace {

double time_ms(const std::function<void()>& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, ms);
  }
  return best;
}

void report(const char* kernel, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-24s %10.2f %12.2f %8.2fx %12.3e\n", kernel, serial_ms, parallel_ms,
              serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", thread_count());
  std::printf("%-24s %10s %12s %8s %12s\n", "kernel", "serial_ms", "parallel_ms", "speedup",
              "max_diff");

  {
    Rng rng(7);
    const GmmParams old_policy = random_gmm(3, 2, 8, rng);
    const GmmParams new_policy = random_gmm(3, 2, 8, rng);
    const Batch batch = random_batch(old_policy, 20000, rng);

    double serial_value = 0.0, parallel_value = 0.0;
    const double t_serial = time_ms([&] {
      serial_value = ref::surrogate_value(new_policy, old_policy, batch);
    });
    const double t_parallel = time_ms([&] {
      parallel_value = surrogate_value(new_policy, old_policy, batch);
    });
    report("surrogate_value", t_serial, t_parallel, std::abs(serial_value - parallel_value));

    GmmTangent gs, gp;
    const double g_serial = time_ms([&] { gs = ref::surrogate_grad(new_policy, old_policy, batch); });
    const double g_parallel = time_ms([&] { gp = surrogate_grad(new_policy, old_policy, batch); });
    double diff = (gs.d_eta - gp.d_eta).norm();
    for (std::size_t i = 0; i < gs.d_components.size(); ++i) {
      diff = std::max(diff, (gs.d_components[i] - gp.d_components[i]).norm());
    }
    report("surrogate_grad", g_serial, g_parallel, diff);
  }

  {
    Rng rng(11);
    std::vector<DecodedGaussian> a, b;
    for (int i = 0; i < 16; ++i) a.push_back(random_gaussian(6, rng));
    for (int i = 0; i < 16; ++i) b.push_back(random_gaussian(6, rng));
    Matrix cs, cp;
    const double t_serial = time_ms([&] {
      for (int r = 0; r < 50; ++r) cs = ref::build_w2_cost(a, b);
    });
    const double t_parallel = time_ms([&] {
      for (int r = 0; r < 50; ++r) cp = build_w2_cost(a, b);
    });
    report("build_w2_cost x50", t_serial, t_parallel, (cs - cp).norm());
  }

  {
    Rng rng(13);
    const Env env = Env::make("pendulum");
    const GmmParams policy = random_gmm(3, 1, 5, rng);
    std::vector<Trajectory> ts, tp;
    const double t_serial = time_ms([&] { ts = ref::collect_rollouts(policy, env, 64, 123); });
    const double t_parallel = time_ms([&] { tp = collect_rollouts(policy, env, 64, 123); });
    double diff = 0.0;
    for (std::size_t e = 0; e < ts.size(); ++e) {
      diff = std::max(diff, std::abs(ts[e].total_reward - tp[e].total_reward));
    }
    report("collect_rollouts", t_serial, t_parallel, diff);
  }
  return 0;
}
