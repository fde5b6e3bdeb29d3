#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace rppo {

// Deterministic random stream. All stochastic behaviour in the project goes
// through this wrapper so that a (seed, stream) pair fully determines results
// regardless of scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; two uniforms per draw, no cached spare.
  double gaussian();

  Eigen::VectorXd gaussian_vector(int n);

  // Index i with probability weights[i] / sum(weights).
  int categorical(const Eigen::VectorXd& weights);

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// SplitMix64-style hash for deriving independent per-task seeds from a master
// seed; used for parallel episode collection.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace rppo
