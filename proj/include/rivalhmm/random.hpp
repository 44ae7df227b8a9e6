#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace rivalhmm {

/// Seeded random stream. Streams for parallel chains are derived from a
/// master seed and a stream index, never shared.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for chain/sub-task `index` of master seed `seed`.
  static Rng derive(std::uint64_t seed, std::uint64_t index);

  double uniform();  // [0, 1)
  double normal();
  double gamma(double shape, double rate = 1.0);
  double chi_square(double df);

  /// Index in [0, weights.size()) with probability proportional to weights.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& weights);

  Eigen::VectorXd dirichlet(const Eigen::Ref<const Eigen::VectorXd>& alpha);

  /// Draw from the Wishart law with the given scale matrix V (mean df * V).
  Eigen::MatrixXd wishart(const Eigen::Ref<const Eigen::MatrixXd>& scale, double df);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace rivalhmm
