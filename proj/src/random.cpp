#include "rivalhmm/random.hpp"

#include <cmath>

#include "rivalhmm/error.hpp"

namespace rivalhmm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  engine_.seed(seq);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(seed ^ splitmix64(index + 1)));
}

// The samplers below are written out instead of using <random> distributions
// so that streams are bit-identical across standard library implementations.

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Marsaglia polar method, one value per call.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw NumericalError("gamma draw requires positive shape and rate");
  }
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double Rng::chi_square(double df) { return 2.0 * gamma(0.5 * df, 1.0); }

int Rng::categorical(const Eigen::Ref<const Eigen::VectorXd>& weights) {
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericalError("categorical draw with non-positive total weight");
  }
  const double target = uniform() * total;
  double acc = 0.0;
  const int n = static_cast<int>(weights.size());
  for (int k = 0; k < n; ++k) {
    acc += weights[k];
    if (target < acc) return k;
  }
  // Rounding at the upper edge: last category with positive weight.
  for (int k = n - 1; k >= 0; --k) {
    if (weights[k] > 0.0) return k;
  }
  return n - 1;
}

Eigen::VectorXd Rng::dirichlet(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
  Eigen::VectorXd g(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) g[k] = gamma(alpha[k]);
  const double total = g.sum();
  if (!(total > 0.0)) throw NumericalError("dirichlet draw underflowed");
  return g / total;
}

Eigen::MatrixXd Rng::wishart(const Eigen::Ref<const Eigen::MatrixXd>& scale, double df) {
  const Eigen::Index p = scale.rows();
  if (df < static_cast<double>(p)) throw NumericalError("wishart degrees of freedom below dimension");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalError("wishart scale matrix is not positive definite");
  // Bartlett construction: W = L A A' L' with A lower triangular.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(chi_square(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal();
  }
  const Eigen::MatrixXd la = llt.matrixL() * a;
  Eigen::MatrixXd w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

}  // namespace rivalhmm
