#include <doctest.h>

#include <cmath>

#include "rivalhmm/random.hpp"

using namespace rivalhmm;

TEST_CASE("streams are reproducible and derived streams differ") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c0 = Rng::derive(123, 0), c1 = Rng::derive(123, 1);
  CHECK(c0.uniform() != c1.uniform());
}

TEST_CASE("gamma and chi-square moments") {
  Rng rng(8);
  for (double shape : {0.3, 1.0, 4.5}) {
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape, 2.0);
      s += g;
      s2 += g * g;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    CHECK(std::abs(mean - shape / 2.0) < 4 * std::sqrt(shape / 4.0 / n));
    CHECK(var == doctest::Approx(shape / 4.0).epsilon(0.05));
  }
}

TEST_CASE("categorical frequencies follow the weights") {
  Rng rng(17);
  Eigen::Vector3d w(1.0, 2.0, 7.0);
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) f[rng.categorical(w)] += 1.0;
  f /= n;
  for (int k = 0; k < 3; ++k) CHECK(std::abs(f[k] - w[k] / 10) < 0.006);
}

TEST_CASE("Wishart mean is df times the scale") {
  Rng rng(21);
  Eigen::Matrix2d v;
  v << 0.5, 0.1, 0.1, 0.2;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd w = rng.wishart(v, 6.0);
    CHECK_FALSE(std::abs(w(0, 1) - w(1, 0)) > 1e-14);
    acc += w;
  }
  acc /= n;
  CHECK((acc - 6.0 * v).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("Dirichlet draws lie on the simplex") {
  Rng rng(2);
  Eigen::VectorXd a(3);
  a << 0.5, 1.0, 2.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd d = rng.dirichlet(a);
    CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.minCoeff() >= 0.0);
  }
}
