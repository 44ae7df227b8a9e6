#include <doctest.h>

#include <cmath>

#include "rivalhmm/error.hpp"
#include "rivalhmm/synthetic.hpp"

using namespace rivalhmm;

TEST_CASE("zero noise reproduces the emission means exactly") {
  GeneratorSpec spec = default_generator_spec(25, 3);
  spec.stage1.reset();
  spec.params.sigma.setZero();
  spec.params.omega.setZero();
  const auto ds = generate_dataset(spec);
  for (Eigen::Index t = 0; t < 25; ++t) {
    const Eigen::Vector2d mean =
        spec.params.theta.transpose() * Eigen::Vector3d(1, spec.z[t], ds.truth[static_cast<std::size_t>(t)]);
    CHECK(ds.residuals.e1[t] == doctest::Approx(mean[0]).epsilon(1e-15));
    CHECK(ds.residuals.e2[t] == doctest::Approx(mean[1]).epsilon(1e-15));
  }
}

TEST_CASE("generation is seed-deterministic") {
  const auto a = generate_dataset(default_generator_spec(50, 9));
  const auto b = generate_dataset(default_generator_spec(50, 9));
  const auto c = generate_dataset(default_generator_spec(50, 10));
  CHECK(a.truth == b.truth);
  CHECK(*a.table == *b.table);
  CHECK(a.truth != c.truth);
}

TEST_CASE("generated table carries the truth in the competitor spend column") {
  const GeneratorSpec spec = default_generator_spec(80, 2);
  const auto ds = generate_dataset(spec);
  for (std::size_t t = 0; t < ds.truth.size(); ++t) CHECK(((*ds.table->spend_b_actual)[t] > 0) == (ds.truth[t] == 2));
}

TEST_CASE("lifting counts back with the true stage-1 coefficients recovers the residuals") {
  const GeneratorSpec spec = default_generator_spec(156, 4);
  const auto ds = generate_dataset(spec);
  const TransformedSeries data = transform_dataset(*ds.table);
  const Eigen::VectorXd e1 = residuals_for_coefficients(data, spec.stage1->focal, spec.stage1->focal_coefficients);
  const Eigen::VectorXd e2 =
      residuals_for_coefficients(data, spec.stage1->competitor, spec.stage1->competitor_coefficients);
  // Integer rounding of counts is the only loss.
  CHECK((e1 - ds.residuals.e1).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((e2 - ds.residuals.e2).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("specs round-trip through JSON and reject bad input") {
  const GeneratorSpec spec = default_generator_spec(30, 8);
  const GeneratorSpec back = GeneratorSpec::from_json(spec.to_json());
  CHECK(back.num_periods == 30);
  CHECK(back.params.P.isApprox(spec.params.P));
  CHECK(back.z.isApprox(spec.z));
  CHECK_THROWS_AS(GeneratorSpec::from_json({{"num_periods", 0}}), ConfigError);
  const HmmParams p = params_from_json(params_to_json(spec.params));
  CHECK(p.theta.isApprox(spec.params.theta));
}

TEST_CASE("the frozen state effect reproduces the target oracle accuracy") {
  GeneratorSpec spec = default_generator_spec(20000, 31);
  CHECK(spec.params.theta(2, 1) == kCalibratedCompetitorStateEffect);
  const double acc = oracle_classification_accuracy(spec);
  CHECK(acc >= 0.82);
  CHECK(acc <= 0.86);
}

TEST_CASE("enumeration guard and grid oracle normalization") {
  GeneratorSpec spec = default_generator_spec(21, 1);
  spec.stage1.reset();
  const auto ds = generate_dataset(spec);
  CHECK_THROWS(exact_state_posterior(ds.residuals, spec.z, spec.params));
  const GridDensity g = conditional_density_grid([](double x) { return -0.5 * x * x; }, -8, 8, 2048);
  CHECK(g.mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(g.cdf_at(0.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(g.cdf.back() == doctest::Approx(1.0).epsilon(1e-6));
}
