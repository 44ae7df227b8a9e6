#include <doctest.h>

#include <cmath>

#include "rivalhmm/error.hpp"
#include "rivalhmm/gibbs.hpp"
#include "rivalhmm/posterior.hpp"
#include "rivalhmm/synthetic.hpp"
#include "rivalhmm/validation.hpp"

using namespace rivalhmm;

namespace {

SyntheticDataset strong_instance(std::uint64_t seed, int T, double effect) {
  GeneratorSpec spec = default_generator_spec(T, seed);
  spec.stage1.reset();
  spec.params.theta(2, 1) = effect;
  return generate_dataset(spec);
}

GibbsConfig short_config(std::uint64_t seed) {
  GibbsConfig c;
  c.burn_in = 300;
  c.kept_draws = 2000;
  c.seed = seed;
  return c;
}

double log_bvn(const Eigen::Vector2d& e, const Eigen::Matrix2d& omega) {
  return -std::log(2 * M_PI) + 0.5 * std::log(omega.determinant()) - 0.5 * e.dot(omega * e);
}

}  // namespace

TEST_CASE("chain initialization follows the prior means") {
  Rng rng(1);
  const ChainState s = init_chain_state(PriorSpec{}, GibbsConfig{}, 50, rng);
  CHECK(s.params.omega.isApprox(4.0 * Eigen::Matrix2d::Identity()));
  CHECK(s.params.P.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.5)));
  CHECK(s.params.pin.isApprox(Eigen::VectorXd::Constant(2, 0.5)));
  CHECK(s.params.theta.isZero());
  CHECK(s.path.size() == 50);
  Rng again(1);
  CHECK(init_chain_state(PriorSpec{}, GibbsConfig{}, 50, again).path == s.path);
}

TEST_CASE("config and prior validation") {
  GibbsConfig c;
  c.kept_draws = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  PriorSpec p;
  p.wishart_df = 2.0;
  CHECK_THROWS_AS(p.validate(2), ConfigError);
  PriorSpec q;
  q.mix = Eigen::Vector2d(1.0, 0.0);
  CHECK_THROWS_AS(q.validate(2), ConfigError);
  const PriorSpec r = PriorSpec::from_json(PriorSpec{}.to_json());
  CHECK(r.coef_variance.isApprox(PriorSpec{}.coef_variance));
  CHECK(GibbsConfig::from_json(GibbsConfig{}.to_json()).seed == GibbsConfig{}.seed);
}

TEST_CASE("relabeling examples") {
  HmmParams p = HmmParams::uniform(2);
  p.theta(2, 1) = 0.3;
  StatePath x{1, 2, 2};
  CHECK_FALSE(relabel_draw(p, x));
  CHECK(x == StatePath{1, 2, 2});

  p.theta(0, 1) = 1.0;
  p.theta(2, 1) = -0.4;
  p.P << 0.9, 0.1, 0.3, 0.7;
  p.pin << 0.2, 0.8;
  CHECK(relabel_draw(p, x));
  CHECK(p.theta(2, 1) == doctest::Approx(0.4));
  CHECK(p.theta(0, 1) == doctest::Approx(-0.2));
  CHECK(x == StatePath{2, 1, 1});
  CHECK(p.P(0, 0) == 0.7);
  CHECK(p.P(0, 1) == 0.3);
  CHECK(p.pin[0] == 0.8);
}

TEST_CASE("label swap preserves every emission mean and is an involution") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    HmmParams p = random_case_study_params(rng);
    StatePath x(12);
    for (auto& v : x) v = 1 + rng.categorical(Eigen::Vector2d(1, 1));
    const HmmParams p0 = p;
    const StatePath x0 = x;
    swap_labels(p, x);
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double z = 0.1 * static_cast<double>(t);
      const Eigen::Vector2d before = p0.theta.transpose() * Eigen::Vector3d(1, z, x0[t]);
      const Eigen::Vector2d after = p.theta.transpose() * Eigen::Vector3d(1, z, x[t]);
      CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
    }
    swap_labels(p, x);
    CHECK(x == x0);
    CHECK((p.theta - p0.theta).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(p.P == p0.P);
  }
}

TEST_CASE("with no data the coefficient and precision draws follow the prior") {
  Rng rng(10);
  const ResidualPairs empty{Eigen::VectorXd(0), Eigen::VectorXd(0)};
  const Eigen::VectorXd z(0);
  const StatePath path;
  PriorSpec prior;
  const int n = 100000;
  std::vector<double> b;
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    b.push_back(sample_coefficients(empty, z, path, Eigen::Matrix2d::Identity(), prior, rng)(1, 0));
    acc += sample_precision(empty, z, path, CoefMatrix::Zero(), prior, rng);
  }
  const SummaryRow s = summarize_values("b", b);
  CHECK(std::abs(s.mean) < 3 * 1000.0 / std::sqrt(n));
  CHECK(s.sd * s.sd == doctest::Approx(1e6).epsilon(0.02));
  CHECK(((acc / n) - 4.0 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 0.05);

  PriorSpec tight;
  tight.coef_variance = CoefMatrix::Constant(1e-12);
  const auto inst = strong_instance(2, 40, 0.5);
  StatePath truth = inst.truth;
  const CoefMatrix t = sample_coefficients(inst.residuals, default_generator_spec(40, 2).z, truth,
                                           Eigen::Matrix2d::Identity(), tight, rng);
  CHECK(t.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("transition rows match the Beta conditional by KS distance") {
  StatePath path{1, 1, 2, 2, 2, 1, 1, 1, 2, 2, 1, 2, 2, 2, 2};
  int n11 = 0, n12 = 0;
  for (std::size_t t = 1; t < path.size(); ++t) {
    if (path[t - 1] == 1) (path[t] == 1 ? n11 : n12)++;
  }
  const double a = 1 + n11, b = 1 + n12;
  const GridDensity grid = conditional_density_grid(
      [&](double p) { return (a - 1) * std::log(p) + (b - 1) * std::log1p(-p); }, 1e-9, 1 - 1e-9, 4096);
  Rng rng(12);
  std::vector<double> draws;
  for (int i = 0; i < 20000; ++i) draws.push_back(sample_transition_matrix(path, 2, PriorSpec{}, rng)(0, 0));
  CHECK(ks_distance(draws, grid) < 1.36 / std::sqrt(20000.0) * 1.2);
}

TEST_CASE("a single coefficient matches its grid conditional by KS distance") {
  const auto inst = strong_instance(3, 30, 0.4);
  const Eigen::VectorXd z = default_generator_spec(30, 3).z;
  const Eigen::Matrix2d omega = default_generator_spec(30, 3).params.omega;
  CoefMatrix fixed = default_generator_spec(30, 3).params.theta;
  fixed(2, 1) = 0.4;
  PriorSpec prior;
  prior.coef_mean = fixed;
  prior.coef_variance = CoefMatrix::Constant(1e-14);
  prior.coef_mean(1, 0) = 0.0;
  prior.coef_variance(1, 0) = 4.0;

  auto log_density = [&](double b) {
    CoefMatrix th = fixed;
    th(1, 0) = b;
    double lp = -0.5 * b * b / 4.0;
    for (Eigen::Index t = 0; t < z.size(); ++t) {
      const Eigen::Vector3d w(1, z[t], inst.truth[static_cast<std::size_t>(t)]);
      lp += log_bvn(Eigen::Vector2d(inst.residuals.e1[t], inst.residuals.e2[t]) - th.transpose() * w, omega);
    }
    return lp;
  };
  const double centre = 1.266;
  const GridDensity grid = conditional_density_grid(log_density, centre - 3.0, centre + 3.0, 8192);
  Rng rng(13);
  std::vector<double> draws;
  for (int i = 0; i < 20000; ++i) {
    draws.push_back(sample_coefficients(inst.residuals, z, inst.truth, omega, prior, rng)(1, 0));
  }
  CHECK(ks_distance(draws, grid) < 1.36 / std::sqrt(20000.0) * 1.2);
}

TEST_CASE("identical seeds give bit-identical chains") {
  const auto inst = strong_instance(5, 60, 0.6);
  const Eigen::VectorXd z = default_generator_spec(60, 5).z;
  GibbsConfig c = short_config(77);
  c.kept_draws = 200;
  Rng r1(77), r2(77);
  const auto a = run_chain(inst.residuals, z, PriorSpec{}, c, r1);
  const auto b = run_chain(inst.residuals, z, PriorSpec{}, c, r2);
  REQUIRE(a.draws.size() == 200);
  for (std::size_t i = 0; i < a.draws.size(); ++i) {
    REQUIRE(a.draws[i].path == b.draws[i].path);
    REQUIRE(a.draws[i].params.theta == b.draws[i].params.theta);
    REQUIRE(a.draws[i].params.omega == b.draws[i].params.omega);
  }
  c.thin = 3;
  Rng r3(77);
  CHECK(run_chain(inst.residuals, z, PriorSpec{}, c, r3).draws.size() == 200);
}

TEST_CASE("retained draws respect the invariants and the identification rule") {
  const auto inst = strong_instance(6, 80, 0.8);
  const Eigen::VectorXd z = default_generator_spec(80, 6).z;
  Rng rng(6);
  const auto s = run_chain(inst.residuals, z, PriorSpec{}, short_config(6), rng);
  for (const auto& d : s.draws) {
    REQUIRE(d.params.theta(2, 1) >= 0.0);
    REQUIRE_NOTHROW(d.params.validate());
    const Eigen::MatrixXd ll = emission_loglik_matrix(inst.residuals, z, d.params);
    REQUIRE(std::isfinite(marginal_loglik(ll, d.params.pin, d.params.P)));
  }
}

TEST_CASE("chains with different seeds agree on transition probabilities") {
  const auto inst = strong_instance(8, 156, 0.8);
  const Eigen::VectorXd z = default_generator_spec(156, 8).z;
  GibbsConfig c = short_config(100);
  c.num_chains = 2;
  const auto chains = run_chains(inst.residuals, z, PriorSpec{}, c);
  REQUIRE(chains.size() == 2);
  for (const char* node : {"P[1,1]", "P[2,2]"}) {
    const auto a = extract_node(chains[0], node);
    const auto b = extract_node(chains[1], node);
    const double ma = summarize_values(node, a).mean, mb = summarize_values(node, b).mean;
    const double se = std::max(mc_standard_error(a), mc_standard_error(b));
    CHECK_MESSAGE(std::abs(ma - mb) < 4 * se, node);
  }
}

TEST_CASE("a clearly separated synthetic instance is recovered") {
  const auto inst = strong_instance(11, 156, 1.0);
  const GeneratorSpec spec = default_generator_spec(156, 11);
  Rng rng(11);
  const auto s = run_chain(inst.residuals, spec.z, PriorSpec{}, short_config(11), rng);
  const auto profile = state_activity_means(s);
  int correct = 0;
  for (std::size_t t = 0; t < inst.truth.size(); ++t) correct += (profile.prob_active[t] >= 0.5) == (inst.truth[t] == 2);
  CHECK(correct >= 140);
  const SummaryRow p22 = summarize_values("P[2,2]", extract_node(s, "P[2,2]"));
  CHECK(p22.q2_5 <= spec.params.P(1, 1));
  CHECK(spec.params.P(1, 1) <= p22.q97_5);
}

TEST_CASE("reduced model keeps the state slopes at zero") {
  const auto inst = strong_instance(12, 50, 0.5);
  GibbsConfig c = short_config(12);
  c.latent_states = false;
  c.kept_draws = 100;
  Rng rng(12);
  const auto s = run_chain(inst.residuals, default_generator_spec(50, 12).z, PriorSpec{}, c, rng);
  for (const auto& d : s.draws) {
    REQUIRE(d.params.theta(2, 0) == 0.0);
    REQUIRE(d.params.theta(2, 1) == 0.0);
  }
}
