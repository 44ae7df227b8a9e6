#include "rivalhmm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rivalhmm/gibbs.hpp"
#include "rivalhmm/synthetic.hpp"

namespace rivalhmm {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

ValidationCheck ffbs_check(const ValidationHooks& hooks) {
  ValidationCheck c{"ffbs_vs_enumeration", "per-period |freq - exact| <= max(0.01, 3 MC SE)", false, 0.0, ""};
  GeneratorSpec spec = default_generator_spec(10, hooks.seed);
  spec.stage1.reset();
  const SyntheticDataset data = generate_dataset(spec);
  const ExactPosterior exact = exact_state_posterior(data.residuals, spec.z, spec.params);
  const Eigen::MatrixXd ll = emission_loglik_matrix(data.residuals, spec.z, spec.params);
  const ForwardResult fwd = forward_filter(ll, spec.params.pin, spec.params.P);
  Rng rng = Rng::derive(hooks.seed, 1);
  Eigen::VectorXd active = Eigen::VectorXd::Zero(10);
  for (int d = 0; d < hooks.ffbs_draws; ++d) {
    const StatePath path = hooks.backward_sampler(fwd.filtered, spec.params.P, rng);
    for (int t = 0; t < 10; ++t) active[t] += path[static_cast<std::size_t>(t)] == 2 ? 1.0 : 0.0;
  }
  active /= hooks.ffbs_draws;
  c.passed = true;
  for (int t = 0; t < 10; ++t) {
    const double p = exact.marginals(t, 1);
    const double tol = std::max(0.01, 3.0 * std::sqrt(p * (1.0 - p) / hooks.ffbs_draws));
    const double dev = std::abs(active[t] - p);
    c.observed = std::max(c.observed, dev / tol);
    if (dev > tol) c.passed = false;
  }
  c.detail = fmt("worst deviation %.3f of tolerance", c.observed);
  return c;
}

ValidationCheck loglik_check(const ValidationHooks& hooks) {
  ValidationCheck c{"marginal_loglik_vs_enumeration", "|forward - exact| < 1e-8", true, 0.0, ""};
  Rng rng = Rng::derive(hooks.seed, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const HmmParams params = random_case_study_params(rng);
    ResidualPairs r{Eigen::VectorXd(8), Eigen::VectorXd(8)};
    Eigen::VectorXd z(8);
    for (int t = 0; t < 8; ++t) {
      z[t] = rng.uniform() * 0.6;
      r.e1[t] = 0.3 * rng.normal();
      r.e2[t] = 0.3 * rng.normal();
    }
    const double exact = exact_state_posterior(r, z, params).loglik;
    const double fwd = marginal_loglik(emission_loglik_matrix(r, z, params), params.pin, params.P);
    c.observed = std::max(c.observed, std::abs(exact - fwd));
  }
  c.passed = c.observed < 1e-8;
  c.detail = fmt("max abs difference %.3g", c.observed);
  return c;
}

ValidationCheck scaled_vs_log_check(const ValidationHooks& hooks) {
  ValidationCheck c{"scaled_vs_log_forward", "|log alpha difference| < 1e-9", true, 0.0, ""};
  Rng rng = Rng::derive(hooks.seed, 3);
  for (int rep = 0; rep < 20; ++rep) {
    const HmmParams params = random_case_study_params(rng);
    const int n = 156;
    ResidualPairs r{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    Eigen::VectorXd z(n);
    for (int t = 0; t < n; ++t) {
      z[t] = rng.uniform() * 0.6;
      r.e1[t] = 0.3 * rng.normal();
      r.e2[t] = 0.3 * rng.normal();
    }
    const Eigen::MatrixXd ll = emission_loglik_matrix(r, z, params);
    const ForwardResult fwd = forward_filter(ll, params.pin, params.P);
    const Eigen::MatrixXd log_alpha = forward_filter_log(ll, params.pin, params.P);
    double cum = 0.0;
    for (int t = 0; t < n; ++t) {
      cum += fwd.log_norm[t];
      for (int s = 0; s < 2; ++s) {
        if (fwd.filtered(t, s) <= 0.0) continue;
        c.observed = std::max(c.observed, std::abs(std::log(fwd.filtered(t, s)) + cum - log_alpha(t, s)));
      }
    }
  }
  c.passed = c.observed < 1e-9;
  c.detail = fmt("max abs difference %.3g", c.observed);
  return c;
}

// Largest |empirical - analytic| / SE over entries.
double worst_z(const Eigen::MatrixXd& empirical, const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& se) {
  return ((empirical - analytic).cwiseAbs().array() / se.array()).maxCoeff();
}

ValidationCheck dirichlet_check(const ValidationHooks& hooks) {
  ValidationCheck c{"dirichlet_row_mean", "|mean - (mix+counts)/sum| <= 3 MC SE", false, 0.0, ""};
  // Seven 1->1 transitions and one 1->2; no transitions out of state 2.
  const StatePath path{1, 1, 1, 1, 1, 1, 1, 1, 2};
  const PriorSpec priors;
  Rng rng = Rng::derive(hooks.seed, 4);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 2);
  for (int d = 0; d < hooks.moment_draws; ++d) sum += sample_transition_matrix(path, 2, priors, rng);
  const Eigen::MatrixXd mean = sum / hooks.moment_draws;
  Eigen::MatrixXd alpha(2, 2);
  alpha << 8.0, 2.0, 1.0, 1.0;
  Eigen::MatrixXd analytic(2, 2), se(2, 2);
  for (int j = 0; j < 2; ++j) {
    const double a0 = alpha.row(j).sum();
    for (int k = 0; k < 2; ++k) {
      analytic(j, k) = alpha(j, k) / a0;
      se(j, k) = std::sqrt(alpha(j, k) * (a0 - alpha(j, k)) / (a0 * a0 * (a0 + 1.0)) / hooks.moment_draws);
    }
  }
  c.observed = worst_z(mean, analytic, se);
  c.passed = c.observed <= 3.0;
  c.detail = fmt("worst entry %.2f MC SE", c.observed);
  return c;
}

ValidationCheck wishart_check(const ValidationHooks& hooks, bool with_data) {
  ValidationCheck c{with_data ? "wishart_posterior_mean" : "wishart_prior_mean",
                    with_data ? "|mean - (df+T)(R+S)^-1| <= 3 MC SE" : "|mean - df R^-1| <= 3 MC SE", false, 0.0, ""};
  const PriorSpec priors;
  ResidualPairs r;
  Eigen::VectorXd z;
  StatePath path;
  if (with_data) {
    r.e1 = (Eigen::VectorXd(5) << 0.4, -0.2, 0.1, 0.6, -0.3).finished();
    r.e2 = (Eigen::VectorXd(5) << -0.1, 0.5, 0.2, 0.3, -0.6).finished();
    z = Eigen::VectorXd::Zero(5);
    path.assign(5, 1);
  }
  const CoefMatrix theta = CoefMatrix::Zero();
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  for (Eigen::Index t = 0; t < r.size(); ++t) {
    const Eigen::Vector2d e(r.e1[t], r.e2[t]);
    s += e * e.transpose();
  }
  const double df = priors.wishart_df + static_cast<double>(r.size());
  const Eigen::Matrix2d v = (priors.wishart_r + s).inverse();
  Rng rng = Rng::derive(hooks.seed, with_data ? 6 : 5);
  Eigen::Matrix2d sum = Eigen::Matrix2d::Zero();
  for (int d = 0; d < hooks.moment_draws; ++d) sum += sample_precision(r, z, path, theta, priors, rng);
  Eigen::Matrix2d se;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) se(i, j) = std::sqrt(df * (v(i, j) * v(i, j) + v(i, i) * v(j, j)) / hooks.moment_draws);
  c.observed = worst_z(sum / hooks.moment_draws, df * v, se);
  c.passed = c.observed <= 3.0;
  c.detail = fmt("worst entry %.2f MC SE", c.observed);
  return c;
}

ValidationCheck gaussian_check(const ValidationHooks& hooks) {
  ValidationCheck c{"gaussian_coefficient_moments", "|mean - m| and |var - v| <= 3 MC SE", false, 0.0, ""};
  Rng data_rng = Rng::derive(hooks.seed, 7);
  const int n = 12;
  ResidualPairs r{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  Eigen::VectorXd z(n);
  StatePath path(n);
  for (int t = 0; t < n; ++t) {
    z[t] = data_rng.uniform() * 0.6;
    path[static_cast<std::size_t>(t)] = data_rng.uniform() < 0.5 ? 1 : 2;
    r.e1[t] = 0.2 * data_rng.normal() + 0.5 * z[t];
    r.e2[t] = 0.2 * data_rng.normal() + 0.1 * path[static_cast<std::size_t>(t)];
  }
  Eigen::Matrix2d omega;
  omega << 50.0, -8.0, -8.0, 20.0;
  PriorSpec priors;
  priors.coef_variance.setConstant(4.0);
  priors.coef_mean(1, 0) = 0.3;

  // Independent route: stacked regression [e1; e2] = (I2 (x) W) vec(theta) + noise
  // with noise precision omega (x) I_T.
  Eigen::MatrixXd w(n, 3);
  for (int t = 0; t < n; ++t) w.row(t) << 1.0, z[t], static_cast<double>(path[static_cast<std::size_t>(t)]);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2 * n, 6);
  x.topLeftCorner(n, 3) = w;
  x.bottomRightCorner(n, 3) = w;
  Eigen::VectorXd y(2 * n);
  y << r.e1, r.e2;
  Eigen::MatrixXd noise_prec(2 * n, 2 * n);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) noise_prec.block(a * n, b * n, n, n) = omega(a, b) * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd prior_prec(6), prior_mean(6);
  for (int i = 0; i < 6; ++i) {
    prior_prec[i] = 1.0 / priors.coef_variance(i % 3, i / 3);
    prior_mean[i] = priors.coef_mean(i % 3, i / 3);
  }
  const Eigen::MatrixXd q = x.transpose() * noise_prec * x + Eigen::MatrixXd(prior_prec.asDiagonal());
  const Eigen::MatrixXd cov = q.inverse();
  const Eigen::VectorXd m = cov * (x.transpose() * noise_prec * y + prior_prec.cwiseProduct(prior_mean));

  Rng rng = Rng::derive(hooks.seed, 8);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(6), sum_sq = Eigen::VectorXd::Zero(6);
  for (int d = 0; d < hooks.moment_draws; ++d) {
    const CoefMatrix theta = sample_coefficients(r, z, path, omega, priors, rng);
    const Eigen::Map<const Eigen::VectorXd> v(theta.data(), 6);
    sum += v;
    sum_sq += v.cwiseAbs2();
  }
  const double nd = hooks.moment_draws;
  const Eigen::VectorXd mean = sum / nd;
  const Eigen::VectorXd var = (sum_sq - nd * mean.cwiseAbs2()) / (nd - 1.0);
  const Eigen::VectorXd analytic_var = cov.diagonal();
  const Eigen::VectorXd mean_se = (analytic_var / nd).cwiseSqrt();
  const Eigen::VectorXd var_se = analytic_var * std::sqrt(2.0 / (nd - 1.0));
  c.observed = std::max(worst_z(mean, m, mean_se), worst_z(var, analytic_var, var_se));
  c.passed = c.observed <= 3.0;
  c.detail = fmt("worst entry %.2f MC SE", c.observed);
  return c;
}

ValidationCheck relabel_check(const ValidationHooks& hooks) {
  ValidationCheck c{"relabel_invariance", "|joint log-density change| < 1e-10 and swap twice = identity", true, 0.0, ""};
  Rng rng = Rng::derive(hooks.seed, 9);
  const int n = 20;
  bool involution = true;
  for (int rep = 0; rep < hooks.relabel_draws; ++rep) {
    HmmParams params = random_case_study_params(rng);
    params.theta(2, 1) = rng.normal() * 0.5;
    ResidualPairs r{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    Eigen::VectorXd z(n);
    StatePath path(n);
    for (int t = 0; t < n; ++t) {
      z[t] = rng.uniform() * 0.6;
      r.e1[t] = 0.3 * rng.normal();
      r.e2[t] = 0.3 * rng.normal();
      path[static_cast<std::size_t>(t)] = rng.uniform() < 0.5 ? 1 : 2;
    }
    const double before = joint_log_density(r, z, params, path);
    HmmParams p2 = params;
    StatePath x2 = path;
    relabel_draw(p2, x2);
    const double after = joint_log_density(r, z, p2, x2);
    c.observed = std::max(c.observed, std::abs(after - before));
    if (p2.theta(2, 1) < 0.0) involution = false;

    HmmParams p3 = params;
    StatePath x3 = path;
    swap_labels(p3, x3);
    swap_labels(p3, x3);
    if (x3 != path || !p3.P.isApprox(params.P, 0.0) || p3.pin != params.pin ||
        (p3.theta - params.theta).cwiseAbs().maxCoeff() > 1e-12) {
      involution = false;
    }
  }
  c.passed = c.observed < 1e-10 && involution;
  c.detail = fmt("max abs change %.3g", c.observed) + (involution ? "" : "; swap is not an involution");
  return c;
}

}  // namespace

HmmParams random_case_study_params(Rng& rng) {
  HmmParams p = HmmParams::uniform(2);
  p.pin = rng.dirichlet(Eigen::Vector2d(2.0, 2.0));
  p.P.row(0) = rng.dirichlet(Eigen::Vector2d(8.0, 1.0)).transpose();
  p.P.row(1) = rng.dirichlet(Eigen::Vector2d(1.0, 8.0)).transpose();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) p.theta(i, j) = 0.3 * rng.normal();
  const double s1 = 0.01 + 0.05 * rng.uniform();
  const double s2 = 0.02 + 0.08 * rng.uniform();
  const double rho = 0.6 * (2.0 * rng.uniform() - 1.0);
  Eigen::Matrix2d sigma;
  sigma << s1, rho * std::sqrt(s1 * s2), rho * std::sqrt(s1 * s2), s2;
  p.set_sigma(sigma);
  return p;
}

std::vector<ValidationCheck> run_validation_suite(const ValidationHooks& hooks) {
  return {ffbs_check(hooks),         loglik_check(hooks),         scaled_vs_log_check(hooks),
          dirichlet_check(hooks),    wishart_check(hooks, false), wishart_check(hooks, true),
          gaussian_check(hooks),     relabel_check(hooks)};
}

nlohmann::json validation_report_json(const std::vector<ValidationCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"tolerance", c.tolerance}, {"passed", c.passed}, {"observed", c.observed}, {"detail", c.detail}});
    all = all && c.passed;
  }
  return {{"all_passed", all}, {"checks", arr}};
}

}  // namespace rivalhmm
