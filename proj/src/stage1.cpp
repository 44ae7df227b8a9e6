#include "rivalhmm/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "rivalhmm/error.hpp"
#include "rivalhmm/io.hpp"

namespace rivalhmm {

void RegressionSpec::validate() const {
  if (predictors.empty()) throw ConfigError("regression for '" + response + "' has no predictors");
  std::set<std::string> seen;
  for (const auto& p : predictors) {
    if (p == response) throw ConfigError("response '" + response + "' listed among its own predictors");
    if (!seen.insert(p).second) throw ConfigError("predictor '" + p + "' listed twice");
  }
}

Eigen::MatrixXd design_matrix(const TransformedSeries& data, const RegressionSpec& spec) {
  const Eigen::Index n = data.size();
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(spec.predictors.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < spec.predictors.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j) + 1) = data.column(spec.predictors[j]);
  }
  return x;
}

namespace {

double sample_sd(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

std::string term_name(const RegressionSpec& spec, Eigen::Index j) {
  return j == 0 ? "intercept" : spec.predictors[static_cast<std::size_t>(j - 1)];
}

}  // namespace

Stage1Fit fit_ols(const TransformedSeries& data, const RegressionSpec& spec) {
  spec.validate();
  const Eigen::VectorXd& y = data.column(spec.response);
  const Eigen::MatrixXd x = design_matrix(data, spec);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n <= p) {
    throw DataError("regression for '" + spec.response + "' needs more than " + std::to_string(p) + " rows, got " +
                    std::to_string(n));
  }

  // Scale columns to unit norm before the rank decision so that predictors
  // on very different scales (index levels vs. indicators) are treated alike.
  Eigen::VectorXd norms = x.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (norms[j] == 0.0) throw DataError("rank-deficient design: column '" + term_name(spec, j) + "' is all zero");
  }
  const Eigen::MatrixXd xs = x * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  qr.compute(xs);
  if (qr.rank() < p) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      if (!names.empty()) names += ", ";
      names += "'" + term_name(spec, perm[k]) + "'";
    }
    throw DataError("rank-deficient design for '" + spec.response + "': " + names + " collinear with other columns");
  }

  Stage1Fit fit;
  fit.spec = spec;
  fit.coefficients = qr.solve(y).cwiseQuotient(norms);
  fit.residuals = y - x * fit.coefficients;
  fit.sse = fit.residuals.squaredNorm();
  fit.sst = (y.array() - y.mean()).square().sum();
  fit.r_square = fit.sst > 0.0 ? 1.0 - fit.sse / fit.sst : 1.0;

  // Covariance of the scaled coefficients is s^2 (R'R)^-1 up to the pivot.
  const Eigen::Index dof = n - p;
  const double s2 = fit.sse / static_cast<double>(dof);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_perm = rinv * rinv.transpose();
  const auto& perm = qr.colsPermutation().indices();
  fit.std_errors.resize(p);
  fit.p_values.resize(p);
  const boost::math::students_t tdist(static_cast<double>(dof));
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::Index j = perm[k];
    fit.std_errors[j] = std::sqrt(s2 * cov_perm(k, k)) / norms[j];
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = fit.std_errors[j];
    if (se == 0.0) {
      fit.p_values[j] = fit.coefficients[j] == 0.0 ? 1.0 : 0.0;
    } else {
      const double t = std::abs(fit.coefficients[j] / se);
      fit.p_values[j] = 2.0 * boost::math::cdf(boost::math::complement(tdist, t));
    }
  }

  const double sd_y = sample_sd(y);
  fit.standardized_coefficients.resize(p - 1);
  for (Eigen::Index j = 1; j < p; ++j) {
    fit.standardized_coefficients[j - 1] = sd_y > 0.0 ? fit.coefficients[j] * sample_sd(x.col(j)) / sd_y : 0.0;
  }
  return fit;
}

ResidualPairs extract_residual_pairs(const Stage1Fit& fit_a, const Stage1Fit& fit_b) {
  if (fit_a.residuals.size() != fit_b.residuals.size()) {
    throw DataError("residual series lengths differ: " + std::to_string(fit_a.residuals.size()) + " vs " +
                    std::to_string(fit_b.residuals.size()));
  }
  return {fit_a.residuals, fit_b.residuals};
}

Eigen::VectorXd residuals_for_coefficients(const TransformedSeries& data, const RegressionSpec& spec,
                                           const Eigen::VectorXd& coefficients) {
  const Eigen::MatrixXd x = design_matrix(data, spec);
  if (coefficients.size() != x.cols()) throw ConfigError("coefficient count does not match regression spec");
  return data.column(spec.response) - x * coefficients;
}

std::string fit_report_csv(const Stage1Fit& fit) {
  std::string out = join_csv_row({"term", "coefficient", "standardized", "p_value"});
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    out += join_csv_row({term_name(fit.spec, j), format_double(fit.coefficients[j]),
                         j == 0 ? "" : format_double(fit.standardized_coefficients[j - 1]),
                         format_double(fit.p_values[j])});
  }
  out += join_csv_row({"r_square", format_double(fit.r_square), "", ""});
  return out;
}

RegressionSpec default_focal_spec() { return {"y1", {"seasonality", "gift"}}; }
RegressionSpec default_competitor_spec() { return {"y2", {"djia"}}; }

}  // namespace rivalhmm
