#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rivalhmm/dataset.hpp"

namespace rivalhmm {

/// One covariate-removal regression. The intercept is always included.
struct RegressionSpec {
  std::string response;
  std::vector<std::string> predictors;

  void validate() const;
};

/// Ordinary least-squares fit. Index 0 of coefficients/p_values is the
/// intercept; standardized_coefficients has one entry per predictor.
struct Stage1Fit {
  RegressionSpec spec;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standardized_coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd p_values;
  double r_square = 0.0;
  double sse = 0.0;
  double sst = 0.0;
  Eigen::VectorXd residuals;
};

/// Stage-two inputs: e1 (focal) and e2 (competitor), paired by period.
struct ResidualPairs {
  Eigen::VectorXd e1;
  Eigen::VectorXd e2;

  Eigen::Index size() const { return e1.size(); }
  ResidualPairs head(Eigen::Index n) const { return {e1.head(n), e2.head(n)}; }
};

Eigen::MatrixXd design_matrix(const TransformedSeries& data, const RegressionSpec& spec);

/// Least squares through a column-pivoted QR of the design matrix.
Stage1Fit fit_ols(const TransformedSeries& data, const RegressionSpec& spec);

ResidualPairs extract_residual_pairs(const Stage1Fit& fit_a, const Stage1Fit& fit_b);

/// Residuals of `spec` under fixed (e.g. known true) coefficients.
Eigen::VectorXd residuals_for_coefficients(const TransformedSeries& data, const RegressionSpec& spec,
                                           const Eigen::VectorXd& coefficients);

/// term,coefficient,standardized,p_value rows followed by an r_square row.
std::string fit_report_csv(const Stage1Fit& fit);

/// Focal response on seasonality + gift, competitor response on the market index.
RegressionSpec default_focal_spec();
RegressionSpec default_competitor_spec();

}  // namespace rivalhmm
