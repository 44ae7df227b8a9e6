#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rivalhmm/dataset.hpp"
#include "rivalhmm/hmm.hpp"
#include "rivalhmm/stage1.hpp"

namespace rivalhmm {

/// Known stage-1 regressions used to lift residuals back to account counts.
struct Stage1Truth {
  RegressionSpec focal;
  RegressionSpec competitor;
  Eigen::VectorXd focal_coefficients;       // intercept first
  Eigen::VectorXd competitor_coefficients;  // intercept first
  std::vector<NamedColumn> covariates;
  std::vector<std::string> indicators;
};

struct GeneratorSpec {
  int num_periods = 156;
  HmmParams params;  // ground truth; sigma may be singular (zero noise)
  Eigen::VectorXd z;
  std::uint64_t seed = 1;
  std::optional<Stage1Truth> stage1;
  Date start_date{2006, 7, 1};
  /// Competitor spend recorded per unit of (x - 1) in the evaluation column.
  double competitor_spend_level = 100000.0;

  void validate() const;

  /// Missing fields fall back to default_generator_spec() for the given T.
  static GeneratorSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SyntheticDataset {
  ResidualPairs residuals;
  StatePath truth;
  std::optional<SeriesTable> table;
};

/// Chain from pin and P, residuals = theta'(1, z_t, x_t) + N(0, sigma).
/// With stage-1 truth, counts are exp(stage-1 mean + residual) rounded to
/// the nearest integer >= 1.
SyntheticDataset generate_dataset(const GeneratorSpec& spec);

/// Calibrated stand-in for the weekly bank data: case-study transition matrix
/// and error covariance, checking/MMDA-like stage-1 regressions, and a
/// competitor state effect tuned so oracle classification accuracy sits
/// near 84%.
GeneratorSpec default_generator_spec(int num_periods = 156, std::uint64_t seed = 1);

/// Frozen output of calibrate_state_effect for the default spec.
inline constexpr double kCalibratedCompetitorStateEffect = 0.180493;

/// Cutoff-0.5 accuracy of exact smoothed marginals (true parameters) on one
/// generated series.
double oracle_classification_accuracy(const GeneratorSpec& spec);

/// Bisection on beta2b so that oracle_classification_accuracy on a long
/// series of `num_periods` reaches `target_accuracy`.
double calibrate_state_effect(const GeneratorSpec& base, double target_accuracy, int num_periods,
                              std::uint64_t seed);

struct ExactPosterior {
  Eigen::MatrixXd marginals;  // T x K
  double loglik = 0.0;
};

/// Brute-force enumeration of all K^T paths. Guarded at 2^20 paths.
ExactPosterior exact_state_posterior(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params);

struct GridDensity {
  std::vector<double> x;
  std::vector<double> density;
  std::vector<double> cdf;

  double mean() const;
  /// Linear interpolation of the grid CDF.
  double cdf_at(double value) const;
};

/// Normalizes exp(log_density) on an even grid by the trapezoid rule.
GridDensity conditional_density_grid(const std::function<double(double)>& log_density, double lo, double hi,
                                     int points);

/// Sup-distance between the empirical CDF of `draws` and the grid CDF.
double ks_distance(std::vector<double> draws, const GridDensity& grid);

nlohmann::json params_to_json(const HmmParams& params);
HmmParams params_from_json(const nlohmann::json& j);

}  // namespace rivalhmm
