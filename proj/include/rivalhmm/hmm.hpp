#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rivalhmm/random.hpp"
#include "rivalhmm/stage1.hpp"

namespace rivalhmm {

/// Rows of theta: intercept, focal-spend slope, state slope.
/// Columns: focal residual e1, competitor residual e2.
using CoefMatrix = Eigen::Matrix<double, 3, 2>;

struct HmmParams {
  int num_states = 2;
  Eigen::VectorXd pin;  // initial state distribution
  Eigen::MatrixXd P;    // row-stochastic transitions
  CoefMatrix theta = CoefMatrix::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d omega = Eigen::Matrix2d::Identity();

  /// Throws NumericalError describing the first violated invariant.
  void validate() const;

  /// Set sigma and recompute omega = sigma^-1 (or the reverse).
  void set_sigma(const Eigen::Matrix2d& s);
  void set_omega(const Eigen::Matrix2d& o);

  static HmmParams uniform(int num_states);
};

/// Latent path with states coded 1..K; the code enters the emission mean as
/// its integer value.
using StatePath = std::vector<int>;

/// T x K matrix of bivariate normal log-densities of (e1_t, e2_t).
Eigen::MatrixXd emission_loglik_matrix(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params);

struct ForwardResult {
  Eigen::MatrixXd filtered;   // row t: p(x_t | e_1..t)
  Eigen::VectorXd log_norm;   // per-step log normalizers

  double loglik() const { return log_norm.sum(); }
};

ForwardResult forward_filter(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P);

/// log alpha_t(k) = log p(x_t = k, e_1..t), computed with log-sum-exp.
Eigen::MatrixXd forward_filter_log(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P);

/// One exact draw of x_1..x_T from the joint posterior.
StatePath backward_sample(const Eigen::MatrixXd& filtered, const Eigen::MatrixXd& P, Rng& rng);

double marginal_loglik(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P);

/// Smoothed marginals p(x_t | e_1..T) by a scaled backward pass.
Eigen::MatrixXd smoothed_marginals(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P);

/// log p(path) + sum_t log p(e_t | x_t): the joint log-density of the
/// observations and a given path.
double joint_log_density(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params,
                         const StatePath& path);

/// Stationary distribution of an irreducible P.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

}  // namespace rivalhmm
