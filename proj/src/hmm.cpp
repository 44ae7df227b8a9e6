#include "rivalhmm/hmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rivalhmm/error.hpp"

namespace rivalhmm {

namespace {

constexpr double kSimplexTol = 1e-12;

void check_stochastic_inputs(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P) {
  const Eigen::Index k = loglik.cols();
  if (pin.size() != k || P.rows() != k || P.cols() != k) {
    throw NumericalError("state dimension mismatch between likelihoods, pin and P");
  }
}

}  // namespace

void HmmParams::validate() const {
  const Eigen::Index k = num_states;
  if (num_states < 1) throw NumericalError("num_states must be positive");
  if (pin.size() != k) throw NumericalError("pin has wrong length");
  if (P.rows() != k || P.cols() != k) throw NumericalError("P has wrong shape");
  if ((pin.array() < 0.0).any() || std::abs(pin.sum() - 1.0) > kSimplexTol) {
    throw NumericalError("pin is not a probability vector");
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    if ((P.row(j).array() < 0.0).any() || std::abs(P.row(j).sum() - 1.0) > kSimplexTol) {
      throw NumericalError("row " + std::to_string(j + 1) + " of P is not a probability vector");
    }
  }
  if (!theta.allFinite()) throw NumericalError("theta has non-finite entries");
  if (std::abs(sigma(0, 1) - sigma(1, 0)) > 1e-12 * sigma.cwiseAbs().maxCoeff()) {
    throw NumericalError("sigma is not symmetric");
  }
  Eigen::LLT<Eigen::Matrix2d> llt(sigma);
  if (llt.info() != Eigen::Success || !(sigma.determinant() > 0.0)) throw NumericalError("sigma is not positive definite");
  if (!(omega * sigma).isApprox(Eigen::Matrix2d::Identity(), 1e-8)) throw NumericalError("omega is not the inverse of sigma");
}

void HmmParams::set_sigma(const Eigen::Matrix2d& s) {
  sigma = 0.5 * (s + s.transpose());
  omega = sigma.inverse();
  omega = 0.5 * (omega + omega.transpose()).eval();
}

void HmmParams::set_omega(const Eigen::Matrix2d& o) {
  omega = 0.5 * (o + o.transpose());
  sigma = omega.inverse();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
}

HmmParams HmmParams::uniform(int num_states) {
  HmmParams p;
  p.num_states = num_states;
  p.pin = Eigen::VectorXd::Constant(num_states, 1.0 / num_states);
  p.P = Eigen::MatrixXd::Constant(num_states, num_states, 1.0 / num_states);
  return p;
}

Eigen::MatrixXd emission_loglik_matrix(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params) {
  const Eigen::Index n = residuals.size();
  if (residuals.e2.size() != n || z.size() != n) throw DataError("residual and spend series lengths differ");
  Eigen::LLT<Eigen::Matrix2d> llt(params.sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("sigma is not positive definite");
  const Eigen::Matrix2d l = llt.matrixL();
  if (!(l(0, 0) > 0.0) || !(l(1, 1) > 0.0)) throw NumericalError("sigma is not positive definite");
  const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)));
  const double constant = -std::log(2.0 * std::numbers::pi) - 0.5 * log_det;

  const int k = params.num_states;
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int s = 0; s < k; ++s) {
      const Eigen::Vector3d w(1.0, z[t], static_cast<double>(s + 1));
      const Eigen::Vector2d mean = params.theta.transpose() * w;
      const Eigen::Vector2d dev(residuals.e1[t] - mean[0], residuals.e2[t] - mean[1]);
      const Eigen::Vector2d u = llt.matrixL().solve(dev);
      out(t, s) = constant - 0.5 * u.squaredNorm();
    }
  }
  return out;
}

ForwardResult forward_filter(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P) {
  check_stochastic_inputs(loglik, pin, P);
  const Eigen::Index n = loglik.rows();
  const Eigen::Index k = loglik.cols();
  ForwardResult out;
  out.filtered.resize(n, k);
  out.log_norm.resize(n);
  Eigen::RowVectorXd predicted = pin.transpose();
  for (Eigen::Index t = 0; t < n; ++t) {
    if (t > 0) predicted = out.filtered.row(t - 1) * P;
    const double shift = loglik.row(t).maxCoeff();
    if (!std::isfinite(shift)) throw NumericalError("non-finite emission log-likelihood at period " + std::to_string(t + 1));
    Eigen::RowVectorXd a = predicted.array() * (loglik.row(t).array() - shift).exp();
    const double c = a.sum();
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw NumericalError("forward filter collapsed at period " + std::to_string(t + 1));
    }
    out.filtered.row(t) = a / c;
    out.log_norm[t] = std::log(c) + shift;
  }
  return out;
}

namespace {

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

Eigen::MatrixXd forward_filter_log(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P) {
  check_stochastic_inputs(loglik, pin, P);
  const Eigen::Index n = loglik.rows();
  const Eigen::Index k = loglik.cols();
  const Eigen::MatrixXd log_p = P.array().log();
  Eigen::MatrixXd alpha(n, k);
  for (Eigen::Index s = 0; s < k; ++s) alpha(0, s) = std::log(pin[s]) + loglik(0, s);
  Eigen::VectorXd terms(k);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index s = 0; s < k; ++s) {
      for (Eigen::Index r = 0; r < k; ++r) terms[r] = alpha(t - 1, r) + log_p(r, s);
      alpha(t, s) = log_sum_exp(terms) + loglik(t, s);
    }
  }
  return alpha;
}

StatePath backward_sample(const Eigen::MatrixXd& filtered, const Eigen::MatrixXd& P, Rng& rng) {
  const Eigen::Index n = filtered.rows();
  StatePath path(static_cast<std::size_t>(n));
  if (n == 0) return path;
  int next = rng.categorical(filtered.row(n - 1).transpose());
  path[static_cast<std::size_t>(n - 1)] = next + 1;
  Eigen::VectorXd w(filtered.cols());
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    w = filtered.row(t).transpose().cwiseProduct(P.col(next));
    next = rng.categorical(w);
    path[static_cast<std::size_t>(t)] = next + 1;
  }
  return path;
}

double marginal_loglik(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P) {
  return forward_filter(loglik, pin, P).loglik();
}

Eigen::MatrixXd smoothed_marginals(const Eigen::MatrixXd& loglik, const Eigen::VectorXd& pin, const Eigen::MatrixXd& P) {
  const ForwardResult fwd = forward_filter(loglik, pin, P);
  const Eigen::Index n = loglik.rows();
  const Eigen::Index k = loglik.cols();
  Eigen::MatrixXd smoothed(n, k);
  if (n == 0) return smoothed;
  smoothed.row(n - 1) = fwd.filtered.row(n - 1);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    const Eigen::RowVectorXd predicted = fwd.filtered.row(t) * P;
    Eigen::RowVectorXd ratio(k);
    for (Eigen::Index s = 0; s < k; ++s) {
      ratio[s] = predicted[s] > 0.0 ? smoothed(t + 1, s) / predicted[s] : 0.0;
    }
    const Eigen::RowVectorXd back = (P * ratio.transpose()).transpose();
    smoothed.row(t) = fwd.filtered.row(t).cwiseProduct(back);
    smoothed.row(t) /= smoothed.row(t).sum();
  }
  return smoothed;
}

double joint_log_density(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params,
                         const StatePath& path) {
  const Eigen::MatrixXd ll = emission_loglik_matrix(residuals, z, params);
  if (static_cast<Eigen::Index>(path.size()) != ll.rows()) throw DataError("path length differs from series length");
  double total = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const int s = path[t] - 1;
    if (s < 0 || s >= params.num_states) throw DataError("state code out of range");
    total += t == 0 ? std::log(params.pin[s]) : std::log(params.P(path[t - 1] - 1, s));
    total += ll(static_cast<Eigen::Index>(t), s);
  }
  return total;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
  const Eigen::Index k = P.rows();
  // Solve pi (P - I) = 0 with sum(pi) = 1 by replacing one equation.
  Eigen::MatrixXd a = (P - Eigen::MatrixXd::Identity(k, k)).transpose();
  a.row(k - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  b[k - 1] = 1.0;
  return a.fullPivLu().solve(b);
}

}  // namespace rivalhmm
