#include "rivalhmm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rivalhmm/error.hpp"
#include "rivalhmm/posterior.hpp"

namespace rivalhmm {

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(std::string(what) + " must be a nested array");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw ConfigError(std::string(what) + " has ragged rows");
    for (std::size_t c = 0; c < j[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

/// Square root of a PSD matrix (zero eigenvalues allowed).
Eigen::Matrix2d psd_root(const Eigen::Matrix2d& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(s);
  const Eigen::Vector2d ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal();
}

// Flighted focal spend: dark weeks and bursts, in millions.
Eigen::VectorXd default_spend_path(int n) {
  Rng rng(0x5eed0001ULL);
  Eigen::VectorXd z(n);
  for (int t = 0; t < n; ++t) z[t] = rng.uniform() < 0.25 ? 0.0 : 0.05 + 0.5 * rng.uniform();
  return z;
}

Stage1Truth default_stage1_truth(int n, const Date& start) {
  Rng rng(0x5eed0002ULL);
  Stage1Truth truth;
  truth.focal = default_focal_spec();
  truth.competitor = default_competitor_spec();
  truth.focal_coefficients = Eigen::Vector3d(6.632, 0.001, 1.171);
  truth.competitor_coefficients = Eigen::Vector2d(5.563, 0.00008);
  NamedColumn seasonality{"seasonality", {}};
  NamedColumn gift{"gift", {}};
  NamedColumn djia{"djia", {}};
  double level = 11000.0;
  const long day0 = start.days_since_epoch();
  for (int t = 0; t < n; ++t) {
    const int week = Date::from_days(day0 + 7L * t).week_of_year();
    seasonality.values.push_back(std::round(2485.0 + 600.0 * std::sin(2.0 * std::numbers::pi * week / 52.0)));
    gift.values.push_back(rng.uniform() < 0.05 ? 1.0 : 0.0);
    level = std::max(6500.0, level * std::exp(0.025 * rng.normal()));
    djia.values.push_back(std::round(level * 100.0) / 100.0);
  }
  truth.covariates = {seasonality, gift, djia};
  truth.indicators = {"gift"};
  return truth;
}

void check_simplex(const Eigen::VectorXd& v, const std::string& what) {
  if ((v.array() < 0.0).any() || std::abs(v.sum() - 1.0) > 1e-9) throw ConfigError(what + " is not a probability vector");
}

}  // namespace

nlohmann::json params_to_json(const HmmParams& p) {
  return {{"num_states", p.num_states},
          {"pin", vector_to_json(p.pin)},
          {"P", matrix_to_json(p.P)},
          {"theta", matrix_to_json(p.theta)},
          {"sigma", matrix_to_json(p.sigma)}};
}

HmmParams params_from_json(const nlohmann::json& j) {
  HmmParams p;
  p.P = matrix_from_json(j.at("P"), "P");
  p.num_states = static_cast<int>(p.P.rows());
  p.pin = j.contains("pin") ? vector_from_json(j.at("pin")) : stationary_distribution(p.P);
  const Eigen::MatrixXd theta = matrix_from_json(j.at("theta"), "theta");
  if (theta.rows() != 3 || theta.cols() != 2) throw ConfigError("theta must be 3x2");
  p.theta = theta;
  const Eigen::MatrixXd sigma = matrix_from_json(j.at("sigma"), "sigma");
  if (sigma.rows() != 2 || sigma.cols() != 2) throw ConfigError("sigma must be 2x2");
  p.sigma = sigma;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(p.sigma);
  p.omega = lu.isInvertible() ? Eigen::Matrix2d(p.sigma.inverse()) : Eigen::Matrix2d::Zero();
  return p;
}

void GeneratorSpec::validate() const {
  if (num_periods < 1) throw ConfigError("synthetic series needs T >= 1");
  const int k = params.num_states;
  if (k < 1 || params.P.rows() != k || params.P.cols() != k || params.pin.size() != k) {
    throw ConfigError("generator parameters have inconsistent state dimensions");
  }
  check_simplex(params.pin, "pin");
  for (int j = 0; j < k; ++j) check_simplex(params.P.row(j).transpose(), "row " + std::to_string(j + 1) + " of P");
  if (std::abs(params.sigma(0, 1) - params.sigma(1, 0)) > 1e-12) throw ConfigError("sigma must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(params.sigma);
  if (eig.eigenvalues().minCoeff() < -1e-12) throw ConfigError("sigma must be positive semi-definite");
  if (z.size() != num_periods) throw ConfigError("spend path length differs from T");
  if ((z.array() < 0.0).any()) throw ConfigError("spend path must be non-negative");
  if (stage1) {
    for (const auto& c : stage1->covariates) {
      if (static_cast<int>(c.values.size()) != num_periods) throw ConfigError("covariate '" + c.name + "' length differs from T");
    }
    if (stage1->focal_coefficients.size() != static_cast<Eigen::Index>(stage1->focal.predictors.size()) + 1 ||
        stage1->competitor_coefficients.size() != static_cast<Eigen::Index>(stage1->competitor.predictors.size()) + 1) {
      throw ConfigError("stage-1 coefficient counts do not match their predictor lists");
    }
  }
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("generator spec must be a JSON object");
  const int n = j.contains("num_periods") ? j.at("num_periods").get<int>() : j.value("T", 156);
  if (n < 1) throw ConfigError("synthetic series needs T >= 1");
  GeneratorSpec spec = default_generator_spec(n, j.value("seed", std::uint64_t{1}));
  if (j.contains("params")) spec.params = params_from_json(j.at("params"));
  if (j.contains("z")) spec.z = vector_from_json(j.at("z"));
  if (j.contains("start_date")) spec.start_date = Date::parse(j.at("start_date").get<std::string>());
  if (j.contains("competitor_spend_level")) spec.competitor_spend_level = j.at("competitor_spend_level").get<double>();
  if (j.contains("stage1")) {
    const auto& s = j.at("stage1");
    if (s.is_null()) {
      spec.stage1.reset();
    } else {
      Stage1Truth t;
      t.focal = {"y1", s.at("focal_predictors").get<std::vector<std::string>>()};
      t.competitor = {"y2", s.at("competitor_predictors").get<std::vector<std::string>>()};
      t.focal_coefficients = vector_from_json(s.at("focal_coefficients"));
      t.competitor_coefficients = vector_from_json(s.at("competitor_coefficients"));
      for (const auto& [name, values] : s.at("covariates").items()) {
        t.covariates.push_back({name, values.get<std::vector<double>>()});
      }
      if (s.contains("indicators")) t.indicators = s.at("indicators").get<std::vector<std::string>>();
      spec.stage1 = std::move(t);
    }
  }
  spec.validate();
  return spec;
}

nlohmann::json GeneratorSpec::to_json() const {
  nlohmann::json j;
  j["num_periods"] = num_periods;
  j["seed"] = seed;
  j["params"] = params_to_json(params);
  j["z"] = vector_to_json(z);
  j["start_date"] = start_date.to_string();
  j["competitor_spend_level"] = competitor_spend_level;
  if (stage1) {
    nlohmann::json s;
    s["focal_predictors"] = stage1->focal.predictors;
    s["competitor_predictors"] = stage1->competitor.predictors;
    s["focal_coefficients"] = vector_to_json(stage1->focal_coefficients);
    s["competitor_coefficients"] = vector_to_json(stage1->competitor_coefficients);
    nlohmann::json cov = nlohmann::json::object();
    for (const auto& c : stage1->covariates) cov[c.name] = c.values;
    s["covariates"] = cov;
    s["indicators"] = stage1->indicators;
    j["stage1"] = s;
  } else {
    j["stage1"] = nullptr;
  }
  return j;
}

SyntheticDataset generate_dataset(const GeneratorSpec& spec) {
  spec.validate();
  const int n = spec.num_periods;
  const HmmParams& p = spec.params;
  Rng rng(spec.seed);

  SyntheticDataset out;
  out.truth.resize(static_cast<std::size_t>(n));
  out.truth[0] = rng.categorical(p.pin) + 1;
  for (int t = 1; t < n; ++t) out.truth[static_cast<std::size_t>(t)] = rng.categorical(p.P.row(out.truth[static_cast<std::size_t>(t - 1)] - 1).transpose()) + 1;

  const Eigen::Matrix2d root = psd_root(p.sigma);
  out.residuals.e1.resize(n);
  out.residuals.e2.resize(n);
  for (int t = 0; t < n; ++t) {
    const Eigen::Vector3d w(1.0, spec.z[t], static_cast<double>(out.truth[static_cast<std::size_t>(t)]));
    const Eigen::Vector2d mean = p.theta.transpose() * w;
    const Eigen::Vector2d xi(rng.normal(), rng.normal());
    const Eigen::Vector2d e = p.sigma.isZero(0.0) ? mean : Eigen::Vector2d(mean + root * xi);
    out.residuals.e1[t] = e[0];
    out.residuals.e2[t] = e[1];
  }

  if (spec.stage1) {
    const Stage1Truth& s1 = *spec.stage1;
    SeriesTable table;
    table.mapping.sales_a = "sales_a";
    table.mapping.sales_b = "sales_b";
    table.mapping.spend_a = "spend_a";
    table.mapping.spend_b_actual = "spend_b_actual";
    table.mapping.period = "period";
    for (const auto& c : s1.covariates) table.mapping.covariates.push_back(c.name);
    table.mapping.indicators = s1.indicators;
    table.covariates = s1.covariates;

    TransformedSeries covs;
    covs.y1 = Eigen::VectorXd::Zero(n);
    covs.y2 = Eigen::VectorXd::Zero(n);
    covs.z = spec.z;
    for (const auto& c : s1.covariates) {
      covs.covariates.emplace_back(c.name, Eigen::Map<const Eigen::VectorXd>(c.values.data(), n));
    }
    const Eigen::VectorXd mean_a = design_matrix(covs, s1.focal) * s1.focal_coefficients;
    const Eigen::VectorXd mean_b = design_matrix(covs, s1.competitor) * s1.competitor_coefficients;
    const long day0 = spec.start_date.days_since_epoch();
    table.spend_b_actual.emplace();
    for (int t = 0; t < n; ++t) {
      table.period.push_back(t + 1);
      table.date.push_back(Date::from_days(day0 + 7L * t));
      table.sales_a.push_back(std::max(1.0, std::round(std::exp(mean_a[t] + out.residuals.e1[t]))));
      table.sales_b.push_back(std::max(1.0, std::round(std::exp(mean_b[t] + out.residuals.e2[t]))));
      // Exact cents so the CSV round trip is lossless.
      table.spend_a.push_back(std::round(spec.z[t] * 1e8) / 100.0);
      table.spend_b_actual->push_back(spec.competitor_spend_level * (out.truth[static_cast<std::size_t>(t)] - 1));
    }
    out.table = std::move(table);
  }
  return out;
}

GeneratorSpec default_generator_spec(int num_periods, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.num_periods = num_periods;
  spec.seed = seed;
  HmmParams& p = spec.params;
  p.num_states = 2;
  p.P.resize(2, 2);
  p.P << 0.8765, 0.1235, 0.04997, 0.95003;
  p.pin = stationary_distribution(p.P);
  p.theta << -0.30, -0.20,  //
      1.266, 0.20,          //
      -0.05, kCalibratedCompetitorStateEffect;
  Eigen::Matrix2d sigma;
  sigma << 0.0168, 0.0027, 0.0027, 0.05243;
  p.set_sigma(sigma);
  spec.z = num_periods > 0 ? default_spend_path(num_periods) : Eigen::VectorXd();
  if (num_periods > 0) spec.stage1 = default_stage1_truth(num_periods, spec.start_date);
  return spec;
}

double oracle_classification_accuracy(const GeneratorSpec& spec) {
  const SyntheticDataset data = generate_dataset(spec);
  const Eigen::MatrixXd ll = emission_loglik_matrix(data.residuals, spec.z, spec.params);
  const Eigen::MatrixXd smoothed = smoothed_marginals(ll, spec.params.pin, spec.params.P);
  ActivityProfile profile;
  std::vector<double> actual;
  for (Eigen::Index t = 0; t < smoothed.rows(); ++t) {
    profile.prob_active.push_back(smoothed(t, 1));
    actual.push_back(data.truth[static_cast<std::size_t>(t)] == 2 ? 1.0 : 0.0);
  }
  return classify_and_score(profile, actual, 0.5).overall_rate();
}

double calibrate_state_effect(const GeneratorSpec& base, double target_accuracy, int num_periods, std::uint64_t seed) {
  GeneratorSpec spec = base;
  spec.num_periods = num_periods;
  spec.seed = seed;
  spec.stage1.reset();
  spec.z = default_spend_path(num_periods);
  auto accuracy_at = [&](double effect) {
    spec.params.theta(2, 1) = effect;
    return oracle_classification_accuracy(spec);
  };
  // Same seed for every evaluation: common random numbers keep the
  // accuracy curve monotone enough for bisection.
  double lo = 0.0;
  double hi = 2.0;
  if (accuracy_at(hi) < target_accuracy) throw NumericalError("target accuracy unreachable within effect range");
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (accuracy_at(mid) < target_accuracy ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ExactPosterior exact_state_posterior(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params) {
  const Eigen::Index n = residuals.size();
  const int k = params.num_states;
  if (n < 1) throw DataError("enumeration needs at least one period");
  const double paths_d = std::pow(static_cast<double>(k), static_cast<double>(n));
  if (paths_d > 1048576.0) throw DataError("instance too large for enumeration (K^T > 2^20)");
  const auto paths = static_cast<long>(paths_d);

  // Direct bivariate normal density via the closed-form 2x2 inverse.
  const double s11 = params.sigma(0, 0), s12 = params.sigma(0, 1), s22 = params.sigma(1, 1);
  const double det = s11 * s22 - s12 * s12;
  if (!(det > 0.0)) throw NumericalError("sigma is not positive definite");
  Eigen::MatrixXd log_emit(n, k);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int s = 0; s < k; ++s) {
      const double m1 = params.theta(0, 0) + params.theta(1, 0) * z[t] + params.theta(2, 0) * (s + 1);
      const double m2 = params.theta(0, 1) + params.theta(1, 1) * z[t] + params.theta(2, 1) * (s + 1);
      const double d1 = residuals.e1[t] - m1, d2 = residuals.e2[t] - m2;
      const double q = (s22 * d1 * d1 - 2.0 * s12 * d1 * d2 + s11 * d2 * d2) / det;
      log_emit(t, s) = -0.5 * q - std::log(2.0 * std::numbers::pi * std::sqrt(det));
    }
  }

  std::vector<double> log_joint(static_cast<std::size_t>(paths));
  std::vector<int> states(static_cast<std::size_t>(n));
  for (long idx = 0; idx < paths; ++idx) {
    long rem = idx;
    for (Eigen::Index t = 0; t < n; ++t) {
      states[static_cast<std::size_t>(t)] = static_cast<int>(rem % k);
      rem /= k;
    }
    double lj = std::log(params.pin[states[0]]) + log_emit(0, states[0]);
    for (Eigen::Index t = 1; t < n; ++t) {
      lj += std::log(params.P(states[static_cast<std::size_t>(t - 1)], states[static_cast<std::size_t>(t)])) +
            log_emit(t, states[static_cast<std::size_t>(t)]);
    }
    log_joint[static_cast<std::size_t>(idx)] = lj;
  }
  const double top = *std::max_element(log_joint.begin(), log_joint.end());
  ExactPosterior out;
  out.marginals = Eigen::MatrixXd::Zero(n, k);
  double total = 0.0;
  for (long idx = 0; idx < paths; ++idx) {
    const double w = std::exp(log_joint[static_cast<std::size_t>(idx)] - top);
    total += w;
    long rem = idx;
    for (Eigen::Index t = 0; t < n; ++t) {
      out.marginals(t, rem % k) += w;
      rem /= k;
    }
  }
  out.marginals /= total;
  out.loglik = top + std::log(total);
  return out;
}

double GridDensity::mean() const {
  double m = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    m += 0.5 * (x[i] - x[i - 1]) * (x[i] * density[i] + x[i - 1] * density[i - 1]);
  }
  return m;
}

double GridDensity::cdf_at(double value) const {
  if (value <= x.front()) return 0.0;
  if (value >= x.back()) return 1.0;
  const auto it = std::upper_bound(x.begin(), x.end(), value);
  const auto i = static_cast<std::size_t>(it - x.begin());
  const double frac = (value - x[i - 1]) / (x[i] - x[i - 1]);
  return cdf[i - 1] + frac * (cdf[i] - cdf[i - 1]);
}

GridDensity conditional_density_grid(const std::function<double(double)>& log_density, double lo, double hi, int points) {
  if (points < 1024) throw ConfigError("density grid needs at least 1024 points");
  if (!(hi > lo)) throw ConfigError("density grid range is empty");
  GridDensity g;
  g.x.resize(static_cast<std::size_t>(points));
  std::vector<double> logd(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    g.x[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
    logd[static_cast<std::size_t>(i)] = log_density(g.x[static_cast<std::size_t>(i)]);
    if (!std::isfinite(logd[static_cast<std::size_t>(i)])) throw NumericalError("non-finite log-density on the grid");
  }
  const double top = *std::max_element(logd.begin(), logd.end());
  g.density.resize(logd.size());
  for (std::size_t i = 0; i < logd.size(); ++i) g.density[i] = std::exp(logd[i] - top);
  g.cdf.assign(logd.size(), 0.0);
  for (std::size_t i = 1; i < logd.size(); ++i) {
    g.cdf[i] = g.cdf[i - 1] + 0.5 * (g.x[i] - g.x[i - 1]) * (g.density[i] + g.density[i - 1]);
  }
  const double total = g.cdf.back();
  for (auto& d : g.density) d /= total;
  for (auto& c : g.cdf) c /= total;
  return g;
}

double ks_distance(std::vector<double> draws, const GridDensity& grid) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = grid.cdf_at(draws[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

}  // namespace rivalhmm
