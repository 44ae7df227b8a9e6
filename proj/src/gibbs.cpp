#include "rivalhmm/gibbs.hpp"

#include <cmath>
#include <string>
#include <thread>

#include "rivalhmm/error.hpp"

namespace rivalhmm {

namespace {

CoefMatrix coef_from_json(const nlohmann::json& j, const char* what) {
  if (j.is_number()) return CoefMatrix::Constant(j.get<double>());
  CoefMatrix m;
  if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a number or a 3x2 array");
  for (int r = 0; r < 3; ++r) {
    if (!j[r].is_array() || j[r].size() != 2) throw ConfigError(std::string(what) + " must be a number or a 3x2 array");
    for (int c = 0; c < 2; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

nlohmann::json coef_to_json(const CoefMatrix& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) j.push_back({m(r, 0), m(r, 1)});
  return j;
}

int checked_int(const nlohmann::json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(std::string("gibbs.") + key + " must be an integer");
  return v.get<int>();
}

}  // namespace

Eigen::VectorXd PriorSpec::mix_for(int num_states) const {
  if (mix.size() == 0) return Eigen::VectorXd::Ones(num_states);
  if (mix.size() != num_states) {
    throw ConfigError("prior mix has " + std::to_string(mix.size()) + " entries for " + std::to_string(num_states) + " states");
  }
  return mix;
}

void PriorSpec::validate(int num_states) const {
  if (!(wishart_df >= 3.0)) throw ConfigError("wishart degrees of freedom must be >= 3");
  Eigen::LLT<Eigen::Matrix2d> llt(wishart_r);
  if (llt.info() != Eigen::Success || wishart_r(0, 1) != wishart_r(1, 0)) {
    throw ConfigError("wishart scale matrix must be symmetric positive definite");
  }
  if (!(coef_variance.array() > 0.0).all()) throw ConfigError("coefficient prior variances must be positive");
  if (!(mix_for(num_states).array() > 0.0).all()) throw ConfigError("prior mix entries must be positive");
}

PriorSpec PriorSpec::from_json(const nlohmann::json& j) {
  PriorSpec p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw ConfigError("priors must be a JSON object");
  if (j.contains("coef_mean")) p.coef_mean = coef_from_json(j.at("coef_mean"), "priors.coef_mean");
  if (j.contains("coef_variance")) p.coef_variance = coef_from_json(j.at("coef_variance"), "priors.coef_variance");
  if (j.contains("wishart_r")) {
    const auto& r = j.at("wishart_r");
    if (!r.is_array() || r.size() != 2 || r[0].size() != 2 || r[1].size() != 2) {
      throw ConfigError("priors.wishart_r must be a 2x2 array");
    }
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) p.wishart_r(a, b) = r[a][b].get<double>();
  }
  if (j.contains("wishart_df")) p.wishart_df = j.at("wishart_df").get<double>();
  if (j.contains("mix") && !j.at("mix").is_null()) {
    const auto v = j.at("mix").get<std::vector<double>>();
    p.mix = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return p;
}

nlohmann::json PriorSpec::to_json() const {
  nlohmann::json j;
  j["coef_mean"] = coef_to_json(coef_mean);
  j["coef_variance"] = coef_to_json(coef_variance);
  j["wishart_r"] = {{wishart_r(0, 0), wishart_r(0, 1)}, {wishart_r(1, 0), wishart_r(1, 1)}};
  j["wishart_df"] = wishart_df;
  j["mix"] = mix.size() == 0 ? nlohmann::json(nullptr) : nlohmann::json(std::vector<double>(mix.begin(), mix.end()));
  return j;
}

void GibbsConfig::validate() const {
  if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
  if (kept_draws < 1) throw ConfigError("kept_draws must be >= 1");
  if (thin < 1) throw ConfigError("thin must be >= 1");
  if (num_chains < 1) throw ConfigError("num_chains must be >= 1");
  if (num_states < 2) throw ConfigError("num_states must be >= 2");
}

GibbsConfig GibbsConfig::from_json(const nlohmann::json& j) {
  GibbsConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("gibbs must be a JSON object");
  c.burn_in = checked_int(j, "burn_in", c.burn_in);
  c.kept_draws = checked_int(j, "kept_draws", c.kept_draws);
  c.thin = checked_int(j, "thin", c.thin);
  c.num_chains = checked_int(j, "num_chains", c.num_chains);
  c.num_states = checked_int(j, "num_states", c.num_states);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer()) throw ConfigError("gibbs.seed must be an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("latent_states")) c.latent_states = j.at("latent_states").get<bool>();
  c.validate();
  return c;
}

nlohmann::json GibbsConfig::to_json() const {
  return {{"burn_in", burn_in},       {"kept_draws", kept_draws}, {"thin", thin},
          {"seed", seed},             {"num_chains", num_chains}, {"num_states", num_states},
          {"latent_states", latent_states}};
}

ChainState init_chain_state(const PriorSpec& priors, const GibbsConfig& config, Eigen::Index num_periods, Rng& rng) {
  const int k = config.num_states;
  const Eigen::VectorXd mix = priors.mix_for(k);
  ChainState s;
  s.params.num_states = k;
  s.params.pin = mix / mix.sum();
  s.params.P = mix.transpose().replicate(k, 1) / mix.sum();
  s.params.theta.setZero();
  s.params.set_omega(priors.wishart_df * priors.wishart_r.inverse());
  s.path.resize(static_cast<std::size_t>(num_periods));
  const Eigen::VectorXd flat = Eigen::VectorXd::Ones(k);
  for (auto& x : s.path) x = config.latent_states ? rng.categorical(flat) + 1 : 1;
  return s;
}

StatePath sample_states(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params, Rng& rng) {
  const Eigen::MatrixXd ll = emission_loglik_matrix(residuals, z, params);
  const ForwardResult fwd = forward_filter(ll, params.pin, params.P);
  return backward_sample(fwd.filtered, params.P, rng);
}

Eigen::MatrixXd sample_transition_matrix(const StatePath& path, int num_states, const PriorSpec& priors, Rng& rng) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_states, num_states);
  for (std::size_t t = 1; t < path.size(); ++t) counts(path[t - 1] - 1, path[t] - 1) += 1.0;
  const Eigen::VectorXd mix = priors.mix_for(num_states);
  Eigen::MatrixXd p(num_states, num_states);
  for (int j = 0; j < num_states; ++j) p.row(j) = rng.dirichlet(mix + counts.row(j).transpose()).transpose();
  return p;
}

Eigen::VectorXd sample_initial_dist(const StatePath& path, int num_states, const PriorSpec& priors, Rng& rng) {
  Eigen::VectorXd alpha = priors.mix_for(num_states);
  if (!path.empty()) alpha[path.front() - 1] += 1.0;
  return rng.dirichlet(alpha);
}

CoefficientConditional coefficient_conditional(const ResidualPairs& residuals, const Eigen::VectorXd& z,
                                               const StatePath& path, const Eigen::Matrix2d& omega,
                                               const PriorSpec& priors, bool include_state) {
  const Eigen::Index n = residuals.size();
  if (z.size() != n || static_cast<Eigen::Index>(path.size()) != n) throw DataError("series lengths differ");
  const int p = include_state ? 3 : 2;

  // Data term: omega (x) W'W for the precision, stacked omega-weighted W'e
  // for the linear term, with W the T x p regressor matrix (1, z_t, x_t).
  Eigen::MatrixXd wtw = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd wte1 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd wte2 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd w(p);
  for (Eigen::Index t = 0; t < n; ++t) {
    w[0] = 1.0;
    w[1] = z[t];
    if (include_state) w[2] = static_cast<double>(path[static_cast<std::size_t>(t)]);
    wtw.noalias() += w * w.transpose();
    wte1 += residuals.e1[t] * w;
    wte2 += residuals.e2[t] * w;
  }

  Eigen::MatrixXd q(2 * p, 2 * p);
  Eigen::VectorXd b(2 * p);
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) q.block(a * p, c * p, p, p) = omega(a, c) * wtw;
    b.segment(a * p, p) = omega(a, 0) * wte1 + omega(a, 1) * wte2;
  }
  for (int a = 0; a < 2; ++a) {
    for (int r = 0; r < p; ++r) {
      const double prec = 1.0 / priors.coef_variance(r, a);
      q(a * p + r, a * p + r) += prec;
      b[a * p + r] += prec * priors.coef_mean(r, a);
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("coefficient conditional precision is singular");
  CoefficientConditional out;
  out.include_state = include_state;
  const Eigen::VectorXd m = llt.solve(b);
  // Expand to the full 6-vector layout.
  out.mean = Eigen::VectorXd::Zero(6);
  out.precision = Eigen::MatrixXd::Zero(6, 6);
  for (int a = 0; a < 2; ++a) {
    out.mean.segment(a * 3, p) = m.segment(a * p, p);
    for (int c = 0; c < 2; ++c) out.precision.block(a * 3, c * 3, p, p) = q.block(a * p, c * p, p, p);
  }
  return out;
}

CoefMatrix sample_coefficients(const ResidualPairs& residuals, const Eigen::VectorXd& z, const StatePath& path,
                               const Eigen::Matrix2d& omega, const PriorSpec& priors, Rng& rng, bool include_state) {
  const CoefficientConditional cond = coefficient_conditional(residuals, z, path, omega, priors, include_state);
  const int p = include_state ? 3 : 2;
  std::vector<Eigen::Index> idx;
  for (int a = 0; a < 2; ++a)
    for (int r = 0; r < p; ++r) idx.push_back(a * 3 + r);
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd q(m, m);
  Eigen::VectorXd mean(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    mean[i] = cond.mean[idx[i]];
    for (Eigen::Index j = 0; j < m; ++j) q(i, j) = cond.precision(idx[i], idx[j]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("coefficient conditional precision is singular");
  Eigen::VectorXd xi(m);
  for (Eigen::Index i = 0; i < m; ++i) xi[i] = rng.normal();
  // q = L L', so L'^-1 xi has covariance q^-1.
  const Eigen::VectorXd draw = mean + llt.matrixU().solve(xi);
  CoefMatrix theta = CoefMatrix::Zero();
  for (Eigen::Index i = 0; i < m; ++i) theta(idx[i] % 3, idx[i] / 3) = draw[i];
  return theta;
}

Eigen::Matrix2d residual_scatter(const ResidualPairs& residuals, const Eigen::VectorXd& z, const StatePath& path,
                                 const CoefMatrix& theta) {
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  for (Eigen::Index t = 0; t < residuals.size(); ++t) {
    const Eigen::Vector3d w(1.0, z[t], static_cast<double>(path[static_cast<std::size_t>(t)]));
    const Eigen::Vector2d eps = Eigen::Vector2d(residuals.e1[t], residuals.e2[t]) - theta.transpose() * w;
    s.noalias() += eps * eps.transpose();
  }
  return s;
}

Eigen::Matrix2d sample_precision(const ResidualPairs& residuals, const Eigen::VectorXd& z, const StatePath& path,
                                 const CoefMatrix& theta, const PriorSpec& priors, Rng& rng) {
  const Eigen::Matrix2d scale_inv = priors.wishart_r + residual_scatter(residuals, z, path, theta);
  Eigen::LLT<Eigen::Matrix2d> llt(scale_inv);
  if (llt.info() != Eigen::Success) throw NumericalError("accumulated wishart scale is not positive definite");
  const Eigen::Matrix2d scale = llt.solve(Eigen::Matrix2d::Identity());
  return rng.wishart(0.5 * (scale + scale.transpose()), priors.wishart_df + static_cast<double>(residuals.size()));
}

void swap_labels(HmmParams& params, StatePath& path) {
  if (params.num_states != 2) throw ConfigError("label swap is defined for 2 states only");
  for (int c = 0; c < 2; ++c) {
    params.theta(0, c) += 3.0 * params.theta(2, c);
    params.theta(2, c) = -params.theta(2, c);
  }
  params.P.row(0).swap(params.P.row(1));
  params.P.col(0).swap(params.P.col(1));
  std::swap(params.pin[0], params.pin[1]);
  for (auto& x : path) x = 3 - x;
}

bool relabel_draw(HmmParams& params, StatePath& path) {
  if (params.num_states != 2 || params.theta(2, 1) >= 0.0) return false;
  swap_labels(params, path);
  return true;
}

PosteriorSamples run_chain(const ResidualPairs& residuals, const Eigen::VectorXd& z, const PriorSpec& priors,
                           const GibbsConfig& config, Rng& rng) {
  config.validate();
  priors.validate(config.num_states);
  if (residuals.size() < 2) throw DataError("chain needs at least 2 periods");
  if (z.size() != residuals.size()) throw DataError("spend series length differs from residual length");

  const int k = config.num_states;
  const bool latent = config.latent_states;
  ChainState state = init_chain_state(priors, config, residuals.size(), rng);

  PosteriorSamples out;
  out.config = config;
  out.relabel_applied = latent && k == 2;
  out.draws.reserve(static_cast<std::size_t>(config.kept_draws));

  const long total = static_cast<long>(config.burn_in) + static_cast<long>(config.kept_draws) * config.thin;
  for (long sweep = 0; sweep < total; ++sweep) {
    bool swapped = false;
    try {
      if (latent) {
        state.path = sample_states(residuals, z, state.params, rng);
        state.params.P = sample_transition_matrix(state.path, k, priors, rng);
        state.params.pin = sample_initial_dist(state.path, k, priors, rng);
      }
      state.params.theta = sample_coefficients(residuals, z, state.path, state.params.omega, priors, rng, latent);
      state.params.set_omega(sample_precision(residuals, z, state.path, state.params.theta, priors, rng));
      if (latent) swapped = relabel_draw(state.params, state.path);
    } catch (const NumericalError& e) {
      throw NumericalError("sweep " + std::to_string(sweep + 1) + ": " + e.what());
    }
    const long since = sweep - config.burn_in + 1;
    if (since > 0 && since % config.thin == 0) {
      if (swapped) ++out.relabel_count;
      out.draws.push_back({state.params, state.path});
    }
  }
  return out;
}

std::vector<PosteriorSamples> run_chains(const ResidualPairs& residuals, const Eigen::VectorXd& z,
                                         const PriorSpec& priors, const GibbsConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.num_chains);
  std::vector<PosteriorSamples> chains(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t c) {
    try {
      Rng rng = Rng::derive(config.seed, c);
      chains[c] = run_chain(residuals, z, priors, config, rng);
      chains[c].chain_index = static_cast<int>(c);
      chains[c].num_chains = config.num_chains;
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (n == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < n; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return chains;
}

PosteriorSamples pool_chains(std::vector<PosteriorSamples> chains) {
  if (chains.empty()) throw ConfigError("no chains to pool");
  PosteriorSamples out = std::move(chains.front());
  out.num_chains = static_cast<int>(chains.size());
  for (std::size_t c = 1; c < chains.size(); ++c) {
    out.relabel_count += chains[c].relabel_count;
    for (auto& d : chains[c].draws) out.draws.push_back(std::move(d));
  }
  return out;
}

}  // namespace rivalhmm
