#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rivalhmm/hmm.hpp"
#include "rivalhmm/random.hpp"
#include "rivalhmm/stage1.hpp"

namespace rivalhmm {

/// Conjugate priors of the residual model.
///
/// Coefficients are independent normals. The precision prior is Wishart with
/// density proportional to |omega|^((df-3)/2) exp(-tr(R omega)/2), so its mean
/// is df * R^-1. Transition rows and the initial distribution are Dirichlet(mix).
struct PriorSpec {
  CoefMatrix coef_mean = CoefMatrix::Zero();
  CoefMatrix coef_variance = CoefMatrix::Constant(1e6);
  Eigen::Matrix2d wishart_r = Eigen::Matrix2d::Identity();
  double wishart_df = 4.0;
  /// Empty means all ones for whatever K is in use.
  Eigen::VectorXd mix;

  Eigen::VectorXd mix_for(int num_states) const;
  void validate(int num_states) const;

  static PriorSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct GibbsConfig {
  int burn_in = 2000;
  int kept_draws = 10000;
  int thin = 1;
  std::uint64_t seed = 20090630;
  int num_chains = 1;
  int num_states = 2;
  /// false runs the reduced model: no latent chain, state slopes fixed at 0.
  bool latent_states = true;

  void validate() const;
  static GibbsConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Draw {
  HmmParams params;
  StatePath path;
};

struct PosteriorSamples {
  GibbsConfig config;
  int chain_index = 0;
  int num_chains = 1;
  /// Number of retained draws whose labels were swapped.
  int relabel_count = 0;
  /// false when no identification rule exists (K > 2) or no latent chain.
  bool relabel_applied = true;
  std::vector<Draw> draws;

  Eigen::Index num_periods() const { return draws.empty() ? 0 : static_cast<Eigen::Index>(draws.front().path.size()); }
};

struct ChainState {
  HmmParams params;
  StatePath path;
};

/// Theta = 0, omega = prior mean, P rows and pin = Dirichlet prior means,
/// states uniform on 1..K.
ChainState init_chain_state(const PriorSpec& priors, const GibbsConfig& config, Eigen::Index num_periods, Rng& rng);

/// Forward filter then backward sample: an exact draw of the whole path.
StatePath sample_states(const ResidualPairs& residuals, const Eigen::VectorXd& z, const HmmParams& params, Rng& rng);

Eigen::MatrixXd sample_transition_matrix(const StatePath& path, int num_states, const PriorSpec& priors, Rng& rng);

Eigen::VectorXd sample_initial_dist(const StatePath& path, int num_states, const PriorSpec& priors, Rng& rng);

/// Joint normal full conditional of vec(theta) (column-major: beta0a, beta1a,
/// beta2a, beta0b, beta1b, beta2b). Without the state column the entries for
/// beta2a and beta2b are pinned at exactly zero.
struct CoefficientConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  bool include_state = true;
};

CoefficientConditional coefficient_conditional(const ResidualPairs& residuals, const Eigen::VectorXd& z,
                                               const StatePath& path, const Eigen::Matrix2d& omega,
                                               const PriorSpec& priors, bool include_state = true);

CoefMatrix sample_coefficients(const ResidualPairs& residuals, const Eigen::VectorXd& z, const StatePath& path,
                               const Eigen::Matrix2d& omega, const PriorSpec& priors, Rng& rng,
                               bool include_state = true);

/// Residual outer-product sum S = sum_t eps_t eps_t' under theta and path.
Eigen::Matrix2d residual_scatter(const ResidualPairs& residuals, const Eigen::VectorXd& z, const StatePath& path,
                                 const CoefMatrix& theta);

/// Draws omega from Wishart(scale (R + S)^-1, df + T).
Eigen::Matrix2d sample_precision(const ResidualPairs& residuals, const Eigen::VectorXd& z, const StatePath& path,
                                 const CoefMatrix& theta, const PriorSpec& priors, Rng& rng);

/// Unconditional exchange of labels 1 and 2 (K = 2): x' = 3 - x, P and pin
/// permuted, and per output column beta2' = -beta2, beta0' = beta0 + 3 beta2.
/// Leaves every emission mean unchanged. An involution.
void swap_labels(HmmParams& params, StatePath& path);

/// Enforces beta2b >= 0 for K = 2 by swapping state labels. Returns true if
/// a swap happened. Identity for any other K.
bool relabel_draw(HmmParams& params, StatePath& path);

/// One chain: burn_in + kept_draws * thin sweeps in the order
/// states, P, pin, theta, omega, relabel.
PosteriorSamples run_chain(const ResidualPairs& residuals, const Eigen::VectorXd& z, const PriorSpec& priors,
                           const GibbsConfig& config, Rng& rng);

/// config.num_chains chains, chain c on stream Rng::derive(config.seed, c),
/// run concurrently.
std::vector<PosteriorSamples> run_chains(const ResidualPairs& residuals, const Eigen::VectorXd& z,
                                         const PriorSpec& priors, const GibbsConfig& config);

/// Concatenate chains into one sample set (chain order preserved).
PosteriorSamples pool_chains(std::vector<PosteriorSamples> chains);

}  // namespace rivalhmm
