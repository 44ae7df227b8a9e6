#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rivalhmm/dataset.hpp"
#include "rivalhmm/gibbs.hpp"
#include "rivalhmm/stage1.hpp"

namespace rivalhmm {

struct SummaryRow {
  std::string node;
  double mean = 0.0;
  double sd = 0.0;
  double q2_5 = 0.0;
  double median = 0.0;
  double q97_5 = 0.0;
  /// The (q2_5, q97_5) interval excludes zero.
  bool significant_nonzero = false;
};

/// Node names in export order: pin[k], P[j,k], beta0a..beta2b, sigma[i,j], omega[i,j].
std::vector<std::string> all_nodes(int num_states);

/// Per-draw values of a named node; throws ConfigError for unknown names.
std::vector<double> extract_node(const PosteriorSamples& samples, const std::string& node);

/// Quantile by linear interpolation between order statistics, h = (n-1)p.
double quantile_sorted(const std::vector<double>& sorted, double p);

SummaryRow summarize_values(const std::string& node, std::vector<double> values);
std::vector<SummaryRow> summarize_posterior(const PosteriorSamples& samples, const std::vector<std::string>& nodes);

/// Monte Carlo standard error of the mean by non-overlapping batch means
/// (floor(sqrt(n)) batches).
double mc_standard_error(const std::vector<double>& values);

struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian kernel, Silverman bandwidth 0.9 min(sd, IQR/1.34) n^-1/5, on an
/// even grid spanning the data range +- 3 bandwidths.
KdeResult kde_export(const std::vector<double>& draws, int grid_points = 512);

struct ActivityProfile {
  std::vector<double> prob_active;
};

/// Fraction of draws with x_t = 2 (K = 2 only).
ActivityProfile state_activity_means(const PosteriorSamples& samples);

/// T x K posterior state frequencies.
Eigen::MatrixXd state_probabilities(const PosteriorSamples& samples);

/// Posterior mean of (x_t - 1)/(K - 1); equals state_activity_means for K = 2.
ActivityProfile scaled_state_means(const PosteriorSamples& samples);

/// Most frequent state per period (ties to the lower label).
std::vector<int> modal_states(const PosteriorSamples& samples);

struct ClassificationScore {
  double cutoff = 0.5;
  int presence_correct = 0;
  int presence_total = 0;
  int absence_correct = 0;
  int absence_total = 0;
  int overall_correct = 0;
  int overall_total = 0;

  double presence_rate() const { return presence_total ? static_cast<double>(presence_correct) / presence_total : 0.0; }
  double absence_rate() const { return absence_total ? static_cast<double>(absence_correct) / absence_total : 0.0; }
  double overall_rate() const { return overall_total ? static_cast<double>(overall_correct) / overall_total : 0.0; }
};

/// Predicted active iff prob >= cutoff; actual active iff spend > 0.
ClassificationScore classify_and_score(const ActivityProfile& profile, const std::vector<double>& actual_spend,
                                       double cutoff = 0.5);

struct BiasComparison {
  double beta1c_with = 0.0;
  double beta1c_without = 0.0;
  double difference = 0.0;
  double mcse_with = 0.0;
  double mcse_without = 0.0;
  double combined_mcse = 0.0;
  std::string config_fingerprint;

  nlohmann::json to_json() const;
};

/// Focal spend slope from the full model versus a reduced model with no
/// latent chain (state slopes fixed at zero), same seed derivation.
BiasComparison bias_comparison(const ResidualPairs& residuals, const Eigen::VectorXd& z, const PriorSpec& priors,
                               const GibbsConfig& config);

std::string config_fingerprint(const PriorSpec& priors, const GibbsConfig& config);

/// Stage 1 plus Gibbs on one data window.
struct PipelineResult {
  Stage1Fit focal_fit;
  Stage1Fit competitor_fit;
  ResidualPairs residuals;
  PosteriorSamples samples;  // pooled over chains
};

PipelineResult fit_pipeline(const TransformedSeries& data, const RegressionSpec& focal, const RegressionSpec& competitor,
                            const PriorSpec& priors, const GibbsConfig& config);

struct RollingOptions {
  int start_period = 0;
  int step = 1;
  /// 0 for expanding windows; otherwise the fixed window length.
  int fixed_width = 0;
};

struct RollingEntry {
  int period = 0;        // last period in the window (1-based)
  int window_start = 1;  // first period in the window (1-based)
  double beta1c_with = 0.0;
  std::vector<SummaryRow> summary;
};

std::vector<RollingEntry> rolling_refit(const TransformedSeries& data, const RegressionSpec& focal,
                                        const RegressionSpec& competitor, const PriorSpec& priors,
                                        const GibbsConfig& config, const RollingOptions& options);

std::string posterior_summary_csv(const std::vector<SummaryRow>& rows);
std::string activity_profile_csv(const ActivityProfile& profile, const std::optional<std::vector<double>>& actual_spend);
std::string classification_csv(const ClassificationScore& score);
std::string density_csv(const KdeResult& kde);
std::string draws_csv(const PosteriorSamples& samples);
std::string paths_csv(const PosteriorSamples& samples);
std::string rolling_csv(const std::vector<RollingEntry>& entries);

/// File-name-safe form of a node name: "P[1,2]" -> "P_1_2".
std::string node_file_stem(const std::string& node);

}  // namespace rivalhmm
