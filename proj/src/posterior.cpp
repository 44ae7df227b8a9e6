#include "rivalhmm/posterior.hpp"

#include <algorithm>
#include <functional>
#include <regex>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "rivalhmm/error.hpp"
#include "rivalhmm/io.hpp"

namespace rivalhmm {

std::vector<std::string> all_nodes(int num_states) {
  std::vector<std::string> nodes;
  for (int k = 1; k <= num_states; ++k) nodes.push_back("pin[" + std::to_string(k) + "]");
  for (int j = 1; j <= num_states; ++j)
    for (int k = 1; k <= num_states; ++k) nodes.push_back("P[" + std::to_string(j) + "," + std::to_string(k) + "]");
  for (const char* b : {"beta0a", "beta1a", "beta2a", "beta0b", "beta1b", "beta2b"}) nodes.emplace_back(b);
  for (const char* m : {"sigma", "omega"})
    for (int i = 1; i <= 2; ++i)
      for (int j = 1; j <= 2; ++j) nodes.push_back(std::string(m) + "[" + std::to_string(i) + "," + std::to_string(j) + "]");
  return nodes;
}

namespace {

// Accessor for one scalar of a draw, resolved once per node name.
using Accessor = std::function<double(const HmmParams&)>;

Accessor node_accessor(const std::string& node, int num_states) {
  static const std::regex kIndexed(R"(^(pin|P|sigma|omega)\[(\d+)(?:,(\d+))?\]$)");
  std::smatch m;
  if (std::regex_match(node, m, kIndexed)) {
    const std::string name = m[1];
    const int a = std::stoi(m[2]);
    const bool two = m[3].matched;
    const int b = two ? std::stoi(m[3]) : 0;
    const int limit = name == "pin" || name == "P" ? num_states : 2;
    const bool ok = a >= 1 && a <= limit && (name == "pin" ? !two : two && b >= 1 && b <= limit);
    if (ok) {
      if (name == "pin") return [a](const HmmParams& p) { return p.pin[a - 1]; };
      if (name == "P") return [a, b](const HmmParams& p) { return p.P(a - 1, b - 1); };
      if (name == "sigma") return [a, b](const HmmParams& p) { return p.sigma(a - 1, b - 1); };
      return [a, b](const HmmParams& p) { return p.omega(a - 1, b - 1); };
    }
  }
  static const char* kBetas[] = {"beta0a", "beta1a", "beta2a", "beta0b", "beta1b", "beta2b"};
  for (int i = 0; i < 6; ++i) {
    if (node == kBetas[i]) return [i](const HmmParams& p) { return p.theta(i % 3, i / 3); };
  }
  throw ConfigError("unknown node '" + node + "'");
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

int num_states_of(const PosteriorSamples& samples) {
  return samples.draws.empty() ? samples.config.num_states : samples.draws.front().params.num_states;
}

}  // namespace

std::vector<double> extract_node(const PosteriorSamples& samples, const std::string& node) {
  const Accessor get = node_accessor(node, num_states_of(samples));
  std::vector<double> out;
  out.reserve(samples.draws.size());
  for (const auto& d : samples.draws) out.push_back(get(d.params));
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SummaryRow summarize_values(const std::string& node, std::vector<double> values) {
  if (values.size() < 2) throw DataError("posterior summary needs at least 2 draws");
  SummaryRow row;
  row.node = node;
  row.mean = mean_of(values);
  row.sd = sd_of(values, row.mean);
  std::sort(values.begin(), values.end());
  row.q2_5 = quantile_sorted(values, 0.025);
  row.median = quantile_sorted(values, 0.5);
  row.q97_5 = quantile_sorted(values, 0.975);
  row.significant_nonzero = row.q2_5 > 0.0 || row.q97_5 < 0.0;
  // Keep the mean inside the sample range under rounding.
  row.mean = std::clamp(row.mean, values.front(), values.back());
  return row;
}

std::vector<SummaryRow> summarize_posterior(const PosteriorSamples& samples, const std::vector<std::string>& nodes) {
  std::vector<SummaryRow> rows;
  rows.reserve(nodes.size());
  for (const auto& n : nodes) rows.push_back(summarize_values(n, extract_node(samples, n)));
  return rows;
}

double mc_standard_error(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) throw DataError("MC standard error needs at least 2 draws");
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (batches < 2) return sd_of(values, mean_of(values)) / std::sqrt(static_cast<double>(n));
  const std::size_t size = n / batches;
  const std::size_t offset = n - batches * size;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < size; ++i) s += values[offset + b * size + i];
    means[b] = s / static_cast<double>(size);
  }
  return sd_of(means, mean_of(means)) / std::sqrt(static_cast<double>(batches));
}

KdeResult kde_export(const std::vector<double>& draws, int grid_points) {
  if (grid_points < 2) throw ConfigError("kde needs at least 2 grid points");
  if (draws.size() < 2) throw DataError("degenerate sample");
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw DataError("degenerate sample");
  const double n = static_cast<double>(sorted.size());
  const double sd = sd_of(sorted, mean_of(sorted));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  KdeResult out;
  out.bandwidth = 0.9 * spread * std::pow(n, -0.2);
  const double h = out.bandwidth;
  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  out.grid.resize(static_cast<std::size_t>(grid_points));
  out.density.resize(static_cast<std::size_t>(grid_points));
  for (int g = 0; g < grid_points; ++g) {
    const double x = lo + (hi - lo) * g / (grid_points - 1);
    // Only kernels within 8 bandwidths contribute above double precision.
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * h);
    const auto last = std::upper_bound(sorted.begin(), sorted.end(), x + 8.0 * h);
    double s = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (x - *it) / h;
      s += std::exp(-0.5 * u * u);
    }
    out.grid[static_cast<std::size_t>(g)] = x;
    out.density[static_cast<std::size_t>(g)] = s * norm;
  }
  return out;
}

Eigen::MatrixXd state_probabilities(const PosteriorSamples& samples) {
  if (samples.draws.empty()) throw DataError("no retained draws");
  const int k = num_states_of(samples);
  const Eigen::Index n = samples.num_periods();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, k);
  for (const auto& d : samples.draws) {
    for (Eigen::Index t = 0; t < n; ++t) counts(t, d.path[static_cast<std::size_t>(t)] - 1) += 1.0;
  }
  return counts / static_cast<double>(samples.draws.size());
}

ActivityProfile state_activity_means(const PosteriorSamples& samples) {
  if (num_states_of(samples) != 2) {
    throw ConfigError("activity means are defined for 2 states only; use modal-state reporting for K > 2");
  }
  const Eigen::MatrixXd probs = state_probabilities(samples);
  ActivityProfile out;
  out.prob_active.assign(probs.col(1).data(), probs.col(1).data() + probs.rows());
  return out;
}

ActivityProfile scaled_state_means(const PosteriorSamples& samples) {
  const Eigen::MatrixXd probs = state_probabilities(samples);
  const auto k = probs.cols();
  const Eigen::VectorXd levels = Eigen::VectorXd::LinSpaced(k, 0.0, 1.0);
  const Eigen::VectorXd means = probs * levels;
  ActivityProfile out;
  out.prob_active.assign(means.data(), means.data() + means.size());
  for (auto& p : out.prob_active) p = std::clamp(p, 0.0, 1.0);
  return out;
}

std::vector<int> modal_states(const PosteriorSamples& samples) {
  const Eigen::MatrixXd probs = state_probabilities(samples);
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    Eigen::Index best = 0;
    probs.row(t).maxCoeff(&best);
    out[static_cast<std::size_t>(t)] = static_cast<int>(best) + 1;
  }
  return out;
}

ClassificationScore classify_and_score(const ActivityProfile& profile, const std::vector<double>& actual_spend,
                                       double cutoff) {
  if (profile.prob_active.size() != actual_spend.size()) {
    throw DataError("activity profile has " + std::to_string(profile.prob_active.size()) + " periods, spend series has " +
                    std::to_string(actual_spend.size()));
  }
  ClassificationScore s;
  s.cutoff = cutoff;
  for (std::size_t t = 0; t < actual_spend.size(); ++t) {
    const bool predicted = profile.prob_active[t] >= cutoff;
    const bool actual = actual_spend[t] > 0.0;
    if (actual) {
      ++s.presence_total;
      if (predicted) ++s.presence_correct;
    } else {
      ++s.absence_total;
      if (!predicted) ++s.absence_correct;
    }
  }
  s.overall_total = s.presence_total + s.absence_total;
  s.overall_correct = s.presence_correct + s.absence_correct;
  return s;
}

std::string config_fingerprint(const PriorSpec& priors, const GibbsConfig& config) {
  const nlohmann::json j = {{"priors", priors.to_json()}, {"gibbs", config.to_json()}};
  return fingerprint(j.dump());
}

nlohmann::json BiasComparison::to_json() const {
  return {{"beta1c_with", beta1c_with},   {"beta1c_without", beta1c_without}, {"difference", difference},
          {"mcse_with", mcse_with},       {"mcse_without", mcse_without},     {"combined_mcse", combined_mcse},
          {"config_fingerprint", config_fingerprint}};
}

BiasComparison bias_comparison(const ResidualPairs& residuals, const Eigen::VectorXd& z, const PriorSpec& priors,
                               const GibbsConfig& config) {
  GibbsConfig full = config;
  full.latent_states = true;
  GibbsConfig reduced = config;
  reduced.latent_states = false;
  const PosteriorSamples with = pool_chains(run_chains(residuals, z, priors, full));
  const PosteriorSamples without = pool_chains(run_chains(residuals, z, priors, reduced));
  const std::vector<double> w = extract_node(with, "beta1a");
  const std::vector<double> wo = extract_node(without, "beta1a");
  BiasComparison out;
  out.beta1c_with = mean_of(w);
  out.beta1c_without = mean_of(wo);
  out.difference = out.beta1c_with - out.beta1c_without;
  out.mcse_with = mc_standard_error(w);
  out.mcse_without = mc_standard_error(wo);
  out.combined_mcse = std::hypot(out.mcse_with, out.mcse_without);
  out.config_fingerprint = config_fingerprint(priors, config);
  return out;
}

PipelineResult fit_pipeline(const TransformedSeries& data, const RegressionSpec& focal, const RegressionSpec& competitor,
                            const PriorSpec& priors, const GibbsConfig& config) {
  PipelineResult r;
  r.focal_fit = fit_ols(data, focal);
  r.competitor_fit = fit_ols(data, competitor);
  r.residuals = extract_residual_pairs(r.focal_fit, r.competitor_fit);
  r.samples = pool_chains(run_chains(r.residuals, data.z, priors, config));
  return r;
}

std::vector<RollingEntry> rolling_refit(const TransformedSeries& data, const RegressionSpec& focal,
                                        const RegressionSpec& competitor, const PriorSpec& priors,
                                        const GibbsConfig& config, const RollingOptions& options) {
  const auto total = static_cast<int>(data.size());
  if (options.step < 1) throw ConfigError("rolling step must be >= 1");
  if (options.fixed_width < 0) throw ConfigError("rolling window width must be >= 0");
  const int min_rows = static_cast<int>(std::max(focal.predictors.size(), competitor.predictors.size())) + 2;
  const int smallest_window = options.fixed_width > 0 ? std::min(options.fixed_width, options.start_period) : options.start_period;
  if (smallest_window < min_rows) {
    throw ConfigError("rolling window too small: " + std::to_string(smallest_window) + " periods, need at least " +
                      std::to_string(min_rows));
  }
  if (options.start_period > total) throw ConfigError("rolling start period beyond the end of the data");

  std::vector<int> periods;
  for (int t = options.start_period; t <= total; t += options.step) periods.push_back(t);
  std::vector<RollingEntry> entries(periods.size());
  std::vector<std::exception_ptr> errors(periods.size());
  const std::vector<std::string> nodes = all_nodes(config.num_states);

  auto work = [&](std::size_t i) {
    try {
      const int t = periods[i];
      const int first = options.fixed_width > 0 ? std::max(0, t - options.fixed_width) : 0;
      const PipelineResult fit = fit_pipeline(data.slice(first, t), focal, competitor, priors, config);
      RollingEntry& e = entries[i];
      e.period = t;
      e.window_start = first + 1;
      e.summary = summarize_posterior(fit.samples, nodes);
      e.beta1c_with = mean_of(extract_node(fit.samples, "beta1a"));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), periods.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < periods.size(); i += workers) work(i);
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return entries;
}

namespace {

std::vector<std::string> summary_cells(const SummaryRow& r) {
  return {r.node,
          format_double(r.mean),
          format_double(r.sd),
          format_double(r.q2_5),
          format_double(r.median),
          format_double(r.q97_5),
          r.significant_nonzero ? "true" : "false"};
}

}  // namespace

std::string posterior_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = join_csv_row({"node", "mean", "sd", "q2_5", "median", "q97_5", "significant"});
  for (const auto& r : rows) out += join_csv_row(summary_cells(r));
  return out;
}

std::string activity_profile_csv(const ActivityProfile& profile, const std::optional<std::vector<double>>& actual_spend) {
  std::string out = join_csv_row({"period", "prob_active", "actual_active"});
  for (std::size_t t = 0; t < profile.prob_active.size(); ++t) {
    std::string actual;
    if (actual_spend) actual = (*actual_spend)[t] > 0.0 ? "1" : "0";
    out += join_csv_row({std::to_string(t + 1), format_double(profile.prob_active[t]), actual});
  }
  return out;
}

std::string classification_csv(const ClassificationScore& s) {
  std::string out = join_csv_row({"measure", "correct", "total", "rate", "cutoff"});
  auto row = [&](const char* name, int c, int n, double rate) {
    out += join_csv_row({name, std::to_string(c), std::to_string(n), format_double(rate), format_double(s.cutoff)});
  };
  row("presence", s.presence_correct, s.presence_total, s.presence_rate());
  row("absence", s.absence_correct, s.absence_total, s.absence_rate());
  row("overall", s.overall_correct, s.overall_total, s.overall_rate());
  return out;
}

std::string density_csv(const KdeResult& kde) {
  std::string out = join_csv_row({"grid", "density"});
  for (std::size_t i = 0; i < kde.grid.size(); ++i) {
    out += join_csv_row({format_double(kde.grid[i]), format_double(kde.density[i])});
  }
  return out;
}

std::string draws_csv(const PosteriorSamples& samples) {
  const std::vector<std::string> nodes = all_nodes(num_states_of(samples));
  std::vector<Accessor> getters;
  for (const auto& n : nodes) getters.push_back(node_accessor(n, num_states_of(samples)));
  std::vector<std::string> header{"draw"};
  header.insert(header.end(), nodes.begin(), nodes.end());
  std::string out = join_csv_row(header);
  std::vector<std::string> cells(header.size());
  for (std::size_t i = 0; i < samples.draws.size(); ++i) {
    cells[0] = std::to_string(i + 1);
    for (std::size_t j = 0; j < getters.size(); ++j) cells[j + 1] = format_double(getters[j](samples.draws[i].params));
    out += join_csv_row(cells);
  }
  return out;
}

std::string paths_csv(const PosteriorSamples& samples) {
  const auto n = static_cast<std::size_t>(samples.num_periods());
  std::vector<std::string> header;
  for (std::size_t t = 0; t < n; ++t) header.push_back("x" + std::to_string(t + 1));
  std::string out = join_csv_row(header);
  for (const auto& d : samples.draws) {
    std::string line;
    for (std::size_t t = 0; t < n; ++t) {
      if (t) line += ',';
      line += std::to_string(d.path[t]);
    }
    out += line + '\n';
  }
  return out;
}

std::string rolling_csv(const std::vector<RollingEntry>& entries) {
  std::string out = join_csv_row({"period", "window_start", "node", "mean", "sd", "q2_5", "median", "q97_5", "significant"});
  for (const auto& e : entries) {
    for (const auto& r : e.summary) {
      std::vector<std::string> cells{std::to_string(e.period), std::to_string(e.window_start)};
      const auto rest = summary_cells(r);
      cells.insert(cells.end(), rest.begin(), rest.end());
      out += join_csv_row(cells);
    }
  }
  return out;
}

std::string node_file_stem(const std::string& node) {
  std::string out;
  for (char c : node) {
    if (c == '[' || c == ',') {
      out += '_';
    } else if (c != ']') {
      out += c;
    }
  }
  return out;
}

}  // namespace rivalhmm
