#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rivalhmm/dataset.hpp"
#include "rivalhmm/gibbs.hpp"
#include "rivalhmm/posterior.hpp"
#include "rivalhmm/stage1.hpp"
#include "rivalhmm/validation.hpp"

namespace rivalhmm {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
  kExitValidation = 5,
};

/// Everything `impute` needs. Relative paths resolve against the config
/// file's directory.
struct RunConfig {
  std::string data_path;
  ColumnMapping columns;
  std::vector<std::string> focal_predictors{"seasonality", "gift"};
  std::vector<std::string> competitor_predictors{"djia"};
  /// Exchange focal and competitor roles (the competitor's spend becomes the
  /// observed one and the focal activity is imputed).
  bool role_swap = false;
  PriorSpec priors;
  GibbsConfig gibbs;
  double cutoff = 0.5;
  std::string output_dir;
  std::optional<RollingOptions> rolling;
  bool bias = true;
  bool export_draws = true;
  bool export_paths = true;
  /// Empty selects the transition-matrix and covariance nodes.
  std::vector<std::string> density_nodes;
  int density_grid_points = 512;
  /// Optional history CSV from which a seasonality covariate is built.
  std::optional<std::string> seasonality_history;
  std::string seasonality_column = "seasonality";

  static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir);
  nlohmann::json to_json() const;

  /// Mapping and stage-1 specs with role_swap applied.
  ColumnMapping effective_columns() const;
  RegressionSpec focal_spec() const;
  RegressionSpec competitor_spec() const;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "RIVALHMM_OUTPUT_DIR";

int cmd_impute(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
               std::ostream& out, std::ostream& err);

int cmd_simulate(const std::optional<std::string>& params_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, std::ostream& out, std::ostream& err);

int cmd_validate(const std::optional<std::string>& out_dir, const ValidationHooks& hooks, std::ostream& out,
                 std::ostream& err);

int cmd_report(const std::string& from_dir, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Summaries from a draws.csv export (one column per node).
std::vector<SummaryRow> summarize_draws_csv(const std::string& text);

}  // namespace rivalhmm
