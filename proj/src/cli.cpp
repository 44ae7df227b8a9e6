#include "rivalhmm/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "rivalhmm/error.hpp"
#include "rivalhmm/io.hpp"
#include "rivalhmm/synthetic.hpp"

namespace rivalhmm {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

nlohmann::json load_json_file(const std::string& path, const char* what) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError(std::string("cannot read ") + what + " '" + path + "'");
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + what + " '" + path + "': " + e.what());
  }
}

void emit_error(std::ostream& err, int code, const char* kind, const std::string& message) {
  const nlohmann::json record = {{"error", {{"kind", kind}, {"exit_code", code}, {"message", message}}}};
  err << record.dump() << '\n';
}

// Runs `body`, mapping exception categories onto exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    emit_error(err, kExitConfig, "config", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    emit_error(err, kExitData, "data", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    emit_error(err, kExitNumerical, "numerical", e.what());
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    emit_error(err, kExitConfig, "config", e.what());
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    emit_error(err, kExitData, "data", e.what());
    return kExitData;
  }
}

std::string default_output_dir() {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "rivalhmm_out";
}

// Collected outputs, written only after the whole pipeline has succeeded.
class OutputSet {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& [k, v] : files_) n.push_back(k);
    return n;
  }
  void write(const std::string& dir) const {
    for (const auto& [name, content] : files_) write_file_atomic((fs::path(dir) / name).string(), content);
  }

 private:
  std::map<std::string, std::string> files_;
};

nlohmann::json fit_json(const Stage1Fit& fit) {
  nlohmann::json terms = nlohmann::json::array();
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    nlohmann::json t = {{"term", j == 0 ? std::string("intercept") : fit.spec.predictors[static_cast<std::size_t>(j - 1)]},
                        {"coefficient", fit.coefficients[j]},
                        {"p_value", fit.p_values[j]}};
    t["standardized"] = j == 0 ? nlohmann::json(nullptr) : nlohmann::json(fit.standardized_coefficients[j - 1]);
    terms.push_back(t);
  }
  return {{"response", fit.spec.response}, {"terms", terms}, {"r_square", fit.r_square}};
}

nlohmann::json score_json(const ClassificationScore& s) {
  return {{"cutoff", s.cutoff},
          {"presence_correct", s.presence_correct},
          {"presence_total", s.presence_total},
          {"absence_correct", s.absence_correct},
          {"absence_total", s.absence_total},
          {"overall_correct", s.overall_correct},
          {"overall_total", s.overall_total},
          {"presence_rate", s.presence_rate()},
          {"absence_rate", s.absence_rate()},
          {"overall_accuracy", s.overall_rate()}};
}

std::vector<std::string> default_density_nodes(int num_states) {
  std::vector<std::string> nodes;
  for (int j = 1; j <= num_states; ++j)
    for (int k = 1; k <= num_states; ++k) nodes.push_back("P[" + std::to_string(j) + "," + std::to_string(k) + "]");
  for (const char* s : {"sigma[1,1]", "sigma[1,2]", "sigma[2,2]"}) nodes.emplace_back(s);
  return nodes;
}

void add_seasonality(SeriesTable& table, const SeasonalityIndex& index, const std::string& column) {
  NamedColumn col{column, {}};
  for (const auto& d : table.date) col.values.push_back(index.at_week(d.week_of_year()));
  for (auto& c : table.covariates) {
    if (c.name == column) {
      c = std::move(col);
      return;
    }
  }
  table.covariates.push_back(std::move(col));
  table.mapping.covariates.push_back(column);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  if (!j.contains("data") || !j.at("data").is_string()) throw ConfigError("config is missing string field 'data'");
  c.data_path = resolve(j.at("data").get<std::string>(), base_dir);
  if (!j.contains("columns")) throw ConfigError("config is missing 'columns'");
  c.columns = ColumnMapping::from_json(j.at("columns"));
  if (j.contains("stage1")) {
    const auto& s = j.at("stage1");
    if (s.contains("focal_predictors")) c.focal_predictors = s.at("focal_predictors").get<std::vector<std::string>>();
    if (s.contains("competitor_predictors")) {
      c.competitor_predictors = s.at("competitor_predictors").get<std::vector<std::string>>();
    }
  }
  c.role_swap = j.value("role_swap", false);
  if (j.contains("priors")) c.priors = PriorSpec::from_json(j.at("priors"));
  if (j.contains("gibbs")) c.gibbs = GibbsConfig::from_json(j.at("gibbs"));
  c.cutoff = j.value("cutoff", 0.5);
  if (!(c.cutoff >= 0.0 && c.cutoff <= 1.0)) throw ConfigError("cutoff must lie in [0, 1]");
  if (j.contains("output_dir") && j.at("output_dir").is_string()) c.output_dir = resolve(j.at("output_dir").get<std::string>(), base_dir);
  if (j.contains("rolling") && !j.at("rolling").is_null()) {
    const auto& r = j.at("rolling");
    RollingOptions o;
    o.start_period = r.at("start").get<int>();
    o.step = r.value("step", 1);
    o.fixed_width = r.value("fixed_width", 0);
    c.rolling = o;
  }
  c.bias = j.value("bias", true);
  if (j.contains("exports")) {
    const auto& e = j.at("exports");
    c.export_draws = e.value("draws", true);
    c.export_paths = e.value("paths", true);
    if (e.contains("density_nodes")) c.density_nodes = e.at("density_nodes").get<std::vector<std::string>>();
    c.density_grid_points = e.value("density_grid_points", 512);
  }
  if (j.contains("seasonality") && !j.at("seasonality").is_null()) {
    const auto& s = j.at("seasonality");
    c.seasonality_history = resolve(s.at("history").get<std::string>(), base_dir);
    c.seasonality_column = s.value("column", std::string("seasonality"));
  }
  c.priors.validate(c.gibbs.num_states);
  if (c.role_swap && !c.columns.spend_b_actual) throw ConfigError("role_swap requires columns.spend_b_actual");
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["data"] = data_path;
  j["columns"] = columns.to_json();
  j["stage1"] = {{"focal_predictors", focal_predictors}, {"competitor_predictors", competitor_predictors}};
  j["role_swap"] = role_swap;
  j["priors"] = priors.to_json();
  j["gibbs"] = gibbs.to_json();
  j["cutoff"] = cutoff;
  j["output_dir"] = output_dir;
  j["rolling"] = rolling ? nlohmann::json{{"start", rolling->start_period}, {"step", rolling->step}, {"fixed_width", rolling->fixed_width}}
                         : nlohmann::json(nullptr);
  j["bias"] = bias;
  j["exports"] = {{"draws", export_draws},
                  {"paths", export_paths},
                  {"density_nodes", density_nodes},
                  {"density_grid_points", density_grid_points}};
  j["seasonality"] = seasonality_history ? nlohmann::json{{"history", *seasonality_history}, {"column", seasonality_column}}
                                         : nlohmann::json(nullptr);
  return j;
}

ColumnMapping RunConfig::effective_columns() const { return role_swap ? columns.swapped() : columns; }

RegressionSpec RunConfig::focal_spec() const { return {"y1", role_swap ? competitor_predictors : focal_predictors}; }

RegressionSpec RunConfig::competitor_spec() const { return {"y2", role_swap ? focal_predictors : competitor_predictors}; }

int cmd_impute(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::exists(config_path)) throw ConfigError("config file '" + config_path + "' not found");
    const std::string base = fs::path(config_path).parent_path().string();
    RunConfig cfg = RunConfig::from_json(load_json_file(config_path, "config"), base);
    if (seed) cfg.gibbs.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    if (cfg.output_dir.empty()) cfg.output_dir = default_output_dir();

    SeriesTable table = load_series_csv(cfg.data_path, cfg.effective_columns());
    if (cfg.seasonality_history) {
      add_seasonality(table, build_seasonality_index(parse_history_csv(read_file(*cfg.seasonality_history))),
                      cfg.seasonality_column);
    }
    const TransformedSeries data = transform_dataset(table);
    OutputSet files;
    files.add("variables_summary.csv", summary_to_csv(summarize_variables(table)));

    const PipelineResult fit = fit_pipeline(data, cfg.focal_spec(), cfg.competitor_spec(), cfg.priors, cfg.gibbs);
    files.add("stage1_focal.csv", fit_report_csv(fit.focal_fit));
    files.add("stage1_competitor.csv", fit_report_csv(fit.competitor_fit));

    const int k = cfg.gibbs.num_states;
    const std::vector<SummaryRow> summary = summarize_posterior(fit.samples, all_nodes(k));
    files.add("posterior_summary.csv", posterior_summary_csv(summary));

    nlohmann::json skipped = nlohmann::json::array();
    const auto nodes = cfg.density_nodes.empty() ? default_density_nodes(k) : cfg.density_nodes;
    for (const auto& node : nodes) {
      try {
        files.add("density_" + node_file_stem(node) + ".csv",
                  density_csv(kde_export(extract_node(fit.samples, node), cfg.density_grid_points)));
      } catch (const DataError& e) {
        skipped.push_back({{"node", node}, {"reason", e.what()}});
      }
    }

    const ActivityProfile profile = k == 2 ? state_activity_means(fit.samples) : scaled_state_means(fit.samples);
    files.add("activity_profile.csv", activity_profile_csv(profile, table.spend_b_actual));

    // The output location is not part of the model run; leaving it out keeps
    // reports from different directories byte-identical.
    nlohmann::json run_config = cfg.to_json();
    run_config.erase("output_dir");
    nlohmann::json report;
    report["config"] = run_config;
    report["config_fingerprint"] = fingerprint(run_config.dump());
    report["seed"] = cfg.gibbs.seed;
    report["num_periods"] = data.size();
    report["role_swap"] = cfg.role_swap;
    report["labels"] = {{"focal", table.mapping.sales_a}, {"competitor", table.mapping.sales_b},
                        {"focal_spend", table.mapping.spend_a},
                        {"competitor_spend", table.mapping.spend_b_actual ? nlohmann::json(*table.mapping.spend_b_actual)
                                                                          : nlohmann::json(nullptr)}};
    report["stage1"] = {{"focal", fit_json(fit.focal_fit)}, {"competitor", fit_json(fit.competitor_fit)}};
    report["posterior"] = {{"retained_draws", fit.samples.draws.size()},
                           {"num_chains", fit.samples.num_chains},
                           {"relabel_count", fit.samples.relabel_count},
                           {"relabel_applied", fit.samples.relabel_applied},
                           {"activity_measure", k == 2 ? "prob_active" : "scaled_state_mean"}};
    if (!fit.samples.relabel_applied) report["posterior"]["note"] = "no identification rule for K > 2; labels unconstrained";
    if (!skipped.empty()) report["densities_skipped"] = skipped;

    if (table.spend_b_actual) {
      const ClassificationScore score = classify_and_score(profile, *table.spend_b_actual, cfg.cutoff);
      files.add("classification.csv", classification_csv(score));
      report["classification"] = score_json(score);
    } else {
      report["classification"] = nullptr;
    }
    if (cfg.bias) {
      const BiasComparison bias = bias_comparison(fit.residuals, data.z, cfg.priors, cfg.gibbs);
      files.add("bias.json", bias.to_json().dump(2) + "\n");
      report["bias"] = bias.to_json();
    }
    if (cfg.rolling) {
      const auto entries = rolling_refit(data, cfg.focal_spec(), cfg.competitor_spec(), cfg.priors, cfg.gibbs, *cfg.rolling);
      files.add("rolling.csv", rolling_csv(entries));
      nlohmann::json traj = nlohmann::json::array();
      for (const auto& e : entries) traj.push_back({{"period", e.period}, {"window_start", e.window_start}, {"beta1c_with", e.beta1c_with}});
      report["rolling"] = traj;
    }
    if (cfg.export_draws) files.add("draws.csv", draws_csv(fit.samples));
    if (cfg.export_paths) files.add("paths.csv", paths_csv(fit.samples));
    auto names = files.names();
    names.push_back("report.json");
    std::sort(names.begin(), names.end());
    report["outputs"] = names;
    files.add("report.json", report.dump(2) + "\n");
    files.write(cfg.output_dir);

    out << "wrote " << names.size() << " files to " << cfg.output_dir << '\n';
    if (report["classification"].is_object()) {
      out << "overall accuracy " << format_double(report["classification"]["overall_accuracy"].get<double>()) << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_simulate(const std::optional<std::string>& params_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    GeneratorSpec spec = params_path ? GeneratorSpec::from_json(load_json_file(*params_path, "generator spec"))
                                     : default_generator_spec();
    if (seed) spec.seed = *seed;
    if (!spec.stage1) throw ConfigError("simulate needs stage-1 truth to write an account-level table");
    const SyntheticDataset data = generate_dataset(spec);
    OutputSet files;
    files.add("synthetic.csv", series_to_csv(*data.table));
    nlohmann::json truth = {{"spec", spec.to_json()}, {"true_path", data.truth}};
    files.add("truth.json", truth.dump(2) + "\n");

    // Ready-to-run impute config for the generated table.
    nlohmann::json cfg;
    cfg["data"] = "synthetic.csv";
    cfg["columns"] = data.table->mapping.to_json();
    cfg["stage1"] = {{"focal_predictors", spec.stage1->focal.predictors},
                     {"competitor_predictors", spec.stage1->competitor.predictors}};
    cfg["gibbs"] = GibbsConfig{}.to_json();
    cfg["gibbs"]["seed"] = spec.seed;
    cfg["output_dir"] = "impute_out";
    files.add("impute_config.json", cfg.dump(2) + "\n");
    files.write(out_dir);
    out << "wrote " << spec.num_periods << " periods to " << (fs::path(out_dir) / "synthetic.csv").string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_validate(const std::optional<std::string>& out_dir, const ValidationHooks& hooks, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const auto checks = run_validation_suite(hooks);
    bool all = true;
    for (const auto& c : checks) {
      out << (c.passed ? "PASS " : "FAIL ") << c.name << " [" << c.tolerance << "] " << c.detail << '\n';
      all = all && c.passed;
    }
    if (out_dir) write_file_atomic((fs::path(*out_dir) / "validation.json").string(), validation_report_json(checks).dump(2) + "\n");
    if (!all) {
      std::string failed;
      for (const auto& c : checks) {
        if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
      }
      emit_error(err, kExitValidation, "validation", "failed checks: " + failed);
      return static_cast<int>(kExitValidation);
    }
    return static_cast<int>(kExitOk);
  });
}

std::vector<SummaryRow> summarize_draws_csv(const std::string& text) {
  const CsvTable csv = parse_csv(text);
  if (csv.rows.size() < 2) throw DataError("draws file needs at least 2 rows");
  std::vector<SummaryRow> rows;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (csv.header[c] == "draw") continue;
    std::vector<double> values;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      double v = 0.0;
      if (c >= csv.rows[r].size() || !parse_double(csv.rows[r][c], v)) {
        throw DataError("row " + std::to_string(r + 1) + ", column '" + csv.header[c] + "': unparseable value");
      }
      values.push_back(v);
    }
    rows.push_back(summarize_values(csv.header[c], std::move(values)));
  }
  return rows;
}

int cmd_report(const std::string& from_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto draws_path = fs::path(from_dir) / "draws.csv";
    if (!fs::exists(draws_path)) throw DataError("no draws.csv in '" + from_dir + "'");
    const auto rows = summarize_draws_csv(read_file(draws_path.string()));
    const std::string csv = posterior_summary_csv(rows);
    write_file_atomic((fs::path(from_dir) / "posterior_summary.csv").string(), csv);
    out << csv;
    return static_cast<int>(kExitOk);
  });
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Competitor activity imputation with a hidden Markov residual model"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  auto* impute = app.add_subcommand("impute", "Fit the model to a dataset described by a JSON config");
  impute->add_option("--config", config_path, "Run configuration (JSON)")->required();
  impute->add_option("--seed", seed, "Override the configured seed");
  impute->add_option("--out", out_dir, "Output directory");

  std::optional<std::string> params_path;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
  simulate->add_option("--params", params_path, "Generator spec (JSON); defaults to the calibrated spec");
  simulate->add_option("--seed", seed, "Override the generator seed");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  std::optional<std::string> validate_out;
  auto* validate = app.add_subcommand("validate", "Run the oracle validation suite");
  validate->add_option("--out", validate_out, "Directory for validation.json");

  std::string from_dir;
  auto* report = app.add_subcommand("report", "Re-render summary tables from stored draws");
  report->add_option("--from", from_dir, "Output directory of a previous impute run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  if (impute->parsed()) {
    const int code = cmd_impute(config_path, seed, out_dir, out, err);
    if (code == kExitConfig) err << impute->help();
    return code;
  }
  if (simulate->parsed()) return cmd_simulate(params_path, seed, sim_out, out, err);
  if (validate->parsed()) return cmd_validate(validate_out, ValidationHooks{}, out, err);
  return cmd_report(from_dir, out, err);
}

}  // namespace rivalhmm
