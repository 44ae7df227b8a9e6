#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace rivalhmm {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  static Date parse(const std::string& iso);  // YYYY-MM-DD
  std::string to_string() const;
  long days_since_epoch() const;
  static Date from_days(long days);
  int day_of_year() const;
  /// 7-day blocks from January 1; the trailing partial week 53 folds into 52.
  int week_of_year() const;

  friend bool operator==(const Date&, const Date&) = default;
};

/// Maps the roles of the weekly table onto CSV header names.
struct ColumnMapping {
  std::string date = "date";
  std::optional<std::string> period;
  std::string sales_a;
  std::string sales_b;
  std::string spend_a;
  std::optional<std::string> spend_b_actual;
  std::vector<std::string> covariates;
  /// Covariates restricted to {0, 1}.
  std::vector<std::string> indicators;

  static ColumnMapping from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Exchange focal and competitor roles. Requires spend_b_actual.
  ColumnMapping swapped() const;

  friend bool operator==(const ColumnMapping&, const ColumnMapping&) = default;
};

struct NamedColumn {
  std::string name;
  std::vector<double> values;

  friend bool operator==(const NamedColumn&, const NamedColumn&) = default;
};

struct SeriesTable {
  std::vector<int> period;
  std::vector<Date> date;
  std::vector<double> sales_a;
  std::vector<double> sales_b;
  std::vector<NamedColumn> covariates;
  std::vector<double> spend_a;
  std::optional<std::vector<double>> spend_b_actual;
  ColumnMapping mapping;

  std::size_t size() const { return period.size(); }
  const std::vector<double>& covariate(const std::string& name) const;

  /// Throws DataError when any table invariant is violated.
  void validate() const;

  /// First `n` rows.
  SeriesTable head(std::size_t n) const;
  /// Rows [first, last).
  SeriesTable slice(std::size_t first, std::size_t last) const;

  friend bool operator==(const SeriesTable&, const SeriesTable&) = default;
};

struct TransformedSeries {
  Eigen::VectorXd y1;  // ln(sales_a)
  Eigen::VectorXd y2;  // ln(sales_b)
  Eigen::VectorXd z;   // spend_a in millions
  std::vector<std::pair<std::string, Eigen::VectorXd>> covariates;

  Eigen::Index size() const { return y1.size(); }
  /// Lookup by "y1", "y2", "z" or a covariate name.
  const Eigen::VectorXd& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  TransformedSeries head(Eigen::Index n) const;
  TransformedSeries slice(Eigen::Index first, Eigen::Index last) const;
};

struct HistoryRow {
  int week = 1;  // 1..53
  double count = 0.0;
  bool valid = true;
};

struct SeasonalityIndex {
  std::array<double, 52> week_value{};

  double at_week(int week) const { return week_value.at(static_cast<std::size_t>(std::min(week, 52) - 1)); }
};

struct VariableSummary {
  std::string variable;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

SeriesTable load_series_csv(const std::string& path, const ColumnMapping& mapping);
SeriesTable parse_series_csv(const std::string& text, const ColumnMapping& mapping);
std::string series_to_csv(const SeriesTable& table);

/// History CSV: date,count[,valid]. Rows with valid=0 are kept but flagged.
std::vector<HistoryRow> parse_history_csv(const std::string& text);

SeasonalityIndex build_seasonality_index(const std::vector<HistoryRow>& history);

TransformedSeries transform_dataset(const SeriesTable& table);

std::vector<VariableSummary> summarize_variables(const SeriesTable& table);
std::string summary_to_csv(const std::vector<VariableSummary>& rows);

}  // namespace rivalhmm
