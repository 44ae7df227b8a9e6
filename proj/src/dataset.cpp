#include "rivalhmm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rivalhmm/error.hpp"
#include "rivalhmm/io.hpp"

namespace rivalhmm {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

std::string cell_error(std::size_t row, const std::string& column, const std::string& what) {
  return "row " + std::to_string(row) + ", column '" + column + "': " + what;
}

}  // namespace

Date Date::parse(const std::string& iso) {
  Date d;
  char tail = 0;
  if (std::sscanf(iso.c_str(), "%4d-%2d-%2d%c", &d.year, &d.month, &d.day, &tail) != 3 || iso.size() != 10) {
    throw DataError("unparseable date '" + iso + "' (expected YYYY-MM-DD)");
  }
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month)) {
    throw DataError("invalid calendar date '" + iso + "'");
  }
  return d;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

// Civil-from-days algorithms after H. Hinnant.
long Date::days_since_epoch() const {
  const int y = year - (month <= 2 ? 1 : 0);
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned mp = static_cast<unsigned>(month + (month > 2 ? -3 : 9));
  const unsigned doy = (153 * mp + 2) / 5 + static_cast<unsigned>(day) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

Date Date::from_days(long z) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  Date d;
  d.day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  d.month = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  d.year = static_cast<int>(yoe) + static_cast<int>(era) * 400 + (d.month <= 2 ? 1 : 0);
  return d;
}

int Date::day_of_year() const {
  int doy = day;
  for (int m = 1; m < month; ++m) doy += days_in_month(year, m);
  return doy;
}

int Date::week_of_year() const { return std::min((day_of_year() - 1) / 7 + 1, 52); }

ColumnMapping ColumnMapping::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("column mapping must be a JSON object");
  ColumnMapping m;
  auto required = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw ConfigError(std::string("column mapping is missing string field '") + key + "'");
    }
    return j.at(key).get<std::string>();
  };
  if (j.contains("date")) m.date = j.at("date").get<std::string>();
  if (j.contains("period") && !j.at("period").is_null()) m.period = j.at("period").get<std::string>();
  m.sales_a = required("sales_a");
  m.sales_b = required("sales_b");
  m.spend_a = required("spend_a");
  if (j.contains("spend_b_actual") && !j.at("spend_b_actual").is_null()) {
    m.spend_b_actual = j.at("spend_b_actual").get<std::string>();
  }
  if (j.contains("covariates")) m.covariates = j.at("covariates").get<std::vector<std::string>>();
  if (j.contains("indicators")) m.indicators = j.at("indicators").get<std::vector<std::string>>();
  for (const auto& ind : m.indicators) {
    if (std::find(m.covariates.begin(), m.covariates.end(), ind) == m.covariates.end()) {
      throw ConfigError("indicator '" + ind + "' is not listed among covariates");
    }
  }
  return m;
}

nlohmann::json ColumnMapping::to_json() const {
  nlohmann::json j;
  j["date"] = date;
  j["period"] = period ? nlohmann::json(*period) : nlohmann::json(nullptr);
  j["sales_a"] = sales_a;
  j["sales_b"] = sales_b;
  j["spend_a"] = spend_a;
  j["spend_b_actual"] = spend_b_actual ? nlohmann::json(*spend_b_actual) : nlohmann::json(nullptr);
  j["covariates"] = covariates;
  j["indicators"] = indicators;
  return j;
}

ColumnMapping ColumnMapping::swapped() const {
  if (!spend_b_actual) throw ConfigError("role swap requires the competitor spend column");
  ColumnMapping m = *this;
  std::swap(m.sales_a, m.sales_b);
  m.spend_b_actual = spend_a;
  m.spend_a = *spend_b_actual;
  return m;
}

const std::vector<double>& SeriesTable::covariate(const std::string& name) const {
  for (const auto& c : covariates) {
    if (c.name == name) return c.values;
  }
  throw DataError("unknown covariate '" + name + "'");
}

void SeriesTable::validate() const {
  const std::size_t n = size();
  if (n < 2) throw DataError("series needs at least 2 rows, got " + std::to_string(n));
  auto check_len = [&](std::size_t len, const std::string& what) {
    if (len != n) throw DataError("column '" + what + "' has " + std::to_string(len) + " rows, expected " + std::to_string(n));
  };
  check_len(date.size(), mapping.date);
  check_len(sales_a.size(), mapping.sales_a);
  check_len(sales_b.size(), mapping.sales_b);
  check_len(spend_a.size(), mapping.spend_a);
  if (spend_b_actual) check_len(spend_b_actual->size(), mapping.spend_b_actual.value_or("spend_b_actual"));
  for (const auto& c : covariates) check_len(c.values.size(), c.name);

  const std::string period_name = mapping.period.value_or("period");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = i + 1;
    if (i > 0 && period[i] != period[i - 1] + 1) {
      throw DataError(cell_error(row, period_name, "period indices must be consecutive and increasing"));
    }
    if (i > 0 && date[i].days_since_epoch() <= date[i - 1].days_since_epoch()) {
      throw DataError(cell_error(row, mapping.date, "dates must be strictly increasing"));
    }
    if (!(sales_a[i] >= 1.0) || !std::isfinite(sales_a[i])) {
      throw DataError(cell_error(row, mapping.sales_a, "count must be >= 1"));
    }
    if (!(sales_b[i] >= 1.0) || !std::isfinite(sales_b[i])) {
      throw DataError(cell_error(row, mapping.sales_b, "count must be >= 1"));
    }
    if (!(spend_a[i] >= 0.0) || !std::isfinite(spend_a[i])) {
      throw DataError(cell_error(row, mapping.spend_a, "spend must be finite and >= 0"));
    }
    if (spend_b_actual && (!((*spend_b_actual)[i] >= 0.0) || !std::isfinite((*spend_b_actual)[i]))) {
      throw DataError(cell_error(row, *mapping.spend_b_actual, "spend must be finite and >= 0"));
    }
    for (const auto& c : covariates) {
      if (!std::isfinite(c.values[i])) throw DataError(cell_error(row, c.name, "value must be finite"));
    }
  }
  for (const auto& ind : mapping.indicators) {
    const auto& v = covariate(ind);
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] != 0.0 && v[i] != 1.0) throw DataError(cell_error(i + 1, ind, "indicator must be 0 or 1"));
    }
  }
}

SeriesTable SeriesTable::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > size()) throw DataError("slice out of range");
  auto cut = [&](const auto& v) { return std::decay_t<decltype(v)>(v.begin() + first, v.begin() + last); };
  SeriesTable t;
  t.period = cut(period);
  t.date = cut(date);
  t.sales_a = cut(sales_a);
  t.sales_b = cut(sales_b);
  for (const auto& c : covariates) t.covariates.push_back({c.name, cut(c.values)});
  t.spend_a = cut(spend_a);
  if (spend_b_actual) t.spend_b_actual = cut(*spend_b_actual);
  t.mapping = mapping;
  return t;
}

SeriesTable SeriesTable::head(std::size_t n) const { return slice(0, n); }

SeriesTable parse_series_csv(const std::string& text, const ColumnMapping& mapping) {
  const CsvTable csv = parse_csv(text);
  if (csv.rows.empty()) throw DataError("no data rows");

  auto index_of = [&](const std::string& name) {
    const int idx = csv.column_index(name);
    if (idx < 0) throw DataError("missing column '" + name + "'");
    return static_cast<std::size_t>(idx);
  };
  auto number = [&](std::size_t r, std::size_t col) {
    const auto& row = csv.rows[r];
    double v = 0.0;
    if (col >= row.size() || !parse_double(row[col], v)) {
      const std::string cell = col < row.size() ? row[col] : "";
      throw DataError(cell_error(r + 1, csv.header[col], "unparseable value '" + cell + "'"));
    }
    return v;
  };

  const std::size_t date_col = index_of(mapping.date);
  const std::size_t a_col = index_of(mapping.sales_a);
  const std::size_t b_col = index_of(mapping.sales_b);
  const std::size_t za_col = index_of(mapping.spend_a);
  std::optional<std::size_t> zb_col;
  if (mapping.spend_b_actual) zb_col = index_of(*mapping.spend_b_actual);
  std::optional<std::size_t> period_col;
  if (mapping.period) period_col = index_of(*mapping.period);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : mapping.covariates) cov_cols.push_back(index_of(c));

  SeriesTable t;
  t.mapping = mapping;
  const std::size_t n = csv.rows.size();
  for (const auto& c : mapping.covariates) t.covariates.push_back({c, {}});
  if (zb_col) t.spend_b_actual.emplace();
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = csv.rows[r];
    if (row.size() != csv.header.size()) {
      throw DataError("row " + std::to_string(r + 1) + ": expected " + std::to_string(csv.header.size()) +
                      " fields, found " + std::to_string(row.size()));
    }
    if (period_col) {
      const double p = number(r, *period_col);
      if (p != std::floor(p)) throw DataError(cell_error(r + 1, *mapping.period, "period must be an integer"));
      t.period.push_back(static_cast<int>(p));
    } else {
      t.period.push_back(static_cast<int>(r + 1));
    }
    try {
      t.date.push_back(Date::parse(row[date_col]));
    } catch (const DataError& e) {
      throw DataError(cell_error(r + 1, mapping.date, e.what()));
    }
    t.sales_a.push_back(number(r, a_col));
    t.sales_b.push_back(number(r, b_col));
    t.spend_a.push_back(number(r, za_col));
    if (zb_col) t.spend_b_actual->push_back(number(r, *zb_col));
    for (std::size_t c = 0; c < cov_cols.size(); ++c) t.covariates[c].values.push_back(number(r, cov_cols[c]));
  }
  t.validate();
  return t;
}

SeriesTable load_series_csv(const std::string& path, const ColumnMapping& mapping) {
  return parse_series_csv(read_file(path), mapping);
}

std::string series_to_csv(const SeriesTable& t) {
  const auto& m = t.mapping;
  std::vector<std::string> header;
  if (m.period) header.push_back(*m.period);
  header.push_back(m.date);
  header.push_back(m.sales_a);
  header.push_back(m.sales_b);
  for (const auto& c : t.covariates) header.push_back(c.name);
  header.push_back(m.spend_a);
  if (t.spend_b_actual) header.push_back(m.spend_b_actual.value_or("spend_b_actual"));
  std::string out = join_csv_row(header);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::vector<std::string> row;
    if (m.period) row.push_back(std::to_string(t.period[i]));
    row.push_back(t.date[i].to_string());
    row.push_back(format_double(t.sales_a[i]));
    row.push_back(format_double(t.sales_b[i]));
    for (const auto& c : t.covariates) row.push_back(format_double(c.values[i]));
    row.push_back(format_double(t.spend_a[i]));
    if (t.spend_b_actual) row.push_back(format_double((*t.spend_b_actual)[i]));
    out += join_csv_row(row);
  }
  return out;
}

std::vector<HistoryRow> parse_history_csv(const std::string& text) {
  const CsvTable csv = parse_csv(text);
  if (csv.rows.empty()) throw DataError("no data rows");
  const int date_col = csv.column_index("date");
  const int week_col = csv.column_index("week");
  const int count_col = csv.column_index("count");
  const int valid_col = csv.column_index("valid");
  if (count_col < 0) throw DataError("missing column 'count'");
  if (date_col < 0 && week_col < 0) throw DataError("history needs a 'date' or 'week' column");

  std::vector<HistoryRow> rows;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& cells = csv.rows[r];
    HistoryRow h;
    double v = 0.0;
    if (week_col >= 0) {
      if (!parse_double(cells.at(week_col), v) || v != std::floor(v) || v < 1 || v > 53) {
        throw DataError(cell_error(r + 1, "week", "week must be an integer in 1..53"));
      }
      h.week = static_cast<int>(v);
    } else {
      h.week = Date::parse(cells.at(date_col)).week_of_year();
    }
    if (!parse_double(cells.at(count_col), h.count)) throw DataError(cell_error(r + 1, "count", "unparseable value"));
    if (valid_col >= 0) {
      if (!parse_double(cells.at(valid_col), v) || (v != 0.0 && v != 1.0)) {
        throw DataError(cell_error(r + 1, "valid", "indicator must be 0 or 1"));
      }
      h.valid = v == 1.0;
    }
    rows.push_back(h);
  }
  return rows;
}

SeasonalityIndex build_seasonality_index(const std::vector<HistoryRow>& history) {
  if (history.empty()) throw DataError("seasonality history is empty");
  std::array<double, 52> sum{};
  std::array<int, 52> n{};
  for (const auto& h : history) {
    if (h.week < 1 || h.week > 53) throw DataError("week label " + std::to_string(h.week) + " outside 1..53");
    if (!h.valid || !(h.count > 0.0) || !std::isfinite(h.count)) continue;
    const auto w = static_cast<std::size_t>(std::min(h.week, 52) - 1);
    sum[w] += h.count;
    ++n[w];
  }
  SeasonalityIndex idx;
  for (std::size_t w = 0; w < 52; ++w) {
    if (n[w] == 0) throw DataError("week " + std::to_string(w + 1) + " has no valid observations");
    idx.week_value[w] = sum[w] / n[w];
  }
  return idx;
}

TransformedSeries transform_dataset(const SeriesTable& table) {
  const auto n = static_cast<Eigen::Index>(table.size());
  TransformedSeries out;
  out.y1.resize(n);
  out.y2.resize(n);
  out.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.y1[i] = std::log(table.sales_a[static_cast<std::size_t>(i)]);
    out.y2[i] = std::log(table.sales_b[static_cast<std::size_t>(i)]);
    out.z[i] = table.spend_a[static_cast<std::size_t>(i)] / 1e6;
  }
  for (const auto& c : table.covariates) {
    out.covariates.emplace_back(c.name, Eigen::Map<const Eigen::VectorXd>(c.values.data(), n));
  }
  return out;
}

bool TransformedSeries::has_column(const std::string& name) const {
  if (name == "y1" || name == "y2" || name == "z") return true;
  return std::any_of(covariates.begin(), covariates.end(), [&](const auto& c) { return c.first == name; });
}

const Eigen::VectorXd& TransformedSeries::column(const std::string& name) const {
  if (name == "y1") return y1;
  if (name == "y2") return y2;
  if (name == "z") return z;
  for (const auto& c : covariates) {
    if (c.first == name) return c.second;
  }
  throw ConfigError("unknown column '" + name + "'");
}

TransformedSeries TransformedSeries::slice(Eigen::Index first, Eigen::Index last) const {
  if (first < 0 || first > last || last > size()) throw DataError("slice out of range");
  const Eigen::Index n = last - first;
  TransformedSeries out;
  out.y1 = y1.segment(first, n);
  out.y2 = y2.segment(first, n);
  out.z = z.segment(first, n);
  for (const auto& c : covariates) out.covariates.emplace_back(c.first, c.second.segment(first, n));
  return out;
}

TransformedSeries TransformedSeries::head(Eigen::Index n) const { return slice(0, n); }

namespace {

VariableSummary summarize_column(const std::string& name, const std::vector<double>& v) {
  VariableSummary s;
  s.variable = name;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  s.min = *lo;
  s.max = *hi;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  // Guard against the mean drifting outside [min, max] by rounding.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

}  // namespace

std::vector<VariableSummary> summarize_variables(const SeriesTable& table) {
  if (table.size() < 2) throw DataError("summary needs at least 2 rows");
  std::vector<VariableSummary> rows;
  rows.push_back(summarize_column(table.mapping.sales_a, table.sales_a));
  rows.push_back(summarize_column(table.mapping.sales_b, table.sales_b));
  for (const auto& c : table.covariates) rows.push_back(summarize_column(c.name, c.values));
  rows.push_back(summarize_column(table.mapping.spend_a, table.spend_a));
  if (table.spend_b_actual) {
    rows.push_back(summarize_column(table.mapping.spend_b_actual.value_or("spend_b_actual"), *table.spend_b_actual));
  }
  return rows;
}

std::string summary_to_csv(const std::vector<VariableSummary>& rows) {
  std::string out = join_csv_row({"variable", "min", "max", "mean", "sd"});
  for (const auto& r : rows) {
    out += join_csv_row({r.variable, format_double(r.min), format_double(r.max), format_double(r.mean), format_double(r.sd)});
  }
  return out;
}

}  // namespace rivalhmm
