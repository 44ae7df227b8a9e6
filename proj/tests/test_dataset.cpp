#include <doctest.h>

#include <cmath>

#include "rivalhmm/dataset.hpp"
#include "rivalhmm/error.hpp"
#include "rivalhmm/synthetic.hpp"

using namespace rivalhmm;

namespace {

ColumnMapping small_mapping() {
  ColumnMapping m;
  m.period = "period";
  m.sales_a = "checking";
  m.sales_b = "mmda";
  m.spend_a = "spend";
  m.spend_b_actual = "rival_spend";
  m.covariates = {"gift", "djia"};
  m.indicators = {"gift"};
  return m;
}

const char* kSmallCsv =
    "period,date,checking,mmda,gift,djia,spend,rival_spend\n"
    "1,2006-07-01,100,50,0,11000.5,0,0\n"
    "2,2006-07-08,120,55,1,11020,250000,1000\n"
    "3,2006-07-15,90,60,0,10990.25,125000.5,0\n";

}  // namespace

TEST_CASE("dates round-trip and week numbering") {
  const Date d = Date::parse("2006-07-01");
  CHECK(d.to_string() == "2006-07-01");
  CHECK(Date::from_days(d.days_since_epoch()) == d);
  CHECK(Date::parse("2006-01-01").week_of_year() == 1);
  CHECK(Date::parse("2006-01-08").week_of_year() == 2);
  CHECK(Date::parse("2008-12-31").week_of_year() == 52);  // day 366 folds into week 52
  CHECK_THROWS_AS(Date::parse("2006-02-30"), DataError);
  CHECK_THROWS_AS(Date::parse("07/01/2006"), DataError);
}

TEST_CASE("series csv round-trips through the writer") {
  const SeriesTable t = parse_series_csv(kSmallCsv, small_mapping());
  REQUIRE(t.size() == 3);
  CHECK(t.sales_a[1] == 120);
  CHECK(t.covariate("djia")[2] == 10990.25);
  CHECK((*t.spend_b_actual)[1] == 1000);
  const SeriesTable back = parse_series_csv(series_to_csv(t), small_mapping());
  CHECK(back == t);
}

TEST_CASE("transform takes logs and scales spend to millions") {
  const TransformedSeries s = transform_dataset(parse_series_csv(kSmallCsv, small_mapping()));
  CHECK(s.y1[0] == doctest::Approx(std::log(100.0)).epsilon(1e-15));
  CHECK(s.y2[2] == doctest::Approx(std::log(60.0)).epsilon(1e-15));
  CHECK(s.z[1] == doctest::Approx(0.25));
  CHECK(s.column("gift")[1] == 1.0);
  CHECK_THROWS_AS(s.column("nope"), ConfigError);
}

TEST_CASE("table validation names the offending cell") {
  auto expect_error = [](const std::string& csv, const std::string& fragment) {
    try {
      parse_series_csv(csv, small_mapping());
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
    }
  };
  std::string zero_count = kSmallCsv;
  zero_count.replace(zero_count.find("120"), 3, "0");
  expect_error(zero_count, "row 2, column 'checking'");

  std::string neg_spend = kSmallCsv;
  neg_spend.replace(neg_spend.find("250000"), 6, "-5");
  expect_error(neg_spend, "column 'spend'");

  std::string bad_gift = kSmallCsv;
  bad_gift.replace(bad_gift.find(",1,11020"), 3, ",2,");
  expect_error(bad_gift, "column 'gift'");

  std::string gap = kSmallCsv;
  gap.replace(gap.find("3,2006-07-15"), 1, "4");
  expect_error(gap, "period");

  expect_error("period,date,checking,mmda,gift,djia,spend,rival_spend\n", "no data rows");
  expect_error("period,date,checking,mmda,gift,spend,rival_spend\n1,2006-07-01,1,1,0,0,0\n", "missing column 'djia'");
}

TEST_CASE("seasonality index averages valid history per week") {
  std::vector<HistoryRow> h;
  for (int w = 1; w <= 52; ++w) h.push_back({w, 100.0 + w, true});
  h.push_back({3, 203.0, true});
  h.push_back({3, 9999.0, false});
  h.push_back({53, 500.0, true});
  const SeasonalityIndex idx = build_seasonality_index(h);
  CHECK(idx.at_week(1) == 101.0);
  CHECK(idx.at_week(3) == doctest::Approx((103.0 + 203.0) / 2));
  CHECK(idx.at_week(52) == doctest::Approx((152.0 + 500.0) / 2));

  std::vector<HistoryRow> missing;
  for (int w = 1; w <= 52; ++w) missing.push_back({w, 10.0, w != 7});
  try {
    build_seasonality_index(missing);
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "week 7 has no valid observations");
  }
}

TEST_CASE("history csv accepts dates or week labels") {
  const auto rows = parse_history_csv("date,count,valid\n2005-01-03,10,1\n2005-01-10,12,0\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].week == 1);
  CHECK(rows[1].week == 2);
  CHECK_FALSE(rows[1].valid);
  CHECK(parse_history_csv("week,count\n53,4\n")[0].week == 53);
}

TEST_CASE("variable summaries use the sample standard deviation") {
  const auto rows = summarize_variables(parse_series_csv(kSmallCsv, small_mapping()));
  const auto it = std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.variable == "checking"; });
  REQUIRE(it != rows.end());
  CHECK(it->min == 90);
  CHECK(it->max == 120);
  CHECK(it->mean == doctest::Approx(310.0 / 3));
  const double m = 310.0 / 3;
  const double var = ((100 - m) * (100 - m) + (120 - m) * (120 - m) + (90 - m) * (90 - m)) / 2;
  CHECK(it->sd == doctest::Approx(std::sqrt(var)));
}

TEST_CASE("role swap exchanges focal and competitor columns") {
  const ColumnMapping s = small_mapping().swapped();
  CHECK(s.sales_a == "mmda");
  CHECK(s.sales_b == "checking");
  CHECK(s.spend_a == "rival_spend");
  CHECK(*s.spend_b_actual == "spend");
  ColumnMapping no_actual = small_mapping();
  no_actual.spend_b_actual.reset();
  CHECK_THROWS_AS(no_actual.swapped(), ConfigError);
}

TEST_CASE("synthetic tables pass validation and window slicing preserves rows") {
  const auto ds = generate_dataset(default_generator_spec(30, 5));
  REQUIRE(ds.table);
  CHECK_NOTHROW(ds.table->validate());
  const SeriesTable mid = ds.table->slice(10, 20);
  CHECK(mid.size() == 10);
  CHECK(mid.period.front() == 11);
  CHECK(mid.sales_b[3] == ds.table->sales_b[13]);
}
