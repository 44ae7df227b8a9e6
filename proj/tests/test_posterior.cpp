#include <doctest.h>

#include <cmath>

#include "rivalhmm/error.hpp"
#include "rivalhmm/posterior.hpp"
#include "rivalhmm/synthetic.hpp"

using namespace rivalhmm;

namespace {

PosteriorSamples fake_samples(const std::vector<StatePath>& paths) {
  PosteriorSamples s;
  for (const auto& p : paths) {
    Draw d{HmmParams::uniform(2), p};
    s.draws.push_back(d);
  }
  return s;
}

}  // namespace

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(quantile_sorted(v, 0.5) == 3);
  CHECK(quantile_sorted(v, 0.25) == 2);
  CHECK(quantile_sorted(v, 0.1) == doctest::Approx(1.4));
  CHECK(quantile_sorted(v, 1.0) == 5);
  const SummaryRow r = summarize_values("x", {5, 1, 4, 2, 3});
  CHECK(r.mean == 3);
  CHECK(r.sd == doctest::Approx(std::sqrt(2.5)));
  CHECK(r.significant_nonzero);
  CHECK_FALSE(summarize_values("y", {-1, 1, 0.5}).significant_nonzero);
}

TEST_CASE("node extraction") {
  PosteriorSamples s = fake_samples({{1, 2}, {2, 2}});
  s.draws[1].params.theta(2, 1) = 0.7;
  s.draws[1].params.P << 0.9, 0.1, 0.2, 0.8;
  CHECK(extract_node(s, "beta2b")[1] == 0.7);
  CHECK(extract_node(s, "P[2,1]")[1] == 0.2);
  CHECK(extract_node(s, "sigma[1,2]")[0] == 0.0);
  CHECK_THROWS_AS(extract_node(s, "P[3,1]"), ConfigError);
  CHECK_THROWS_AS(extract_node(s, "gamma"), ConfigError);
  CHECK(all_nodes(2).size() == 2 + 4 + 6 + 4 + 4);
  CHECK(node_file_stem("P[1,2]") == "P_1_2");
}

TEST_CASE("kernel density integrates to one") {
  Rng rng(3);
  std::vector<double> d;
  for (int i = 0; i < 5000; ++i) d.push_back(rng.normal() * 0.3 + 1.0);
  const KdeResult k = kde_export(d, 512);
  double area = 0.0;
  for (std::size_t i = 1; i < k.grid.size(); ++i) area += 0.5 * (k.density[i] + k.density[i - 1]) * (k.grid[i] - k.grid[i - 1]);
  CHECK(std::abs(area - 1.0) < 0.01);
  CHECK(k.grid.front() == doctest::Approx(*std::min_element(d.begin(), d.end()) - 3 * k.bandwidth));
  try {
    kde_export({2.0, 2.0, 2.0});
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "degenerate sample");
  }
}

TEST_CASE("batch-means standard error on independent draws") {
  Rng rng(5);
  std::vector<double> d;
  for (int i = 0; i < 40000; ++i) d.push_back(rng.normal());
  CHECK(mc_standard_error(d) == doctest::Approx(1.0 / 200.0).epsilon(0.2));
}

TEST_CASE("classification counts at the cutoff") {
  const PosteriorSamples s = fake_samples({{2, 2, 1, 1}, {2, 1, 1, 2}});
  const ActivityProfile p = state_activity_means(s);
  CHECK(p.prob_active == std::vector<double>{1.0, 0.5, 0.0, 0.5});
  const ClassificationScore sc = classify_and_score(p, {10.0, 0.0, 0.0, 0.0}, 0.5);
  CHECK(sc.presence_total == 1);
  CHECK(sc.presence_correct == 1);
  CHECK(sc.absence_total == 3);
  CHECK(sc.absence_correct == 1);  // ties count as active
  CHECK(sc.overall_correct == 2);
  CHECK(sc.overall_rate() == 0.5);
  CHECK_THROWS_AS(classify_and_score(p, {1.0}, 0.5), DataError);
  const std::string csv = classification_csv(sc);
  CHECK(csv.find("overall,2,4,0.5,0.5") != std::string::npos);
}

TEST_CASE("three-state activity uses scaled means and modal states") {
  PosteriorSamples s;
  for (const StatePath& p : std::vector<StatePath>{{1, 3, 2}, {1, 3, 3}, {2, 3, 1}}) s.draws.push_back({HmmParams::uniform(3), p});
  CHECK_THROWS_AS(state_activity_means(s), ConfigError);
  const ActivityProfile a = scaled_state_means(s);
  CHECK(a.prob_active[0] == doctest::Approx(1.0 / 6));
  CHECK(a.prob_active[1] == doctest::Approx(1.0));
  CHECK(modal_states(s) == std::vector<int>{1, 3, 1});
  CHECK(state_probabilities(s)(2, 2) == doctest::Approx(1.0 / 3));
}

TEST_CASE("rolling re-fit window bookkeeping") {
  GeneratorSpec spec = default_generator_spec(40, 2);
  spec.params.theta(2, 1) = 0.8;
  const auto ds = generate_dataset(spec);
  const TransformedSeries data = transform_dataset(*ds.table);
  GibbsConfig c;
  c.burn_in = 20;
  c.kept_draws = 50;
  const RegressionSpec focal = default_focal_spec(), comp = default_competitor_spec();

  const auto expanding = rolling_refit(data, focal, comp, PriorSpec{}, c, {30, 4, 0});
  REQUIRE(expanding.size() == 3);
  CHECK(expanding[0].period == 30);
  CHECK(expanding[2].period == 38);
  CHECK(expanding[2].window_start == 1);

  const auto fixed = rolling_refit(data, focal, comp, PriorSpec{}, c, {30, 5, 20});
  REQUIRE(fixed.size() == 3);
  CHECK(fixed[1].window_start == 16);

  const auto single = rolling_refit(data, focal, comp, PriorSpec{}, c, {40, 1, 0});
  REQUIRE(single.size() == 1);
  const PipelineResult full = fit_pipeline(data, focal, comp, PriorSpec{}, c);
  CHECK(single[0].beta1c_with == summarize_values("b", extract_node(full.samples, "beta1a")).mean);
  CHECK_THROWS_AS(rolling_refit(data, focal, comp, PriorSpec{}, c, {41, 1, 0}), ConfigError);
}

TEST_CASE("bias comparison carries a fingerprint and consistent difference") {
  GeneratorSpec spec = default_generator_spec(60, 4);
  spec.stage1.reset();
  const auto ds = generate_dataset(spec);
  GibbsConfig c;
  c.burn_in = 50;
  c.kept_draws = 400;
  const BiasComparison b = bias_comparison(ds.residuals, spec.z, PriorSpec{}, c);
  CHECK(b.difference == b.beta1c_with - b.beta1c_without);
  CHECK(b.combined_mcse == doctest::Approx(std::hypot(b.mcse_with, b.mcse_without)));
  CHECK(b.config_fingerprint.size() == 16);
  CHECK(b.to_json().contains("difference"));
}
