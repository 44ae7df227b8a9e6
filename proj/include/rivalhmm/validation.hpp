#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rivalhmm/hmm.hpp"

namespace rivalhmm {

struct ValidationCheck {
  std::string name;
  std::string tolerance;
  bool passed = false;
  /// Worst observed deviation, in the units of the tolerance.
  double observed = 0.0;
  std::string detail;
};

/// Swappable pieces so tests can inject faults and confirm the suite fails.
struct ValidationHooks {
  std::function<StatePath(const Eigen::MatrixXd&, const Eigen::MatrixXd&, Rng&)> backward_sampler = backward_sample;
  int ffbs_draws = 200000;
  int moment_draws = 100000;
  int relabel_draws = 1000;
  std::uint64_t seed = 20090630;
};

/// Oracle checks: FFBS against path enumeration, scaled against log-space
/// filtering, conjugate-sampler moments, relabel invariance.
std::vector<ValidationCheck> run_validation_suite(const ValidationHooks& hooks = {});

nlohmann::json validation_report_json(const std::vector<ValidationCheck>& checks);

/// Random K = 2 parameters near the calibrated case study (for oracle tests).
HmmParams random_case_study_params(Rng& rng);

}  // namespace rivalhmm
