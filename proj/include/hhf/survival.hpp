#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hhf/common.hpp"

namespace hhf {

struct SurvivalRow {
  double time = 0;  // days from the exam
  bool event = false;
};

struct KmStep {
  double time = 0;
  std::size_t at_risk = 0;
  std::size_t events = 0;
  std::size_t censored = 0;
  double survival = 1;  // S(t) just after `time`
};

// Product-limit estimate, one step per distinct time.
std::vector<KmStep> kaplan_meier(std::span<const SurvivalRow> rows);
double survival_at(std::span<const KmStep> curve, double t);

struct LogrankResult {
  double chi2 = 0;
  double p = 1;
  double observed_a = 0;
  double expected_a = 0;
  double variance = 0;
};
LogrankResult logrank(std::span<const SurvivalRow> a, std::span<const SurvivalRow> b);

// Time from exam to event when the event falls on or before `censor`, else
// time to `censor` without an event.
SurvivalRow survival_row(Date exam, std::optional<Date> event, Date censor);

}  // namespace hhf
