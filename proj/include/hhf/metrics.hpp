#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hhf {

// Mann-Whitney AUROC with midranks (ties count one half).
double auroc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double threshold, fpr, tpr;
};
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

struct PrPoint {
  double threshold, recall, precision;
};
struct PrCurve {
  std::vector<PrPoint> points;  // starts at recall 0, precision 1
  double auprc = 0;             // trapezoid over recall
};
PrCurve pr_curve(std::span<const double> scores, std::span<const int> labels);

struct BootstrapResult {
  double mean = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::vector<double> distribution;
};

// Resamples n_pos positives and n_neg negatives with replacement per iteration.
BootstrapResult bootstrap_auroc(std::span<const double> scores, std::span<const int> labels, std::size_t iters,
                                std::size_t n_pos, std::size_t n_neg, std::uint64_t seed);

// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> v, double q);

struct TTest {
  double t = 0;
  double p = 1;
};
// Two-sample Student t-test with pooled variance.
TTest compare_models(std::span<const double> a, std::span<const double> b);

enum class RiskGroup { Low, Moderate, High };
std::string_view to_string(RiskGroup g);

struct RiskGroups {
  double t70 = 0;
  double t90 = 0;
  std::vector<RiskGroup> group;
};

// Smallest observed score whose specificity (negatives strictly below) reaches
// the target; nextafter(max score) when none does.
double specificity_threshold(std::span<const double> scores, std::span<const int> labels, double target);
RiskGroups risk_groups(std::span<const double> scores, std::span<const int> labels);

struct OddsRatio {
  double value = 1;
  bool haldane = false;  // 0.5 added to every cell
};
OddsRatio odds_ratio(std::size_t a_events, std::size_t a_n, std::size_t b_events, std::size_t b_n);

struct Incidence {
  double rate_per_1000py = 0;
  long nns = 0;
};
long nns_from_rate(double rate_per_1000py, double irr = 0.60);
Incidence incidence_and_nns(double person_years, double events, double irr = 0.60);

struct ErrorGroups {
  std::vector<std::size_t> tp, fp, tn, fn;
  struct Bin {
    std::string name;
    std::int32_t lo_days, hi_days;  // [lo, hi)
    std::size_t n_pos = 0;
    std::optional<double> auroc;     // empty when the bin has no positives
  };
  std::vector<Bin> bins;
};
// days_to_endpoint is read for positives only.
ErrorGroups error_groups(std::span<const double> scores, std::span<const int> labels,
                         std::span<const std::int32_t> days_to_endpoint, double threshold);

}  // namespace hhf
