#include "hhf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "hhf/common.hpp"

namespace hhf {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, std::size_t& n_pos,
                  std::size_t& n_neg) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "scores and labels differ in length");
  n_pos = n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::ShapeMismatch, "non-finite score");
    (labels[i] ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::SingleClass, "need both classes");
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos, n_neg;
  check_inputs(scores, labels, n_pos, n_neg);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank is an integer, so the statistic is exact.
  std::uint64_t rank2_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const std::uint64_t rank2 = (i + 1) + j;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) rank2_sum += rank2;
    i = j;
  }
  const std::uint64_t u2 = rank2_sum - static_cast<std::uint64_t>(n_pos) * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos, n_neg;
  check_inputs(scores, labels, n_pos, n_neg);
  const auto idx = order_by_score_desc(scores);
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) (labels[idx[i++]] ? tp : fp)++;
    out.push_back({s, static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  return out;
}

PrCurve pr_curve(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos, n_neg;
  check_inputs(scores, labels, n_pos, n_neg);
  const auto idx = order_by_score_desc(scores);
  PrCurve c;
  c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) (labels[idx[i++]] ? tp : fp)++;
    c.points.push_back({s, static_cast<double>(tp) / n_pos, static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const auto& a = c.points[i - 1];
    const auto& b = c.points[i];
    c.auprc += (b.recall - a.recall) * 0.5 * (a.precision + b.precision);
  }
  return c;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw Error(ErrorCode::ShapeMismatch, "percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BootstrapResult bootstrap_auroc(std::span<const double> scores, std::span<const int> labels, std::size_t iters,
                                std::size_t n_pos, std::size_t n_neg, std::uint64_t seed) {
  std::size_t np, nn;
  check_inputs(scores, labels, np, nn);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(i);

  BootstrapResult r;
  r.distribution.resize(iters);
#pragma omp parallel for schedule(static)
  for (std::size_t it = 0; it < iters; ++it) {
    std::mt19937_64 rng(mix_seed(seed, it));
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1), pick_neg(0, neg.size() - 1);
    std::vector<double> s;
    std::vector<int> l;
    s.reserve(n_pos + n_neg);
    l.reserve(n_pos + n_neg);
    for (std::size_t k = 0; k < n_pos; ++k) {
      s.push_back(scores[pos[pick_pos(rng)]]);
      l.push_back(1);
    }
    for (std::size_t k = 0; k < n_neg; ++k) {
      s.push_back(scores[neg[pick_neg(rng)]]);
      l.push_back(0);
    }
    r.distribution[it] = auroc(s, l);
  }
  r.mean = std::accumulate(r.distribution.begin(), r.distribution.end(), 0.0) / static_cast<double>(iters);
  r.ci_low = percentile(r.distribution, 0.025);
  r.ci_high = percentile(r.distribution, 0.975);
  return r;
}

TTest compare_models(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::ShapeMismatch, "t-test needs two samples of size >= 2");
  auto mean_var = [](std::span<const double> x, double& m, double& v) {
    m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    v = 0;
    for (double e : x) v += (e - m) * (e - m);
  };
  double ma, ssa, mb, ssb;
  mean_var(a, ma, ssa);
  mean_var(b, mb, ssb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double dof = na + nb - 2;
  const double pooled = (ssa + ssb) / dof;
  const double se = std::sqrt(pooled * (1 / na + 1 / nb));
  TTest r;
  if (ma == mb) return r;
  if (se == 0) {
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0;
    return r;
  }
  r.t = (ma - mb) / se;
  boost::math::students_t dist(dof);
  r.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))), 0.0, 1.0);
  return r;
}

std::string_view to_string(RiskGroup g) {
  switch (g) {
    case RiskGroup::Low: return "low";
    case RiskGroup::Moderate: return "moderate";
    case RiskGroup::High: return "high";
  }
  return "?";
}

double specificity_threshold(std::span<const double> scores, std::span<const int> labels, double target) {
  std::size_t n_pos, n_neg;
  check_inputs(scores, labels, n_pos, n_neg);
  std::vector<double> neg;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!labels[i]) neg.push_back(scores[i]);
  std::sort(neg.begin(), neg.end());
  std::vector<double> cand(scores.begin(), scores.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  for (double t : cand) {
    const auto below = static_cast<std::size_t>(std::lower_bound(neg.begin(), neg.end(), t) - neg.begin());
    if (static_cast<double>(below) >= target * static_cast<double>(n_neg)) return t;
  }
  return std::nextafter(cand.back(), std::numeric_limits<double>::infinity());
}

RiskGroups risk_groups(std::span<const double> scores, std::span<const int> labels) {
  RiskGroups g;
  g.t70 = specificity_threshold(scores, labels, 0.70);
  g.t90 = specificity_threshold(scores, labels, 0.90);
  g.group.reserve(scores.size());
  for (double s : scores)
    g.group.push_back(s < g.t70 ? RiskGroup::Low : (s < g.t90 ? RiskGroup::Moderate : RiskGroup::High));
  return g;
}

OddsRatio odds_ratio(std::size_t a_events, std::size_t a_n, std::size_t b_events, std::size_t b_n) {
  if (a_events > a_n || b_events > b_n) throw Error(ErrorCode::ShapeMismatch, "more events than subjects");
  double a = static_cast<double>(a_events), b = static_cast<double>(a_n - a_events);
  double c = static_cast<double>(b_events), d = static_cast<double>(b_n - b_events);
  OddsRatio r;
  if (a == 0 || b == 0 || c == 0 || d == 0) {
    a += 0.5, b += 0.5, c += 0.5, d += 0.5;
    r.haldane = true;
  }
  r.value = (a * d) / (b * c);
  return r;
}

long nns_from_rate(double rate_per_1000py, double irr) {
  if (!(rate_per_1000py > 0)) throw Error(ErrorCode::ZeroExposure, "incidence rate must be positive for NNS");
  return static_cast<long>(std::ceil(1000.0 / (rate_per_1000py * (1.0 - irr))));
}

Incidence incidence_and_nns(double person_years, double events, double irr) {
  if (!(person_years > 0)) throw Error(ErrorCode::ZeroExposure, "no person-time at risk");
  Incidence r;
  r.rate_per_1000py = 1000.0 * events / person_years;
  r.nns = events > 0 ? nns_from_rate(r.rate_per_1000py, irr) : 0;
  return r;
}

ErrorGroups error_groups(std::span<const double> scores, std::span<const int> labels,
                         std::span<const std::int32_t> days_to_endpoint, double threshold) {
  if (scores.size() != labels.size() || scores.size() != days_to_endpoint.size())
    throw Error(ErrorCode::ShapeMismatch, "error_groups inputs differ in length");
  ErrorGroups g;
  std::vector<double> neg_scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool high = scores[i] >= threshold;
    if (labels[i]) {
      (high ? g.tp : g.fn).push_back(i);
    } else {
      (high ? g.fp : g.tn).push_back(i);
      neg_scores.push_back(scores[i]);
    }
  }
  g.bins = {{"0-2y", 0, 730, 0, {}}, {"2-4y", 730, 1461, 0, {}}, {"4-5y", 1461, 1827, 0, {}}};
  for (auto& bin : g.bins) {
    std::vector<double> s = neg_scores;
    std::vector<int> l(s.size(), 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!labels[i] || days_to_endpoint[i] < bin.lo_days || days_to_endpoint[i] >= bin.hi_days) continue;
      s.push_back(scores[i]);
      l.push_back(1);
      ++bin.n_pos;
    }
    if (bin.n_pos > 0 && !neg_scores.empty()) bin.auroc = auroc(s, l);
  }
  return g;
}

}  // namespace hhf
