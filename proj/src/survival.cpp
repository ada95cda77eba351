#include "hhf/survival.hpp"

#include <algorithm>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>

namespace hhf {

std::vector<KmStep> kaplan_meier(std::span<const SurvivalRow> rows) {
  std::map<double, std::pair<std::size_t, std::size_t>> at;  // time -> (events, censored)
  for (const auto& r : rows) {
    if (r.time < 0) throw Error(ErrorCode::ShapeMismatch, "negative survival time");
    auto& e = at[r.time];
    (r.event ? e.first : e.second)++;
  }
  std::vector<KmStep> curve;
  std::size_t n = rows.size();
  double s = 1.0;
  for (const auto& [t, ec] : at) {
    const auto [d, c] = ec;
    if (n > 0 && d > 0) s *= 1.0 - static_cast<double>(d) / static_cast<double>(n);
    curve.push_back({t, n, d, c, s});
    n -= d + c;
  }
  return curve;
}

double survival_at(std::span<const KmStep> curve, double t) {
  double s = 1.0;
  for (const auto& step : curve) {
    if (step.time > t) break;
    s = step.survival;
  }
  return s;
}

LogrankResult logrank(std::span<const SurvivalRow> a, std::span<const SurvivalRow> b) {
  struct Count {
    std::size_t da = 0, db = 0, ca = 0, cb = 0;
  };
  std::map<double, Count> at;
  for (const auto& r : a) (r.event ? at[r.time].da : at[r.time].ca)++;
  for (const auto& r : b) (r.event ? at[r.time].db : at[r.time].cb)++;
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  LogrankResult res;
  for (const auto& [t, c] : at) {
    const double d = static_cast<double>(c.da + c.db), n = na + nb;
    if (d > 0 && n > 0) {
      res.observed_a += static_cast<double>(c.da);
      res.expected_a += d * na / n;
      if (n > 1) res.variance += d * (na / n) * (nb / n) * (n - d) / (n - 1);
    }
    na -= static_cast<double>(c.da + c.ca);
    nb -= static_cast<double>(c.db + c.cb);
  }
  const double diff = res.observed_a - res.expected_a;
  if (res.variance > 0 && diff != 0) {
    res.chi2 = diff * diff / res.variance;
    boost::math::chi_squared dist(1.0);
    res.p = boost::math::cdf(boost::math::complement(dist, res.chi2));
  }
  return res;
}

SurvivalRow survival_row(Date exam, std::optional<Date> event, Date censor) {
  if (event && *event <= censor) return {static_cast<double>(std::max(0, *event - exam)), true};
  return {static_cast<double>(std::max(0, censor - exam)), false};
}

}  // namespace hhf
