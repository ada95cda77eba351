#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hhf/dsp.hpp"
#include "hhf/recording.hpp"
#include "hhf/synth.hpp"

using namespace hhf;

namespace {

// Train of Gaussian R waves at fixed RR, baseline-free.
std::vector<double> gaussian_train(double seconds, double rr_s, double sigma_samples, double amp = 1200.0) {
  std::vector<double> x(static_cast<std::size_t>(seconds * kFs), 0.0);
  for (double t = 0.5; t < seconds; t += rr_s) {
    const double c = t * kFs;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = static_cast<double>(i) - c;
      x[i] += amp * std::exp(-d * d / (2 * sigma_samples * sigma_samples));
    }
  }
  return x;
}

}  // namespace

TEST_CASE("60 bpm for 10 s yields ten R peaks") {
  const auto x = gaussian_train(10.0, 1.0, qrs_sigma_for_width(12.0));
  const auto peaks = detect_r_peaks(x, kFs);
  REQUIRE(peaks.size() == 10);
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const double expected = (0.5 + static_cast<double>(i)) * kFs;
    CHECK(std::abs(static_cast<double>(peaks[i]) - expected) <= 2.0);
  }
}

TEST_CASE("flat line has no peaks") {
  std::vector<double> x(10 * kFs, 0.0);
  CHECK(detect_r_peaks(x, kFs).empty());
}

TEST_CASE("QRS width of 12 samples reads as 93.75 ms") {
  const auto x = gaussian_train(10.0, 1.0, qrs_sigma_for_width(12.0));
  const auto peaks = detect_r_peaks(x, kFs);
  REQUIRE(peaks.size() >= 3);
  for (std::size_t i = 1; i + 1 < peaks.size(); ++i) {
    const auto q = delineate_qrs(x, peaks[i], kFs);
    REQUIRE(q.ok);
    const double ms = (q.offset - q.onset) / kFs * 1000.0;
    CHECK(std::abs(ms - 93.75) <= 1000.0 / kFs);
  }
}

TEST_CASE("qrs_sigma_for_width satisfies the slope-threshold equation") {
  // Independent check: the slope of a unit Gaussian at the half width must be
  // kQrsSlopeFraction of its maximum slope (attained at one sigma).
  for (double w : {8.0, 12.0, 20.0}) {
    const double s = qrs_sigma_for_width(w);
    auto slope = [&](double t) { return t / (s * s) * std::exp(-t * t / (2 * s * s)); };
    CHECK(slope(w / 2) / slope(s) == doctest::Approx(kQrsSlopeFraction).epsilon(1e-9));
    CHECK(w / 2 > s);
  }
}

TEST_CASE("highpass removes a constant offset and keeps in-band tone") {
  const std::size_t n = 60 * kFs;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 500.0 + 100.0 * std::sin(2 * std::numbers::pi * 10.0 * i / kFs);
  const auto y = highpass(x, 0.5, kFs);
  double mean = 0, peak = 0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) {
    mean += y[i];
    peak = std::max(peak, std::abs(y[i]));
  }
  mean /= static_cast<double>(n / 2);
  CHECK(std::abs(mean) < 1.0);
  CHECK(peak == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("filtfilt is zero phase") {
  const std::size_t n = 30 * kFs;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * 2.0 * i / kFs);
  const Biquad lp = Biquad::lowpass(20.0, kFs);
  const auto y = filtfilt(std::span<const Biquad>(&lp, 1), x);
  double maxdiff = 0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) maxdiff = std::max(maxdiff, std::abs(y[i] - x[i]));
  CHECK(maxdiff < 1e-2);
}
