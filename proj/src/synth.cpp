#include "hhf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hhf/dsp.hpp"

namespace hhf {

namespace {

// Sum-of-Gaussians beat template; times in seconds relative to the R peak,
// amplitudes in microvolts. Not physiologically calibrated.
struct Wave {
  double amp_uv;
  double center_s;
  double sigma_s;
};

constexpr Wave kSinusP{120.0, -0.20, 0.025};
constexpr Wave kSinusT{300.0, 0.26, 0.050};
constexpr double kSinusR = 1200.0;
constexpr double kPvcR = 1600.0;
constexpr double kPvcWidthFactor = 2.5;
constexpr Wave kPvcT{-450.0, 0.32, 0.070};
constexpr double kPvcCoupling = 0.6;  // fraction of the sinus RR
constexpr double kAfWaveUv = 40.0;
constexpr double kAfWaveHz = 6.0;

void add_wave(std::vector<double>& sig, double r_time_s, const Wave& w) {
  const double c = (r_time_s + w.center_s) * kFs;
  const double sig_samples = w.sigma_s * kFs;
  const auto lo = static_cast<std::ptrdiff_t>(std::floor(c - 5.0 * sig_samples));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil(c + 5.0 * sig_samples));
  const auto n = static_cast<std::ptrdiff_t>(sig.size());
  const double inv = 1.0 / (2.0 * sig_samples * sig_samples);
  for (auto i = std::max<std::ptrdiff_t>(lo, 0); i <= std::min(hi, n - 1); ++i) {
    const double d = static_cast<double>(i) - c;
    sig[static_cast<std::size_t>(i)] += w.amp_uv * std::exp(-d * d * inv);
  }
}

double minute_of_day(const SynthSpec& spec, double t_s) {
  const double m = spec.start_time.minute_of_day + t_s / 60.0;
  return std::fmod(m, 1440.0);
}

double heart_rate(const SynthSpec& spec, double t_s) {
  const double hour = minute_of_day(spec, t_s) / 60.0;
  return spec.mean_hr + spec.hr_circadian_amp * std::cos(2.0 * std::numbers::pi * (hour - 15.0) / 24.0);
}

}  // namespace

double qrs_sigma_for_width(double width_samples) {
  // Half-width u*sigma where the Gaussian's slope falls to kQrsSlopeFraction
  // of its maximum: u exp(-u^2/2) = f exp(-1/2), u > 1.
  const double target = kQrsSlopeFraction * std::exp(-0.5);
  double lo = 1.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::exp(-0.5 * mid * mid) > target) lo = mid; else hi = mid;
  }
  return width_samples / (2.0 * 0.5 * (lo + hi));
}

void SynthSpec::validate() const {
  if (!(duration_h >= 20.0 && duration_h <= 30.0)) throw Error(ErrorCode::BadConfig, "duration_h outside [20, 30]");
  if (mean_hr <= 0 || hr_circadian_amp < 0 || pvc_burst_rate < 0 || noise_rms < 0 || af_episode_prob < 0 ||
      af_episode_prob > 1 || pvc_burst_daytime_bias < 0 || pvc_burst_daytime_bias > 1 ||
      hr_circadian_amp >= mean_hr || qrs_width_samples <= 0 || burst_min_s <= 0 || burst_max_s < burst_min_s) {
    throw Error(ErrorCode::BadConfig, "synthetic spec has an out-of-range rate");
  }
}

SyntheticRecording synthesize_annotated(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto n = static_cast<std::size_t>(std::llround(spec.duration_h * 3600.0 * kFs));
  const double dur_s = static_cast<double>(n) / kFs;

  SyntheticRecording out;

  // Burst placement.
  std::poisson_distribution<int> n_bursts_dist(spec.pvc_burst_rate * spec.duration_h);
  const int n_bursts = spec.pvc_burst_rate > 0 ? n_bursts_dist(rng) : 0;
  std::vector<std::pair<double, double>> bursts;
  for (int b = 0; b < n_bursts; ++b) {
    const double len = spec.burst_min_s + (spec.burst_max_s - spec.burst_min_s) * unif(rng);
    const bool daytime = unif(rng) < spec.pvc_burst_daytime_bias;
    double start = unif(rng) * (dur_s - len);
    if (daytime) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        const double m0 = minute_of_day(spec, start);
        const double m1 = m0 + len / 60.0;
        if (m0 >= kDaytimeBeginMin && m1 <= kDaytimeEndMin) placed = true;
        else start = unif(rng) * (dur_s - len);
      }
      if (!placed) continue;
    }
    bursts.emplace_back(start, start + len);
  }
  std::sort(bursts.begin(), bursts.end());

  std::pair<double, double> af{-1.0, -1.0};
  if (spec.af_episode_prob > 0 && unif(rng) < spec.af_episode_prob) {
    const double len = (30.0 + 90.0 * unif(rng)) * 60.0;
    const double start = unif(rng) * std::max(0.0, dur_s - len);
    af = {start, start + len};
  }

  auto in_any = [](double t, const std::vector<std::pair<double, double>>& iv) {
    for (const auto& [a, b] : iv)
      if (t >= a && t < b) return true;
    return false;
  };

  const Wave sinus_r{kSinusR, 0.0, qrs_sigma_for_width(spec.qrs_width_samples) / kFs};
  const Wave pvc_r{kPvcR, 0.0, kPvcWidthFactor * sinus_r.sigma_s};

  std::vector<double> sig(n, 0.0);
  double t = 0.5;
  bool last_was_pvc = true;
  while (t < dur_s - 0.6) {
    const double rr = 60.0 / heart_rate(spec, t);
    const bool in_af = t >= af.first && t < af.second;
    if (in_any(t, bursts) && !last_was_pvc && !in_af) {
      const double t_pvc = t + kPvcCoupling * rr;
      add_wave(sig, t_pvc, pvc_r);
      add_wave(sig, t_pvc, kPvcT);
      out.r_peaks_s.push_back(t_pvc);
      out.is_pvc.push_back(true);
      last_was_pvc = true;
      t += 2.0 * rr;  // compensatory pause
      continue;
    }
    add_wave(sig, t, sinus_r);
    add_wave(sig, t, kSinusT);
    if (!in_af) add_wave(sig, t, kSinusP);
    out.r_peaks_s.push_back(t);
    out.is_pvc.push_back(false);
    last_was_pvc = false;
    t += in_af ? rr * (0.6 + 0.8 * unif(rng)) : rr;
  }

  if (af.second > af.first) {
    const double phase = 2.0 * std::numbers::pi * unif(rng);
    const auto a0 = static_cast<std::size_t>(af.first * kFs);
    const auto a1 = std::min(n, static_cast<std::size_t>(af.second * kFs));
    for (std::size_t i = a0; i < a1; ++i) {
      sig[i] += kAfWaveUv * std::sin(2.0 * std::numbers::pi * kAfWaveHz * static_cast<double>(i) / kFs + phase);
    }
    out.af_episodes.push_back({a0, a1});
  }

  std::vector<std::int16_t> codes(n);
  if (spec.noise_rms > 0) {
    std::normal_distribution<double> noise(0.0, spec.noise_rms);
    for (std::size_t i = 0; i < n; ++i) codes[i] = quantize_uv(sig[i] + noise(rng));
  } else {
    for (std::size_t i = 0; i < n; ++i) codes[i] = quantize_uv(sig[i]);
  }

  for (const auto& [a, b] : bursts) {
    out.pvc_bursts.push_back({static_cast<std::size_t>(a * kFs), std::min(n, static_cast<std::size_t>(b * kFs))});
  }
  out.recording = EcgRecording(spec.exam_id, spec.patient_id, spec.start_time, std::move(codes));
  return out;
}

EcgRecording synthesize(const SynthSpec& spec) { return synthesize_annotated(spec).recording; }

}  // namespace hhf
