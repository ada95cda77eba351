#include "hhf/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hhf {

Biquad Biquad::lowpass(double cutoff_hz, double fs, double q) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double c = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

Biquad Biquad::highpass(double cutoff_hz, double fs, double q) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double c = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
}

namespace {

void run_biquad(const Biquad& f, std::vector<double>& x) {
  // Direct form II transposed, state primed to the first sample's steady state.
  const double x0 = x.empty() ? 0.0 : x.front();
  const double dc = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
  double z1 = x0 * dc - f.b0 * x0, z2 = x0 * (f.b2 - f.a2 * dc);
  for (auto& v : x) {
    const double in = v;
    const double out = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * out + z2;
    z2 = f.b2 * in - f.a2 * out;
    v = out;
  }
}

}  // namespace

std::vector<double> filtfilt(std::span<const Biquad> cascade, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(n - 1, 3 * 128);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  // odd reflection about the end points
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  for (const auto& f : cascade) run_biquad(f, ext);
  std::reverse(ext.begin(), ext.end());
  for (const auto& f : cascade) run_biquad(f, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> bandpass(std::span<const double> x, double lo_hz, double hi_hz, double fs) {
  const Biquad cascade[] = {Biquad::highpass(lo_hz, fs), Biquad::lowpass(hi_hz, fs)};
  return filtfilt(cascade, x);
}

std::vector<double> highpass(std::span<const double> x, double cutoff_hz, double fs) {
  const Biquad cascade[] = {Biquad::highpass(cutoff_hz, fs)};
  return filtfilt(cascade, x);
}

std::vector<std::size_t> detect_r_peaks(std::span<const double> uv, double fs, const PeakDetectorConfig& cfg) {
  const std::size_t n = uv.size();
  if (n < 8) return {};
  const auto bp = bandpass(uv, cfg.band_lo_hz, cfg.band_hi_hz, fs);
  const auto base = highpass(uv, 0.5, fs);

  // moving-window integration of the squared band signal
  const auto half = static_cast<std::size_t>(std::max(1.0, cfg.integration_s * fs / 2.0));
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + bp[i] * bp[i];
  std::vector<double> energy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i >= half ? i - half : 0;
    const std::size_t b = std::min(n, i + half + 1);
    energy[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
  }

  const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.block_s * fs));
  std::vector<double> thr(n);
  for (std::size_t b0 = 0; b0 < n; b0 += block) {
    const std::size_t b1 = std::min(n, b0 + block);
    const double mx = *std::max_element(energy.begin() + static_cast<std::ptrdiff_t>(b0),
                                        energy.begin() + static_cast<std::ptrdiff_t>(b1));
    const double t = mx < cfg.min_energy_uv2 ? INFINITY : cfg.threshold_frac * mx;
    std::fill(thr.begin() + static_cast<std::ptrdiff_t>(b0), thr.begin() + static_cast<std::ptrdiff_t>(b1), t);
  }

  const auto refractory = static_cast<std::size_t>(cfg.refractory_s * fs);
  const auto search = static_cast<std::size_t>(0.05 * fs);
  std::vector<std::size_t> peaks;
  std::size_t i = 0;
  while (i < n) {
    if (energy[i] <= thr[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && energy[j] > thr[j]) ++j;
    const std::size_t a = i >= search ? i - search : 0;
    const std::size_t b = std::min(n, j + search);
    std::size_t best = a;
    for (std::size_t k = a; k < b; ++k)
      if (std::abs(base[k]) > std::abs(base[best])) best = k;
    if (!peaks.empty() && best - peaks.back() < refractory && best >= peaks.back()) {
      if (std::abs(base[best]) > std::abs(base[peaks.back()])) peaks.back() = best;
    } else if (peaks.empty() || best > peaks.back()) {
      peaks.push_back(best);
    }
    i = j;
  }
  return peaks;
}

QrsBounds delineate_qrs(std::span<const double> x, std::size_t r, double fs) {
  QrsBounds out;
  const std::size_t n = x.size();
  const auto reach = static_cast<std::size_t>(0.2 * fs);
  const auto slope_reach = static_cast<std::size_t>(0.15 * fs);
  if (r < reach + 1 || r + reach + 1 >= n) return out;

  auto slope = [&](std::size_t k) { return std::abs(x[k + 1] - x[k]); };  // located at k + 0.5
  double max_slope = 0;
  for (std::size_t k = r - slope_reach; k < r + slope_reach; ++k) max_slope = std::max(max_slope, slope(k));
  if (max_slope <= 0) return out;
  const double thr = kQrsSlopeFraction * max_slope;

  // steepest slope on each side anchors the walk outward
  std::size_t left = r - 1, right = r;
  for (std::size_t k = r - slope_reach; k < r; ++k)
    if (slope(k) > slope(left)) left = k;
  for (std::size_t k = r; k < r + slope_reach; ++k)
    if (slope(k) > slope(right)) right = k;

  std::size_t k = left;
  while (k > r - reach && slope(k) >= thr) --k;
  if (slope(k) >= thr) return out;
  // crossing between slope(k) < thr and slope(k + 1) >= thr
  out.onset = static_cast<double>(k) + 0.5 + (thr - slope(k)) / (slope(k + 1) - slope(k));

  k = right;
  while (k < r + reach && slope(k) >= thr) ++k;
  if (slope(k) >= thr) return out;
  out.offset = static_cast<double>(k) - 0.5 + (slope(k - 1) - thr) / (slope(k - 1) - slope(k));
  out.ok = out.offset > out.onset;
  return out;
}

}  // namespace hhf
