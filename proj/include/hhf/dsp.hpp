#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hhf {

// Fraction of the peak QRS slope at which onset/offset are placed.
inline constexpr double kQrsSlopeFraction = 0.1;

struct Biquad {
  double b0, b1, b2, a1, a2;  // normalized so that a0 == 1

  static Biquad lowpass(double cutoff_hz, double fs, double q = 0.7071067811865476);
  static Biquad highpass(double cutoff_hz, double fs, double q = 0.7071067811865476);
};

// Zero-phase forward/backward filtering through a biquad cascade, with
// reflected edges.
std::vector<double> filtfilt(std::span<const Biquad> cascade, std::span<const double> x);

std::vector<double> bandpass(std::span<const double> x, double lo_hz, double hi_hz, double fs);
std::vector<double> highpass(std::span<const double> x, double cutoff_hz, double fs);

struct PeakDetectorConfig {
  double band_lo_hz = 5.0;
  double band_hi_hz = 20.0;
  double integration_s = 0.150;
  double threshold_frac = 0.3;
  double block_s = 10.0;
  double refractory_s = 0.250;
  double min_energy_uv2 = 400.0;  // flat-line floor on the integrated energy
};

// Bandpass + energy + adaptive block threshold with a refractory period.
// Returns R-peak sample indices in increasing order.
std::vector<std::size_t> detect_r_peaks(std::span<const double> uv, double fs, const PeakDetectorConfig& cfg = {});

struct QrsBounds {
  double onset = 0;   // fractional sample index
  double offset = 0;
  bool ok = false;
};

// Slope-threshold delineation around a detected R peak of a baseline-free
// signal: onset/offset are where |dx/dt| falls below kQrsSlopeFraction of the
// steepest slope near the peak.
QrsBounds delineate_qrs(std::span<const double> x, std::size_t r_peak, double fs);

}  // namespace hhf
