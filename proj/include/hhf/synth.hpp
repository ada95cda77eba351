#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hhf/recording.hpp"

namespace hhf {

struct SynthSpec {
  std::uint64_t seed = 0;
  double duration_h = 24.0;             // [20, 30]
  double mean_hr = 70.0;                // beats/min
  double hr_circadian_amp = 8.0;        // beats/min, peak mid-afternoon
  double pvc_burst_rate = 0.0;          // bursts/hour over the whole recording
  double pvc_burst_daytime_bias = 0.0;  // probability a burst is placed in 07:00-20:00
  double af_episode_prob = 0.0;         // probability of one irregular-RR episode
  double noise_rms = 10.0;              // uV
  double qrs_width_samples = 12.0;      // onset-to-offset width of the sinus QRS
  double burst_min_s = 180.0;
  double burst_max_s = 360.0;

  std::string exam_id = "E0";
  std::string patient_id = "P0";
  DateTime start_time{Date::from_ymd(2018, 1, 1), 9 * 60};

  void validate() const;
};

// Half-open interval of sample indices.
struct SampleInterval {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct SyntheticRecording {
  EcgRecording recording;
  std::vector<SampleInterval> pvc_bursts;
  std::vector<SampleInterval> af_episodes;
  std::vector<double> r_peaks_s;  // R-peak time of every rendered beat
  std::vector<bool> is_pvc;
};

// Daytime window used for burst placement, as minutes of day.
inline constexpr int kDaytimeBeginMin = 7 * 60;
inline constexpr int kDaytimeEndMin = 20 * 60;

SyntheticRecording synthesize_annotated(const SynthSpec& spec);
EcgRecording synthesize(const SynthSpec& spec);

// Sigma of the Gaussian R wave whose slope-threshold width equals `width_samples`.
double qrs_sigma_for_width(double width_samples);

}  // namespace hhf
