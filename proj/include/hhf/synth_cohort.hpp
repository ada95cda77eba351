#pragma once

#include <cstdint>
#include <vector>

#include "hhf/emr.hpp"
#include "hhf/synth.hpp"

namespace hhf {

// A labeled toy cohort: exams, EMR tables and one signal spec per exam.
// Future-HF patients carry daytime PVC bursts; others do not.
struct CohortSynthSpec {
  std::size_t n_exams = 40;
  std::uint64_t seed = 0;
  double positive_fraction = 0.5;
  double test_fraction = 0.3;           // share of exams dated Jan-Apr 2018
  double pvc_burst_rate = 1.0;          // bursts/hour in future-HF recordings
  double pvc_burst_daytime_bias = 1.0;
  double negative_burst_rate = 0.0;     // bursts/hour in the other recordings
  double af_episode_prob = 0.2;         // both classes
  double min_duration_h = 22.0;
  double max_duration_h = 26.0;
  double noise_rms = 15.0;
};

struct SynthCohort {
  std::vector<Exam> exams;
  EmrTables emr;
  std::vector<SynthSpec> signals;  // parallel to exams
  std::vector<int> hf;             // planted outcome, parallel to exams
};

SynthCohort make_synth_cohort(const CohortSynthSpec& spec);

}  // namespace hhf
