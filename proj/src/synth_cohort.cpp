#include "hhf/synth_cohort.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hhf {

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace

SynthCohort make_synth_cohort(const CohortSynthSpec& spec) {
  if (spec.n_exams == 0) throw Error(ErrorCode::BadConfig, "n_exams must be positive");
  if (!(spec.positive_fraction >= 0 && spec.positive_fraction <= 1) ||
      !(spec.test_fraction >= 0 && spec.test_fraction <= 1))
    throw Error(ErrorCode::BadConfig, "fractions must lie in [0, 1]");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto normal = [&](double m, double s) { return std::normal_distribution<double>(m, s)(rng); };

  const std::size_t n = spec.n_exams;
  const auto n_pos = static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  // Interleave classes over the test / non-test blocks so both get a share.
  std::vector<int> hf(n, 0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < n_pos; ++i) hf[order[i]] = 1;

  SynthCohort c;
  c.hf = hf;
  const Date test_begin = Date::from_ymd(2018, 1, 1), test_end = Date::from_ymd(2018, 4, 30);
  const Date early_begin = Date::from_ymd(2011, 1, 1), early_end = Date::from_ymd(2017, 6, 30);
  for (std::size_t i = 0; i < n; ++i) {
    Exam e{numbered("E", i), numbered("P", i), {}};
    e.exam_date = i < n_test ? test_begin + uniform_int(0, test_end - test_begin)
                             : early_begin + uniform_int(0, early_end - early_begin);
    c.exams.push_back(e);
    const bool pos = hf[i] != 0;
    const std::string& pid = e.patient_id;

    Demographics demo;
    demo.sex = unif(rng) < 0.5 ? Sex::Male : Sex::Female;
    demo.birth_year = e.exam_date.year() - uniform_int(45, 78);
    demo.smoker = unif(rng) < (pos ? 0.35 : 0.2);
    c.emr.demographics[pid] = demo;

    if (pos) {
      const Date dx = e.exam_date + uniform_int(30, 1800);
      c.emr.add({pid, EventKind::Diagnosis, "428.0", std::nullopt, dx, EventSource::Hospital});
      c.emr.add({pid, EventKind::Echo, "echo", std::nullopt, dx + uniform_int(-200, 400), EventSource::Clinic});
      c.emr.add({pid, EventKind::Medication, "C03CA01", std::nullopt, dx + uniform_int(0, 200), EventSource::Clinic});
      if (unif(rng) < 0.3) c.emr.add({pid, EventKind::Death, "death", std::nullopt, dx + uniform_int(30, 900)});
      if (unif(rng) < 0.6)
        c.emr.add({pid, EventKind::Admission, "cardiology", std::nullopt, dx + uniform_int(0, 600), EventSource::Hospital});
    } else {
      if (unif(rng) < 0.1) {
        // late diagnosis, outside the five-year horizon
        c.emr.add({pid, EventKind::Diagnosis, "428.0", std::nullopt, e.exam_date + uniform_int(1900, 2300),
                   EventSource::Hospital});
      }
      if (unif(rng) < 0.08) c.emr.add({pid, EventKind::Death, "death", std::nullopt, e.exam_date + uniform_int(60, 1800)});
    }
    if (unif(rng) < (pos ? 0.6 : 0.35))
      c.emr.add({pid, EventKind::Diagnosis, "401.9", std::nullopt, e.exam_date - uniform_int(100, 2000)});
    if (unif(rng) < (pos ? 0.3 : 0.15))
      c.emr.add({pid, EventKind::Diagnosis, "250.00", std::nullopt, e.exam_date - uniform_int(100, 2000)});
    if (unif(rng) < 0.4)
      c.emr.add({pid, EventKind::Medication, "C09AA02", std::nullopt, e.exam_date - uniform_int(0, 300)});

    auto lab = [&](EventKind kind, const char* name, double value) {
      c.emr.add({pid, kind, name, std::round(value * 10) / 10, e.exam_date - uniform_int(0, 400)});
    };
    lab(EventKind::Measure, "sbp", normal(pos ? 142 : 128, 14));
    lab(EventKind::Measure, "bmi", std::max(16.0, normal(pos ? 30 : 27, 4)));
    lab(EventKind::Lab, "glucose", std::max(60.0, normal(pos ? 112 : 98, 15)));
    lab(EventKind::Lab, "total_chol", std::max(100.0, normal(200, 30)));
    if (unif(rng) < 0.9) lab(EventKind::Lab, "hdl", std::max(20.0, normal(pos ? 44 : 52, 10)));

    SynthSpec s;
    s.seed = mix_seed(spec.seed, e.exam_id);
    s.exam_id = e.exam_id;
    s.patient_id = pid;
    s.duration_h = spec.min_duration_h + (spec.max_duration_h - spec.min_duration_h) * unif(rng);
    s.mean_hr = normal(70, 6);
    s.hr_circadian_amp = 6 + 4 * unif(rng);
    s.pvc_burst_rate = pos ? spec.pvc_burst_rate : spec.negative_burst_rate;
    s.pvc_burst_daytime_bias = spec.pvc_burst_daytime_bias;
    s.af_episode_prob = spec.af_episode_prob;
    s.noise_rms = spec.noise_rms;
    s.start_time = DateTime{e.exam_date, uniform_int(8 * 60, 11 * 60)};
    c.signals.push_back(s);
  }
  c.emr.sort_by_date();
  return c;
}

}  // namespace hhf
