#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hhf/clinical.hpp"
#include "hhf/logistic.hpp"
#include "hhf/metrics.hpp"
#include "hhf/synth.hpp"

using namespace hhf;

namespace {

// Table whose means are the covariates of `ref`, so `ref` scores 1 - S0.
std::string table_text(const PcphfInputs& ref, double age_coef = 3.0) {
  const auto x = pcphf_covariates(ref);
  std::ostringstream os;
  os.precision(17);
  for (const char* sex : {"male", "female"}) {
    for (const auto& t : pcphf_terms()) {
      os << sex << "." << t << ".coef = " << (t == "ln_age" ? age_coef : t == "ln_hdl" ? -0.5 : 0.7) << "\n";
      os << sex << "." << t << ".mean = " << x.at(t) << "\n";
    }
    os << sex << ".s0 = " << (std::string(sex) == "male" ? 0.95 : 0.97) << "\n";
  }
  return os.str();
}

PcphfInputs reference_inputs() {
  PcphfInputs in;
  in.age = 60;
  in.sbp = 135;
  in.glucose = 105;
  in.total_chol = 190;
  in.hdl = 45;
  in.bmi = 29;
  in.qrs_ms = 96;
  return in;
}

EmrEvent ev(EventKind kind, const std::string& code, std::optional<double> value, Date date) {
  EmrEvent e;
  e.patient_id = "P";
  e.kind = kind;
  e.code = code;
  e.value = value;
  e.date = date;
  return e;
}

std::filesystem::path repo_file(const char* rel) {
  return std::filesystem::path(HHF_SOURCE_DIR) / rel;
}

}  // namespace

TEST_CASE("QRS of a 12-sample template reads 93.75 ms within one sample") {
  SynthSpec s;
  s.seed = 77;
  s.duration_h = 20;
  s.qrs_width_samples = 12;
  s.noise_rms = 5;
  const auto rec = synthesize(s);
  const double qrs = measure_qrs(rec);
  CHECK(std::abs(qrs - 93.75) <= 1000.0 / kFs);

  // doubling every code is an exact amplitude scaling
  std::vector<std::int16_t> codes(rec.codes().begin(), rec.codes().end());
  for (auto& c : codes) c = static_cast<std::int16_t>(2 * c);
  const EcgRecording doubled(rec.exam_id(), rec.patient_id(), rec.start_time(), std::move(codes));
  CHECK(measure_qrs(doubled) == doctest::Approx(qrs).epsilon(1e-9));
}

TEST_CASE("QRS measurement errors") {
  const DateTime t0{Date::from_ymd(2018, 1, 1), 600};
  const EcgRecording short_rec("S", "P", t0, std::vector<std::int16_t>(10ull * 3600 * kFs, 0));
  try {
    measure_qrs(short_rec);
    FAIL("expected InsufficientValidData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientValidData);
  }
  const EcgRecording flat("F", "P", t0, std::vector<std::int16_t>(kDaySamples, 0));
  try {
    measure_qrs(flat);
    FAIL("expected NoBeatsDetected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoBeatsDetected);
  }
}

TEST_CASE("PCP-HF at the table means equals 1 - S0") {
  const auto ref = reference_inputs();
  const auto table = parse_coefficients(table_text(ref));
  CHECK(pcphf_score(ref, table) == doctest::Approx(1.0 - 0.95).epsilon(1e-12));
  auto f = ref;
  f.sex = Sex::Female;
  CHECK(pcphf_score(f, table) == doctest::Approx(1.0 - 0.97).epsilon(1e-12));

  // one covariate away from its mean: exponent b * (x - xbar)
  auto g = ref;
  g.qrs_ms = 120;
  const double lp = 0.7 * (std::log(120.0) - std::log(96.0));
  CHECK(pcphf_score(g, table) == doctest::Approx(1.0 - std::pow(0.95, std::exp(lp))).epsilon(1e-12));
}

TEST_CASE("PCP-HF rises with age and ignores treatment flags") {
  const auto ref = reference_inputs();
  const auto table = parse_coefficients(table_text(ref));
  double prev = 0;
  for (int age = 30; age <= 79; age += 7) {
    auto in = ref;
    in.age = age;
    const double r = pcphf_score(in, table);
    CHECK(r > prev);
    prev = r;
  }
  auto treated = ref;
  treated.sbp_treated = true;
  treated.glucose_treated = true;
  treated.sbp = 150;
  auto untreated = treated;
  untreated.sbp_treated = false;
  untreated.glucose_treated = false;
  CHECK(pcphf_score(treated, table) == pcphf_score(untreated, table));
}

TEST_CASE("missing HDL raises MissingVariable") {
  auto in = reference_inputs();
  in.hdl.reset();
  in.bmi.reset();
  const auto table = parse_coefficients(table_text(reference_inputs()));
  try {
    pcphf_score(in, table);
    FAIL("expected MissingVariable");
  } catch (const MissingVariable& e) {
    CHECK(e.code() == ErrorCode::MissingVariable);
    CHECK(e.fields() == std::vector<std::string>{"hdl", "bmi"});
  }
}

TEST_CASE("coefficient file validation and hashing") {
  const auto text = table_text(reference_inputs());
  const auto a = parse_coefficients(text);
  CHECK_FALSE(a.placeholder);
  CHECK(a.hash.size() == 16);
  CHECK(parse_coefficients(text + "# note\n").hash != a.hash);
  CHECK(parse_coefficients("# PLACEHOLDER\n" + text).placeholder);

  const auto cut = text.substr(0, text.find("male.ln_qrs.mean"));
  CHECK_THROWS_AS(parse_coefficients(cut), Error);
  CHECK_THROWS_AS(parse_coefficients(text + "other.s0 = 0.9\n"), Error);
  CHECK_THROWS_AS(parse_coefficients(text + "male.s0 = 1.5\n"), Error);

  const auto shipped = load_coefficients(repo_file("data/pcphf_coefficients_placeholder.txt"));
  CHECK(shipped.placeholder);
  CHECK(shipped.male.coef.at("ln_age") > 0);
}

TEST_CASE("assembling inputs from the record") {
  const Date exam = Date::parse("2018-03-01");
  Demographics demo{Sex::Female, 1958, true};
  PatientTimeline t = {
      ev(EventKind::Measure, "sbp", 150, exam - 548),  // -18 months
      ev(EventKind::Measure, "sbp", 128, exam + 30),   // +1 month, closer
      ev(EventKind::Measure, "bmi", 31, exam - 10),
      ev(EventKind::Measure, "bmi", 33, exam + 10),  // tie: pre-exam wins
      ev(EventKind::Lab, "glucose", 99, exam - 761),  // about -25 months, outside
      ev(EventKind::Lab, "total_chol", 210, exam - 100),
      ev(EventKind::Lab, "total_chol", 220, exam + 70),  // after +2 months, ignored
      ev(EventKind::Lab, "hdl", 50, exam),
      ev(EventKind::Medication, "C09AA05", std::nullopt, exam - 91),
  };
  const auto in = assemble_pcphf_inputs(t, demo, exam, 95.0);
  CHECK(in.sex == Sex::Female);
  CHECK(in.smoker);
  CHECK(in.age == 60);
  CHECK(in.sbp == 128);
  CHECK(in.bmi == 31);
  CHECK(in.total_chol == 210);
  CHECK(in.hdl == 50);
  CHECK_FALSE(in.glucose.has_value());
  CHECK(in.sbp_treated);
  CHECK_FALSE(in.glucose_treated);
  CHECK(in.missing() == std::vector<std::string>{"glucose"});

  t.push_back(ev(EventKind::Medication, "A10BA02", std::nullopt, exam + 20));
  t.push_back(ev(EventKind::Lab, "glucose", 101, exam - 700));
  const auto in2 = assemble_pcphf_inputs(t, demo, exam, std::nullopt);
  CHECK(in2.glucose_treated);
  CHECK(in2.glucose == 101);
  CHECK(in2.missing() == std::vector<std::string>{"qrs_ms"});
}

TEST_CASE("score file marks missing rows") {
  const auto path = std::filesystem::temp_directory_path() / "hhf_pcphf_scores.csv";
  write_pcphf_scores({{"E1", 0.125, {}}, {"E2", std::nullopt, {"hdl", "bmi"}}}, path);
  std::ifstream in(path);
  std::string l0, l1, l2;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l0 == "exam_id,pcphf_risk");
  CHECK(l1 == "E1,0.125");
  CHECK(l2 == "E2,MISSING:hdl;bmi");
}

TEST_CASE("logistic fit recovers slope 1 and intercept 0") {
  // Ten rows per x = ln(k / (10 - k)) with exactly k positives: the observed
  // proportions are sigmoid(x), so (0, 1) solves the score equations.
  std::vector<double> x;
  std::vector<int> y;
  for (int k = 1; k <= 9; ++k) {
    const double v = std::log(static_cast<double>(k) / (10.0 - k));
    for (int r = 0; r < 10; ++r) {
      x.push_back(v);
      y.push_back(r < k ? 1 : 0);
    }
  }
  const auto m = fit_logistic(x, y, y.size(), 1);
  CHECK_FALSE(m.ridge_fallback);
  CHECK(std::abs(m.intercept) < 1e-4);
  CHECK(std::abs(m.coef[0] - 1.0) < 1e-4);
  CHECK(m.grad_norm < 1e-8);
  CHECK(m.apply(std::vector<double>{0.0}) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("constant covariate falls back to ridge with zero coefficient") {
  std::vector<double> x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(static_cast<double>(i % 7) - 3.0);
    x.push_back(2.5);
    y.push_back(i % 3 == 0 ? 1 : 0);
  }
  const auto m = fit_logistic(x, y, 40, 2);
  CHECK(m.ridge_fallback);
  CHECK(std::abs(m.coef[1]) < 1e-6);
}

TEST_CASE("separated data is flagged and stays finite") {
  std::vector<double> x{-3, -2, -1, 1, 2, 3};
  std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto m = fit_logistic(x, y, 6, 1);
  CHECK(m.ridge_fallback);
  CHECK(std::isfinite(m.coef[0]));
  CHECK(m.coef[0] > 0);
  CHECK_THROWS_AS(fit_logistic(x, std::vector<int>(6, 1), 6, 1), Error);
}

TEST_CASE("combiner AUROC is at least the single score's on its training data") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const std::size_t n = 300;
  std::vector<double> score(n), x(n * 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (i % 3 == 0);
    score[i] = nd(rng) + (y[i] ? 0.8 : 0.0);
    x[i * 2] = score[i];
    x[i * 2 + 1] = nd(rng) + (y[i] ? 0.6 : 0.0);
  }
  const auto st = Standardizer::fit(x, n, 2);
  const auto z = st.apply(x, n);
  const auto m = fit_logistic(z, y, n, 2);
  std::vector<double> comb(n);
  for (std::size_t i = 0; i < n; ++i) comb[i] = m.apply(std::span<const double>(z).subspan(i * 2, 2));
  CHECK(auroc(comb, y) >= auroc(score, y));
}

TEST_CASE("standardizer uses population sd and leaves constant columns unscaled") {
  const std::vector<double> x{1, 5, 3, 5, 5, 5};
  const auto s = Standardizer::fit(x, 3, 2);
  CHECK(s.mean[0] == doctest::Approx(3.0));
  CHECK(s.sd[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
  CHECK(s.sd[1] == 1.0);
  const auto z = s.apply(x, 3);
  CHECK(z[1] == 0.0);
}
