#include "hhf/clinical.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hhf/dsp.hpp"

namespace hhf {

namespace {

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
  return s;
}

}  // namespace

double measure_qrs(const EcgRecording& rec) {
  const std::size_t begin = 11ull * 3600 * kFs;
  const std::size_t len = 5ull * 60 * kFs;
  if (rec.valid_len() < begin + len)
    throw Error(ErrorCode::InsufficientValidData, rec.exam_id() + " has " + std::to_string(rec.duration_hours()) +
                                                      " h of signal; QRS needs 11 h 5 min");
  std::vector<double> x(len);
  rec.copy_uv(begin, x);
  const auto peaks = detect_r_peaks(x, kFs);
  const auto clean = highpass(x, 0.5, kFs);
  double sum = 0;
  std::size_t n = 0;
  for (auto r : peaks) {
    const auto q = delineate_qrs(clean, r, kFs);
    if (!q.ok) continue;
    sum += q.offset - q.onset;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::NoBeatsDetected, "no delineable beats in " + rec.exam_id());
  return sum / static_cast<double>(n) * 1000.0 / kFs;
}

std::vector<std::string> PcphfInputs::missing() const {
  std::vector<std::string> m;
  auto check = [&](const char* name, const std::optional<double>& v) {
    if (!v || !(*v > 0) || !std::isfinite(*v)) m.push_back(name);
  };
  check("age", age);
  check("sbp", sbp);
  check("glucose", glucose);
  check("total_chol", total_chol);
  check("hdl", hdl);
  check("bmi", bmi);
  check("qrs_ms", qrs_ms);
  return m;
}

MissingVariable::MissingVariable(std::vector<std::string> fields)
    : Error(ErrorCode::MissingVariable, join(fields, ',')), fields_(std::move(fields)) {}

const std::vector<std::string>& pcphf_terms() {
  static const std::vector<std::string> terms{
      "ln_age",     "ln_age_sq",   "ln_sbp", "ln_age_x_ln_sbp", "smoker",          "ln_age_x_smoker",
      "ln_glucose", "ln_total_chol", "ln_hdl", "ln_bmi",        "ln_age_x_ln_bmi", "ln_qrs"};
  return terms;
}

CoefficientTable parse_coefficients(const std::string& text) {
  CoefficientTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++n;
    if (line.find("PLACEHOLDER") != std::string::npos) t.placeholder = true;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::BadCoefficients, "line " + std::to_string(n) + ": no '='");
    const std::string key = trim(line.substr(0, eq));
    double value;
    try {
      value = std::stod(trim(line.substr(eq + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadCoefficients, "line " + std::to_string(n) + ": bad number");
    }
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw Error(ErrorCode::BadCoefficients, "key '" + key + "' has no sex prefix");
    const std::string sex = key.substr(0, dot), rest = key.substr(dot + 1);
    PcphfSexTable* s = sex == "male" ? &t.male : sex == "female" ? &t.female : nullptr;
    if (!s) throw Error(ErrorCode::BadCoefficients, "unknown sex '" + sex + "'");
    if (rest == "s0") {
      s->s0 = value;
    } else {
      const auto d2 = rest.rfind('.');
      const std::string term = rest.substr(0, d2), field = d2 == std::string::npos ? "" : rest.substr(d2 + 1);
      if (field == "coef") {
        s->coef[term] = value;
      } else if (field == "mean") {
        s->mean[term] = value;
      } else {
        throw Error(ErrorCode::BadCoefficients, "key '" + key + "' must end in .coef or .mean");
      }
    }
    seen[key] = true;
  }
  for (const auto* s : {&t.male, &t.female}) {
    const std::string sex = s == &t.male ? "male" : "female";
    if (!(s->s0 > 0 && s->s0 < 1)) throw Error(ErrorCode::BadCoefficients, sex + ".s0 missing or outside (0, 1)");
    for (const auto& term : pcphf_terms()) {
      if (!s->coef.count(term)) throw Error(ErrorCode::BadCoefficients, sex + "." + term + ".coef missing");
      if (!s->mean.count(term)) throw Error(ErrorCode::BadCoefficients, sex + "." + term + ".mean missing");
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix_seed(0, text)));
  t.hash = buf;
  return t;
}

CoefficientTable load_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_coefficients(ss.str());
}

std::map<std::string, double> pcphf_covariates(const PcphfInputs& in) {
  if (auto m = in.missing(); !m.empty()) throw MissingVariable(m);
  const double la = std::log(*in.age), ls = std::log(*in.sbp), lb = std::log(*in.bmi);
  const double smk = in.smoker ? 1.0 : 0.0;
  return {{"ln_age", la},
          {"ln_age_sq", la * la},
          {"ln_sbp", ls},
          {"ln_age_x_ln_sbp", la * ls},
          {"smoker", smk},
          {"ln_age_x_smoker", la * smk},
          {"ln_glucose", std::log(*in.glucose)},
          {"ln_total_chol", std::log(*in.total_chol)},
          {"ln_hdl", std::log(*in.hdl)},
          {"ln_bmi", lb},
          {"ln_age_x_ln_bmi", la * lb},
          {"ln_qrs", std::log(*in.qrs_ms)}};
}

double pcphf_score(const PcphfInputs& in, const CoefficientTable& table) {
  const auto x = pcphf_covariates(in);
  const auto& t = table.for_sex(in.sex);
  double lp = 0;
  for (const auto& term : pcphf_terms()) lp += t.coef.at(term) * (x.at(term) - t.mean.at(term));
  return 1.0 - std::pow(t.s0, std::exp(lp));
}

PcphfInputs assemble_pcphf_inputs(const PatientTimeline& timeline, const Demographics& demo, Date exam_date,
                                  std::optional<double> qrs_ms, const PcphfWindow& window) {
  PcphfInputs in;
  in.sex = demo.sex;
  in.smoker = demo.smoker;
  in.age = static_cast<double>(exam_date.year() - demo.birth_year);
  in.qrs_ms = qrs_ms;
  const Date lo = exam_date - window.before_days, hi = exam_date + window.after_days;

  struct Best {
    std::optional<double> value;
    std::int32_t dist = 0;
    bool pre = false;
  };
  std::map<std::string, Best> best;
  for (const auto& e : timeline) {
    if (e.date < lo || e.date > hi) continue;
    if (e.kind == EventKind::Medication) {
      if (e.code.rfind("A10", 0) == 0) in.glucose_treated = true;
      for (const char* p : {"C02", "C03", "C07", "C08", "C09"})
        if (e.code.rfind(p, 0) == 0) in.sbp_treated = true;
      continue;
    }
    if ((e.kind != EventKind::Lab && e.kind != EventKind::Measure) || !e.value) continue;
    const std::int32_t dist = std::abs(e.date - exam_date);
    const bool pre = e.date <= exam_date;
    auto& b = best[e.code];
    // nearest wins; on equal distance the pre-exam record wins, then the first seen
    if (!b.value || dist < b.dist || (dist == b.dist && pre && !b.pre)) b = {e.value, dist, pre};
  }
  auto take = [&](const char* name) -> std::optional<double> {
    auto it = best.find(name);
    return it == best.end() ? std::nullopt : it->second.value;
  };
  in.sbp = take("sbp");
  in.glucose = take("glucose");
  in.total_chol = take("total_chol");
  in.hdl = take("hdl");
  in.bmi = take("bmi");
  return in;
}

void write_pcphf_scores(const std::vector<PcphfScoreRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(10);
  out << "exam_id,pcphf_risk\n";
  for (const auto& r : rows) {
    out << r.exam_id << ",";
    if (r.risk) {
      out << *r.risk;
    } else {
      out << "MISSING:" << join(r.missing, ';');
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace hhf
