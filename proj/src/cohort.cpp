#include "hhf/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "hhf/icd9.hpp"

namespace hhf {

std::string_view to_string(HfClass c) { return c == HfClass::Hf ? "HF" : "non-HF"; }

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::Unassigned: break;
  }
  return "unassigned";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  return Split::Unassigned;
}

std::string_view to_string(MedicationCategory c) {
  switch (c) {
    case MedicationCategory::NewOrRenewed: return "new_or_renewed";
    case MedicationCategory::Future: return "future";
    case MedicationCategory::History: return "history";
    case MedicationCategory::NotDocumented: break;
  }
  return "not_documented";
}

std::string_view to_string(EchoCategory c) {
  switch (c) {
    case EchoCategory::InsideRange: return "inside_range";
    case EchoCategory::OutsideRange: return "outside_range";
    case EchoCategory::NotDocumented: break;
  }
  return "not_documented";
}

std::optional<Date> extract_endpoint(const PatientTimeline& timeline) {
  std::optional<Date> first;
  for (const auto& e : timeline) {
    if (e.kind != EventKind::Diagnosis || !match_icd9(e.code, heart_failure_codes())) continue;
    if (!first || e.date < *first) first = e.date;
  }
  return first;
}

std::vector<ExamLabel> label_exams(const std::vector<Exam>& exams, const std::map<std::string, Date>& endpoints) {
  std::vector<ExamLabel> out;
  out.reserve(exams.size());
  for (const auto& ex : exams) {
    if (ex.exam_date < kInclusionBegin || ex.exam_date > kInclusionEnd) continue;
    ExamLabel l{ex.exam_id, ex.patient_id, ex.exam_date, HfClass::NonHf, std::nullopt, std::nullopt, Split::Unassigned};
    if (auto it = endpoints.find(ex.patient_id); it != endpoints.end()) {
      const std::int32_t delta = it->second - ex.exam_date;
      if (delta < 0) continue;  // HF documented before the recording
      l.endpoint_date = it->second;
      if (delta <= kFiveYearDays) {
        l.label = HfClass::Hf;
        l.days_to_endpoint = delta;
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<ExamLabel> split_cohort(std::vector<ExamLabel> labels, double val_frac, std::uint64_t seed) {
  if (val_frac < 0 || val_frac >= 1) throw Error(ErrorCode::BadConfig, "val_frac outside [0, 1)");
  for (auto& l : labels) l.split = Split::Unassigned;

  std::set<std::string> test_patients;
  for (const auto& l : labels)
    if (l.exam_date >= kTestBegin && l.exam_date <= kTestEnd) test_patients.insert(l.patient_id);
  for (auto& l : labels)
    if (test_patients.count(l.patient_id)) l.split = Split::Test;

  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i].split == Split::Unassigned) remaining.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(remaining.begin(), remaining.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(remaining.size())));
  std::set<std::string> val_patients;
  for (std::size_t k = 0; k < n_val; ++k) val_patients.insert(labels[remaining[k]].patient_id);
  for (auto& l : labels) {
    if (l.split != Split::Unassigned) continue;
    l.split = val_patients.count(l.patient_id) ? Split::Validation : Split::Train;
  }

  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& l : labels) ++counts[static_cast<int>(l.split)];
  if (counts[static_cast<int>(Split::Train)] == 0 || counts[static_cast<int>(Split::Test)] == 0 ||
      (val_frac > 0 && counts[static_cast<int>(Split::Validation)] == 0)) {
    throw Error(ErrorCode::DegenerateSplit, "train=" + std::to_string(counts[1]) + " validation=" +
                                                std::to_string(counts[2]) + " test=" + std::to_string(counts[3]));
  }
  return labels;
}

const std::vector<AtcGroup>& hf_medication_groups() {
  static const std::vector<AtcGroup> groups = {
      {"mra", {"C03DA"}},
      {"sglt2i", {"A10BD20", "A10BD15"}},
      {"raas", {"C09"}},
      {"low_ceiling_diuretics", {"C03A", "C03B"}},
      {"high_ceiling_diuretics", {"C03C"}},
      {"beta_blockers", {"C07"}},
  };
  return groups;
}

MedicationReport medication_category(const PatientTimeline& timeline, const std::vector<AtcGroup>& groups,
                                     Date diagnosis_date) {
  MedicationReport report;
  for (const auto& g : groups) {
    bool window = false, year_minus_2 = false, before = false, future = false;
    for (const auto& e : timeline) {
      if (e.kind != EventKind::Medication) continue;
      const bool hit = std::any_of(g.prefixes.begin(), g.prefixes.end(),
                                   [&](const std::string& p) { return e.code.rfind(p, 0) == 0; });
      if (!hit) continue;
      const std::int32_t d = e.date - diagnosis_date;
      if (d > kDaysPerYear) future = true;
      else if (d >= -kDaysPerYear) window = true;
      else if (d >= -2 * kDaysPerYear) year_minus_2 = true;
      else before = true;
    }
    MedicationCategory c = MedicationCategory::NotDocumented;
    if (window && !year_minus_2) c = MedicationCategory::NewOrRenewed;
    else if (future) c = MedicationCategory::Future;
    else if (window || year_minus_2 || before) c = MedicationCategory::History;
    report.per_group[g.name] = c;
    report.minimum_1 = std::max(report.minimum_1, c);
  }
  return report;
}

EchoCategory echo_category(const PatientTimeline& timeline, Date diagnosis_date) {
  bool any = false;
  for (const auto& e : timeline) {
    if (e.kind != EventKind::Echo) continue;
    any = true;
    const std::int32_t d = e.date - diagnosis_date;
    if (d >= -kDaysPerYear && d <= 2 * kDaysPerYear) return EchoCategory::InsideRange;
  }
  return any ? EchoCategory::OutsideRange : EchoCategory::NotDocumented;
}

std::map<std::string, bool> comorbidity_flags(const PatientTimeline& timeline, Date as_of) {
  std::map<std::string, bool> flags;
  for (const auto& c : comorbidity_table()) {
    bool f = false;
    for (const auto& e : timeline) {
      if (e.kind == EventKind::Diagnosis && e.date < as_of && match_icd9(e.code, c.codes)) {
        f = true;
        break;
      }
    }
    flags[c.name] = f;
  }
  return flags;
}

void write_labels_jsonl(const std::vector<ExamLabel>& labels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& l : labels) {
    nlohmann::json j;
    j["exam_id"] = l.exam_id;
    j["patient_id"] = l.patient_id;
    j["exam_date"] = l.exam_date.iso();
    j["label"] = std::string(to_string(l.label));
    j["endpoint_date"] = l.endpoint_date ? nlohmann::json(l.endpoint_date->iso()) : nlohmann::json(nullptr);
    j["days_to_endpoint"] = l.days_to_endpoint ? nlohmann::json(*l.days_to_endpoint) : nlohmann::json(nullptr);
    j["split"] = l.split == Split::Unassigned ? nlohmann::json(nullptr) : nlohmann::json(std::string(to_string(l.split)));
    out << j.dump() << '\n';
  }
}

std::vector<ExamLabel> read_labels_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<ExamLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ExamLabel l;
      l.exam_id = j.at("exam_id").get<std::string>();
      l.patient_id = j.at("patient_id").get<std::string>();
      l.exam_date = Date::parse(j.at("exam_date").get<std::string>());
      l.label = j.at("label").get<std::string>() == "HF" ? HfClass::Hf : HfClass::NonHf;
      if (j.contains("endpoint_date") && !j["endpoint_date"].is_null())
        l.endpoint_date = Date::parse(j["endpoint_date"].get<std::string>());
      if (j.contains("days_to_endpoint") && !j["days_to_endpoint"].is_null())
        l.days_to_endpoint = j["days_to_endpoint"].get<std::int32_t>();
      if (j.contains("split") && !j["split"].is_null()) l.split = parse_split(j["split"].get<std::string>());
      out.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadCsv, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hhf
