#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hhf/emr.hpp"

namespace hhf {

enum class HfClass { NonHf = 0, Hf = 1 };
enum class Split { Unassigned, Train, Validation, Test };

std::string_view to_string(HfClass c);
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct ExamLabel {
  std::string exam_id;
  std::string patient_id;
  Date exam_date;
  HfClass label = HfClass::NonHf;
  std::optional<Date> endpoint_date;
  std::optional<std::int32_t> days_to_endpoint;
  Split split = Split::Unassigned;
};

// Inclusion window for exam dates.
inline const Date kInclusionBegin = Date::from_ymd(2010, 1, 1);
inline const Date kInclusionEnd = Date::from_ymd(2023, 12, 31);
// Held-out test period.
inline const Date kTestBegin = Date::from_ymd(2018, 1, 1);
inline const Date kTestEnd = Date::from_ymd(2018, 4, 30);

// First HF diagnosis date in a patient's timeline.
std::optional<Date> extract_endpoint(const PatientTimeline& timeline);

// Exams with an endpoint strictly before the exam date, or dated outside the
// inclusion window, are dropped. HF iff 0 <= endpoint - exam <= 1826 days.
std::vector<ExamLabel> label_exams(const std::vector<Exam>& exams, const std::map<std::string, Date>& endpoints);

// Test = Jan-Apr 2018 exams closed over patients; validation = val_frac of the
// remaining exams closed over patients; rest train.
std::vector<ExamLabel> split_cohort(std::vector<ExamLabel> labels, double val_frac, std::uint64_t seed);

enum class MedicationCategory { NotDocumented = 0, History = 1, Future = 2, NewOrRenewed = 3 };
std::string_view to_string(MedicationCategory c);

struct AtcGroup {
  std::string name;
  std::vector<std::string> prefixes;
};

const std::vector<AtcGroup>& hf_medication_groups();

struct MedicationReport {
  std::map<std::string, MedicationCategory> per_group;
  MedicationCategory minimum_1 = MedicationCategory::NotDocumented;
};

MedicationReport medication_category(const PatientTimeline& timeline, const std::vector<AtcGroup>& groups,
                                     Date diagnosis_date);

enum class EchoCategory { InsideRange, OutsideRange, NotDocumented };
std::string_view to_string(EchoCategory c);

// Inside when any echo lies within [-1 y, +2 y] of the diagnosis.
EchoCategory echo_category(const PatientTimeline& timeline, Date diagnosis_date);

// Per comorbidity: any matching diagnosis strictly before `as_of`.
std::map<std::string, bool> comorbidity_flags(const PatientTimeline& timeline, Date as_of);

void write_labels_jsonl(const std::vector<ExamLabel>& labels, const std::filesystem::path& path);
std::vector<ExamLabel> read_labels_jsonl(const std::filesystem::path& path);

}  // namespace hhf
