#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hhf/common.hpp"

namespace hhf {

enum class EventKind { Diagnosis, Medication, Lab, Measure, Admission, Echo, Death };
enum class EventSource { Clinic, Hospital };

struct EmrEvent {
  std::string patient_id;
  EventKind kind = EventKind::Diagnosis;
  std::string code;  // ICD-9, ATC, lab/measure name or admitting department
  std::optional<double> value;
  Date date;
  EventSource source = EventSource::Clinic;
};

using PatientTimeline = std::vector<EmrEvent>;

enum class Sex { Male, Female };

struct Demographics {
  Sex sex = Sex::Male;
  int birth_year = 1960;
  bool smoker = false;
};

struct Exam {
  std::string exam_id;
  std::string patient_id;
  Date exam_date;
};

// All EMR tables of a cohort, keyed by patient.
struct EmrTables {
  std::map<std::string, PatientTimeline> timelines;
  std::map<std::string, Demographics> demographics;

  const PatientTimeline& timeline(const std::string& patient_id) const;
  void add(EmrEvent e);
  void sort_by_date();
};

// Minimal header-addressed CSV reader.
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(const std::string& text, const std::string& name = "<memory>");

  std::size_t rows() const { return rows_.size(); }
  const std::string& at(std::size_t row, const std::string& column) const;
  bool has_column(const std::string& column) const;

 private:
  std::string name_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<std::string> split_csv_line(const std::string& line);

// Loads whichever of diagnoses.csv, medications.csv, labs.csv, measures.csv,
// echoes.csv, deaths.csv, admissions.csv and demographics.csv exist in `dir`.
EmrTables load_emr(const std::filesystem::path& dir);
void write_emr(const EmrTables& tables, const std::filesystem::path& dir);

std::vector<Exam> load_exams(const std::filesystem::path& path);
void write_exams(const std::vector<Exam>& exams, const std::filesystem::path& path);

}  // namespace hhf
