#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hhf/emr.hpp"
#include "hhf/recording.hpp"

namespace hhf {

// Mean QRS duration over [11 h, 11 h + 5 min) of the recording.
double measure_qrs(const EcgRecording& rec);

struct PcphfInputs {
  Sex sex = Sex::Male;
  std::optional<double> age;  // years
  std::optional<double> sbp;  // mmHg
  bool sbp_treated = false;
  std::optional<double> glucose;  // mg/dL
  bool glucose_treated = false;
  std::optional<double> total_chol;  // mg/dL
  std::optional<double> hdl;         // mg/dL
  std::optional<double> bmi;         // kg/m2
  std::optional<double> qrs_ms;
  bool smoker = false;

  std::vector<std::string> missing() const;
  bool age_in_design_range() const { return age && *age >= 30 && *age <= 79; }
};

class MissingVariable : public Error {
 public:
  explicit MissingVariable(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

// Covariate terms of the sex-specific equation.
const std::vector<std::string>& pcphf_terms();

struct PcphfSexTable {
  std::map<std::string, double> coef;
  std::map<std::string, double> mean;
  double s0 = 0;  // 10-year baseline survival
};

struct CoefficientTable {
  PcphfSexTable male, female;
  std::string hash;  // of the file contents
  bool placeholder = false;

  const PcphfSexTable& for_sex(Sex s) const { return s == Sex::Male ? male : female; }
};

// Lines `<sex>.<term>.coef = v`, `<sex>.<term>.mean = v`, `<sex>.s0 = v`.
CoefficientTable load_coefficients(const std::filesystem::path& path);
CoefficientTable parse_coefficients(const std::string& text);

// Transformed covariates (ln age, ln age^2, interactions ...) keyed by term.
std::map<std::string, double> pcphf_covariates(const PcphfInputs& in);

// 1 - S0^exp(sum b x - sum b xbar). Untreated SBP and glucose terms are used
// whatever the treatment flags say.
double pcphf_score(const PcphfInputs& in, const CoefficientTable& table);

struct PcphfWindow {
  std::int32_t before_days = 730;
  std::int32_t after_days = 61;
};

// Nearest value per variable in [exam - 2 y, exam + 2 mo]; the pre-exam value
// wins a tie. Treatment flags: any dispensed antihypertensive / glucose-lowering
// ATC in the same window. Fills what it can; check missing().
PcphfInputs assemble_pcphf_inputs(const PatientTimeline& timeline, const Demographics& demo, Date exam_date,
                                  std::optional<double> qrs_ms, const PcphfWindow& window = {});

struct PcphfScoreRow {
  std::string exam_id;
  std::optional<double> risk;
  std::vector<std::string> missing;
};
void write_pcphf_scores(const std::vector<PcphfScoreRow>& rows, const std::filesystem::path& path);

}  // namespace hhf
