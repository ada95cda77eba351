#include "hhf/icd9.hpp"

#include <cctype>
#include <regex>

#include "hhf/common.hpp"

namespace hhf {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

}  // namespace

Icd9Pattern Icd9Pattern::parse(std::string_view raw) {
  Icd9Pattern p;
  p.text_ = trim(raw);
  const std::string& t = p.text_;
  auto bad = [&] { return Error(ErrorCode::BadPattern, "'" + t + "'"); };

  const auto dot = t.find('.');
  const std::string head = t.substr(0, dot);
  std::string sub = dot == std::string::npos ? "" : t.substr(dot + 1);
  if (dot != std::string::npos && sub.empty()) throw bad();

  const auto dash = head.find('-');
  const std::string lo = head.substr(0, dash);
  const std::string hi = dash == std::string::npos ? lo : head.substr(dash + 1);
  if (lo.size() != 3 || hi.size() != 3 || !all_digits(lo) || !all_digits(hi)) throw bad();
  p.cat_lo_ = std::stoi(lo);
  p.cat_hi_ = std::stoi(hi);
  p.range_ = dash != std::string::npos;
  if (p.cat_hi_ < p.cat_lo_) throw bad();

  for (char c : sub)
    if (c != 'X' && !std::isdigit(static_cast<unsigned char>(c))) throw bad();
  while (!sub.empty() && sub.back() == 'X') sub.pop_back();
  if (sub.size() > 2) throw bad();
  p.sub_ = sub;
  return p;
}

bool Icd9Pattern::matches(std::string_view code) const {
  if (code.size() < 3 || !all_digits(code.substr(0, 3))) return false;
  const int cat = (code[0] - '0') * 100 + (code[1] - '0') * 10 + (code[2] - '0');
  if (cat < cat_lo_ || cat > cat_hi_) return false;
  if (range_) return true;
  std::string_view sub;
  if (code.size() > 3) {
    if (code[3] != '.') return false;
    sub = code.substr(4);
  }
  if (sub.size() < sub_.size()) return false;
  for (std::size_t i = 0; i < sub_.size(); ++i) {
    if (sub_[i] == 'X') continue;
    if (sub[i] != sub_[i]) return false;
  }
  return true;
}

Icd9PatternSet parse_pattern_set(const std::vector<std::string>& patterns) {
  Icd9PatternSet out;
  out.reserve(patterns.size());
  for (const auto& p : patterns) out.push_back(Icd9Pattern::parse(p));
  return out;
}

bool match_icd9(std::string_view code, const Icd9PatternSet& set) {
  for (const auto& p : set)
    if (p.matches(code)) return true;
  return false;
}

bool is_valid_icd9(std::string_view code) {
  static const std::regex numeric(R"(^\d{3}(\.\d{1,2})?$)");
  static const std::regex v_code(R"(^V\d{2}(\.\d{1,2})?$)");
  static const std::regex e_code(R"(^E\d{3}(\.\d)?$)");
  const std::string s(code);
  return std::regex_match(s, numeric) || std::regex_match(s, v_code) || std::regex_match(s, e_code);
}

const Icd9PatternSet& heart_failure_codes() {
  static const Icd9PatternSet set = parse_pattern_set({"428.X", "402.01X", "402.11X", "402.91X", "404.01X",
                                                       "404.03X", "404.11X", "404.13", "404.93X", "416.11X",
                                                       "514.2X", "514.3X", "518.4X"});
  return set;
}

const std::vector<Comorbidity>& comorbidity_table() {
  static const std::vector<Comorbidity> table = {
      {"diabetes", parse_pattern_set({"249-250.X"})},
      {"ischemic_heart_disease", parse_pattern_set({"410-414.X"})},
      {"mi_or_acute_coronary", parse_pattern_set({"410-412.X"})},
      {"ischemic_other", parse_pattern_set({"413-414.X"})},
      {"cerebrovascular", parse_pattern_set({"430-438.X"})},
      {"stroke", parse_pattern_set({"431.X", "433.X1", "434.X1", "435.X", "436.X", "438.X"})},
      {"chronic_renal_failure", parse_pattern_set({"585.6X", "586.X"})},
      {"acute_renal_failure", parse_pattern_set({"584.X"})},
      {"conduction_disorder", parse_pattern_set({"426.X"})},
      {"dysrhythmia", parse_pattern_set({"427.X"})},
      {"atrial_fibrillation_flutter", parse_pattern_set({"427.3X"})},
      {"hypertension", parse_pattern_set({"401-405.X"})},
      {"valvular_disease", parse_pattern_set({"394.X", "385.X", "397.X", "398.X", "424.X"})},
      {"copd", parse_pattern_set({"490-496.X"})},
      {"cancer", parse_pattern_set({"140-159.9X", "160-165.9X", "170-176.9X", "179-189.9X", "190-199.2X",
                                    "200-208.92X", "209-209.79X"})},
  };
  return table;
}

}  // namespace hhf
