#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hhf {

// One ICD-9 pattern in the table convention:
//   "428.X"      category 428, any subcode
//   "402.01X"    subcode starting with 01
//   "404.13"     exact prefix
//   "433.X1"     non-trailing X matches exactly one digit
//   "410-412.X"  inclusive category range
class Icd9Pattern {
 public:
  static Icd9Pattern parse(std::string_view text);  // throws Error(BadPattern)

  bool matches(std::string_view code) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  int cat_lo_ = 0;
  int cat_hi_ = 0;
  std::string sub_;  // digits or 'X', trailing X stripped
  bool range_ = false;
};

using Icd9PatternSet = std::vector<Icd9Pattern>;

Icd9PatternSet parse_pattern_set(const std::vector<std::string>& patterns);
bool match_icd9(std::string_view code, const Icd9PatternSet& set);

// True for `NNN`, `NNN.N`, `NNN.NN` and V/E-prefixed codes.
bool is_valid_icd9(std::string_view code);

const Icd9PatternSet& heart_failure_codes();

struct Comorbidity {
  std::string name;
  Icd9PatternSet codes;
};
const std::vector<Comorbidity>& comorbidity_table();

}  // namespace hhf
