#include "hhf/emr.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hhf/icd9.hpp"

namespace hhf {

namespace {

const PatientTimeline kEmptyTimeline;

std::optional<double> parse_value(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadCsv, where + ": bad numeric value '" + s + "'");
  }
}

EventSource parse_source(const std::string& s) {
  if (s.empty() || s == "clinic") return EventSource::Clinic;
  if (s == "hospital") return EventSource::Hospital;
  throw Error(ErrorCode::BadCsv, "unknown source '" + s + "'");
}

}  // namespace

const PatientTimeline& EmrTables::timeline(const std::string& patient_id) const {
  auto it = timelines.find(patient_id);
  return it == timelines.end() ? kEmptyTimeline : it->second;
}

void EmrTables::add(EmrEvent e) { timelines[e.patient_id].push_back(std::move(e)); }

void EmrTables::sort_by_date() {
  for (auto& [_, tl] : timelines) {
    std::stable_sort(tl.begin(), tl.end(), [](const EmrEvent& a, const EmrEvent& b) { return a.date < b.date; });
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

CsvTable CsvTable::parse(const std::string& text, const std::string& name) {
  CsvTable t;
  t.name_ = name;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header_.size()) {
      throw Error(ErrorCode::BadCsv, name + ":" + std::to_string(lineno) + ": expected " +
                                         std::to_string(t.header_.size()) + " fields");
    }
    t.rows_.push_back(std::move(fields));
  }
  if (!have_header) throw Error(ErrorCode::BadCsv, name + ": missing header");
  return t;
}

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

bool CsvTable::has_column(const std::string& column) const {
  return std::find(header_.begin(), header_.end(), column) != header_.end();
}

const std::string& CsvTable::at(std::size_t row, const std::string& column) const {
  const auto it = std::find(header_.begin(), header_.end(), column);
  if (it == header_.end()) throw Error(ErrorCode::BadCsv, name_ + ": missing column " + column);
  return rows_.at(row)[static_cast<std::size_t>(it - header_.begin())];
}

EmrTables load_emr(const std::filesystem::path& dir) {
  EmrTables tables;
  auto load = [&](const char* file, auto&& per_row) {
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) return;
    const auto t = CsvTable::read(path);
    for (std::size_t r = 0; r < t.rows(); ++r) per_row(t, r, path.string() + ":" + std::to_string(r + 2));
  };

  load("diagnoses.csv", [&](const CsvTable& t, std::size_t r, const std::string& where) {
    EmrEvent e{t.at(r, "patient_id"), EventKind::Diagnosis, t.at(r, "icd9"), std::nullopt, Date::parse(t.at(r, "date")),
               t.has_column("source") ? parse_source(t.at(r, "source")) : EventSource::Clinic};
    if (!is_valid_icd9(e.code)) throw Error(ErrorCode::BadCsv, where + ": invalid ICD-9 code '" + e.code + "'");
    tables.add(std::move(e));
  });
  load("medications.csv", [&](const CsvTable& t, std::size_t r, const std::string&) {
    tables.add({t.at(r, "patient_id"), EventKind::Medication, t.at(r, "atc"), std::nullopt,
                Date::parse(t.at(r, "date")), EventSource::Clinic});
  });
  load("labs.csv", [&](const CsvTable& t, std::size_t r, const std::string& where) {
    tables.add({t.at(r, "patient_id"), EventKind::Lab, t.at(r, "name"), parse_value(t.at(r, "value"), where),
                Date::parse(t.at(r, "date")), EventSource::Clinic});
  });
  load("measures.csv", [&](const CsvTable& t, std::size_t r, const std::string& where) {
    tables.add({t.at(r, "patient_id"), EventKind::Measure, t.at(r, "name"), parse_value(t.at(r, "value"), where),
                Date::parse(t.at(r, "date")), EventSource::Clinic});
  });
  load("echoes.csv", [&](const CsvTable& t, std::size_t r, const std::string&) {
    tables.add({t.at(r, "patient_id"), EventKind::Echo, "echo", std::nullopt, Date::parse(t.at(r, "date")),
                EventSource::Clinic});
  });
  load("deaths.csv", [&](const CsvTable& t, std::size_t r, const std::string&) {
    tables.add({t.at(r, "patient_id"), EventKind::Death, "death", std::nullopt, Date::parse(t.at(r, "date")),
                EventSource::Clinic});
  });
  load("admissions.csv", [&](const CsvTable& t, std::size_t r, const std::string&) {
    tables.add({t.at(r, "patient_id"), EventKind::Admission, t.at(r, "department"), std::nullopt,
                Date::parse(t.at(r, "date")), EventSource::Hospital});
  });
  load("demographics.csv", [&](const CsvTable& t, std::size_t r, const std::string& where) {
    Demographics d;
    const auto& sex = t.at(r, "sex");
    if (sex == "male" || sex == "M") d.sex = Sex::Male;
    else if (sex == "female" || sex == "F") d.sex = Sex::Female;
    else throw Error(ErrorCode::BadCsv, where + ": sex '" + sex + "'");
    d.birth_year = static_cast<int>(parse_value(t.at(r, "birth_year"), where).value_or(0));
    const auto& sm = t.at(r, "smoker");
    d.smoker = sm == "1" || sm == "true" || sm == "yes";
    tables.demographics[t.at(r, "patient_id")] = d;
  });
  tables.sort_by_date();
  return tables;
}

void write_emr(const EmrTables& tables, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream dx(dir / "diagnoses.csv"), med(dir / "medications.csv"), lab(dir / "labs.csv"),
      mea(dir / "measures.csv"), echo(dir / "echoes.csv"), death(dir / "deaths.csv"), adm(dir / "admissions.csv"),
      demo(dir / "demographics.csv");
  dx << "patient_id,icd9,date,source\n";
  med << "patient_id,atc,date\n";
  lab << "patient_id,name,value,date\n";
  mea << "patient_id,name,value,date\n";
  echo << "patient_id,date\n";
  death << "patient_id,date\n";
  adm << "patient_id,department,date\n";
  demo << "patient_id,sex,birth_year,smoker\n";
  for (const auto& [pid, tl] : tables.timelines) {
    for (const auto& e : tl) {
      const auto d = e.date.iso();
      switch (e.kind) {
        case EventKind::Diagnosis:
          dx << pid << ',' << e.code << ',' << d << ',' << (e.source == EventSource::Hospital ? "hospital" : "clinic")
             << '\n';
          break;
        case EventKind::Medication: med << pid << ',' << e.code << ',' << d << '\n'; break;
        case EventKind::Lab: lab << pid << ',' << e.code << ',' << e.value.value_or(0) << ',' << d << '\n'; break;
        case EventKind::Measure: mea << pid << ',' << e.code << ',' << e.value.value_or(0) << ',' << d << '\n'; break;
        case EventKind::Echo: echo << pid << ',' << d << '\n'; break;
        case EventKind::Death: death << pid << ',' << d << '\n'; break;
        case EventKind::Admission: adm << pid << ',' << e.code << ',' << d << '\n'; break;
      }
    }
  }
  for (const auto& [pid, d] : tables.demographics) {
    demo << pid << ',' << (d.sex == Sex::Male ? "male" : "female") << ',' << d.birth_year << ','
         << (d.smoker ? 1 : 0) << '\n';
  }
}

std::vector<Exam> load_exams(const std::filesystem::path& path) {
  const auto t = CsvTable::read(path);
  std::vector<Exam> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out.push_back({t.at(r, "exam_id"), t.at(r, "patient_id"), Date::parse(t.at(r, "exam_date"))});
  }
  return out;
}

void write_exams(const std::vector<Exam>& exams, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "exam_id,patient_id,exam_date\n";
  for (const auto& e : exams) out << e.exam_id << ',' << e.patient_id << ',' << e.exam_date.iso() << '\n';
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace hhf
