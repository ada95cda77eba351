#include "hhf/recording.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hhf {

namespace {
std::uint16_t bswap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }
}  // namespace


std::int16_t quantize_uv(double uv) {
  if (!std::isfinite(uv)) return 0;
  const double lsb = std::nearbyint(uv / kUvPerLsb);
  if (lsb > kMaxAbsLsb) return kMaxAbsLsb;
  if (lsb < -kMaxAbsLsb) return -kMaxAbsLsb;
  return static_cast<std::int16_t>(lsb);
}

EcgRecording::EcgRecording(std::string exam_id, std::string patient_id, DateTime start,
                           std::vector<std::int16_t> codes)
    : exam_id_(std::move(exam_id)),
      patient_id_(std::move(patient_id)),
      start_(start),
      codes_(std::move(codes)),
      valid_len_(codes_.size()) {}

void EcgRecording::copy_uv(std::size_t offset, std::span<double> out) const {
  if (offset + out.size() > codes_.size()) {
    throw Error(ErrorCode::OffsetOutOfRange, "copy past end of recording " + exam_id_);
  }
  const std::int16_t* src = codes_.data() + offset;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] * kUvPerLsb;
}

void EcgRecording::set_valid_len(std::size_t n) {
  if (n > codes_.size()) throw Error(ErrorCode::LengthMismatch, "valid_len beyond sample count");
  valid_len_ = n;
}

ContainerPaths container_paths(const std::filesystem::path& path) {
  auto stem = path;
  if (stem.extension() == ".hheader" || stem.extension() == ".hsig") stem.replace_extension();
  auto header = stem;
  header += ".hheader";
  auto blob = stem;
  blob += ".hsig";
  return {header, blob};
}

EcgRecording read_recording(const std::filesystem::path& path) {
  const auto paths = container_paths(path);
  std::ifstream hin(paths.header);
  if (!hin) throw Error(ErrorCode::Io, "cannot open " + paths.header.string());

  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(hin, line)) {
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::CorruptHeader, "line without '=': " + t);
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::CorruptHeader, "missing field " + key);
    return it->second;
  };

  std::size_t n_samples = 0;
  int fs = 0;
  double scale = 0;
  DateTime start;
  try {
    fs = std::stoi(field("fs"));
    n_samples = std::stoull(field("n_samples"));
    scale = std::stod(field("scale_uv_per_lsb"));
    start = DateTime::parse(field("start_time"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptHeader) throw;
    throw Error(ErrorCode::CorruptHeader, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptHeader, std::string("unparseable numeric field: ") + e.what());
  }
  if (fs != kFs) throw Error(ErrorCode::BadSampleRate, "fs=" + std::to_string(fs));
  if (scale != kUvPerLsb) throw Error(ErrorCode::CorruptHeader, "scale_uv_per_lsb must be 2.5");

  std::error_code ec;
  const auto blob_bytes = std::filesystem::file_size(paths.blob, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot stat " + paths.blob.string());
  if (blob_bytes != n_samples * sizeof(std::int16_t)) {
    throw Error(ErrorCode::LengthMismatch, "blob holds " + std::to_string(blob_bytes / 2) + " samples, header says " +
                                               std::to_string(n_samples));
  }

  std::vector<std::int16_t> codes(n_samples);
  std::ifstream bin(paths.blob, std::ios::binary);
  if (!bin.read(reinterpret_cast<char*>(codes.data()), static_cast<std::streamsize>(blob_bytes))) {
    throw Error(ErrorCode::Io, "short read on " + paths.blob.string());
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& c : codes) c = static_cast<std::int16_t>(bswap16(static_cast<std::uint16_t>(c)));
  }

  EcgRecording rec(field("exam_id"), field("patient_id"), start, std::move(codes));
  if (auto it = kv.find("valid_len"); it != kv.end()) {
    try {
      rec.set_valid_len(std::stoull(it->second));
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::CorruptHeader, "valid_len");
    }
  }
  return rec;
}

ContainerPaths write_recording(const EcgRecording& rec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto paths = container_paths(dir / rec.exam_id());
  {
    std::ofstream h(paths.header);
    h << "exam_id=" << rec.exam_id() << "\n"
      << "patient_id=" << rec.patient_id() << "\n"
      << "start_time=" << rec.start_time().iso() << "\n"
      << "fs=" << kFs << "\n"
      << "n_samples=" << rec.size() << "\n"
      << "scale_uv_per_lsb=2.5\n";
    if (rec.valid_len() != rec.size()) h << "valid_len=" << rec.valid_len() << "\n";
    if (!h) throw Error(ErrorCode::Io, "cannot write " + paths.header.string());
  }
  std::ofstream b(paths.blob, std::ios::binary);
  if constexpr (std::endian::native == std::endian::little) {
    b.write(reinterpret_cast<const char*>(rec.codes().data()),
            static_cast<std::streamsize>(rec.size() * sizeof(std::int16_t)));
  } else {
    for (auto c : rec.codes()) {
      const auto le = bswap16(static_cast<std::uint16_t>(c));
      b.write(reinterpret_cast<const char*>(&le), 2);
    }
  }
  if (!b) throw Error(ErrorCode::Io, "cannot write " + paths.blob.string());
  return paths;
}

EcgRecording normalize_duration(const EcgRecording& rec) {
  if (rec.valid_len() < kMinValidSamples) {
    throw Error(ErrorCode::TooShort, rec.exam_id() + " has " + std::to_string(rec.valid_len()) + " valid samples");
  }
  const auto codes = rec.codes();
  std::vector<std::int16_t> out(kDaySamples, 0);
  const std::size_t keep = std::min(rec.valid_len(), kDaySamples);
  std::copy(codes.begin(), codes.begin() + static_cast<std::ptrdiff_t>(keep), out.begin());
  EcgRecording norm(rec.exam_id(), rec.patient_id(), rec.start_time(), std::move(out));
  norm.set_valid_len(keep);
  return norm;
}

}  // namespace hhf
