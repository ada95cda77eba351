#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hhf/common.hpp"

namespace hhf {

inline constexpr int kFs = 128;
inline constexpr double kUvPerLsb = 2.5;
inline constexpr double kMaxAbsUv = 5000.0;
inline constexpr std::int16_t kMaxAbsLsb = 2000;
inline constexpr std::size_t kDaySamples = 24ull * 3600 * kFs;      // 11,059,200
inline constexpr std::size_t kMinValidSamples = 20ull * 3600 * kFs;  // 9,216,000

// Clip to the +-5 mV range and round to the 2.5 uV grid.
std::int16_t quantize_uv(double uv);
inline double dequantize(std::int16_t lsb) { return lsb * kUvPerLsb; }

// A single-lead Holter recording. Amplitudes are held as their 16-bit
// quantization codes; sample(i) returns microvolts.
class EcgRecording {
 public:
  EcgRecording() = default;
  EcgRecording(std::string exam_id, std::string patient_id, DateTime start, std::vector<std::int16_t> codes);

  const std::string& exam_id() const { return exam_id_; }
  const std::string& patient_id() const { return patient_id_; }
  const DateTime& start_time() const { return start_; }
  int fs() const { return kFs; }

  std::size_t size() const { return codes_.size(); }
  std::size_t valid_len() const { return valid_len_; }
  double duration_hours() const { return static_cast<double>(valid_len_) / (3600.0 * kFs); }

  double sample(std::size_t i) const { return dequantize(codes_[i]); }
  std::span<const std::int16_t> codes() const { return codes_; }

  // Copies samples [offset, offset + out.size()) as microvolts.
  void copy_uv(std::size_t offset, std::span<double> out) const;

  void set_valid_len(std::size_t n);

 private:
  std::string exam_id_;
  std::string patient_id_;
  DateTime start_;
  std::vector<std::int16_t> codes_;
  std::size_t valid_len_ = 0;
};

struct ContainerPaths {
  std::filesystem::path header;
  std::filesystem::path blob;
};

// `path` may name the .hheader, the .hsig, or the common stem.
ContainerPaths container_paths(const std::filesystem::path& path);

EcgRecording read_recording(const std::filesystem::path& path);
ContainerPaths write_recording(const EcgRecording& rec, const std::filesystem::path& dir);

// Exactly 24 h: trims the tail of longer recordings, zero-pads shorter ones.
EcgRecording normalize_duration(const EcgRecording& rec);

}  // namespace hhf
