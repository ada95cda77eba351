#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hhf/recording.hpp"

namespace hhf {

inline constexpr std::size_t kWindowLen = 30 * kFs;             // 3840
inline constexpr std::size_t kStep1Segment = 3 * 60 * kFs;      // 23040
inline constexpr std::size_t kStep2Segment = 2 * 60 * kFs;      // 15360
inline constexpr std::size_t kStep1Windows = kDaySamples / kStep1Segment;  // 480
inline constexpr std::size_t kStep2Windows = kDaySamples / kStep2Segment;  // 720

enum class PlanMode { Step1Random, Step2Fixed };

struct WindowPlan {
  std::string exam_id;
  std::size_t window_len = kWindowLen;
  std::size_t segment_len = 0;
  std::vector<std::size_t> offsets;
  PlanMode mode = PlanMode::Step1Random;
};

// Seed for one recording and epoch, derived from the run's global seed.
std::uint64_t plan_seed(std::uint64_t global_seed, const std::string& exam_id, std::uint64_t epoch);

// One uniform in-segment 30 s window per 3-minute segment.
WindowPlan plan_step1(const std::string& exam_id, std::uint64_t seed);

// A single random constant offset c per recording, stride of one segment.
WindowPlan plan_step2(const std::string& exam_id, std::uint64_t seed, std::size_t segment_len = kStep2Segment);
WindowPlan plan_step2_fixed(const std::string& exam_id, std::size_t c, std::size_t segment_len = kStep2Segment);

// Row-major n_windows x window_len matrix of microvolts plus a padding mask.
struct WindowBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<bool> masked;  // true when the window starts inside zero padding

  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

WindowBatch gather(const EcgRecording& rec, const WindowPlan& plan);

}  // namespace hhf
