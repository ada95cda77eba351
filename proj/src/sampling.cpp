#include "hhf/sampling.hpp"

#include <random>

namespace hhf {

std::uint64_t plan_seed(std::uint64_t global_seed, const std::string& exam_id, std::uint64_t epoch) {
  return mix_seed(mix_seed(global_seed, exam_id), epoch);
}

WindowPlan plan_step1(const std::string& exam_id, std::uint64_t seed) {
  WindowPlan plan{exam_id, kWindowLen, kStep1Segment, {}, PlanMode::Step1Random};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pos(0, kStep1Segment - kWindowLen);
  plan.offsets.reserve(kStep1Windows);
  for (std::size_t i = 0; i < kStep1Windows; ++i) plan.offsets.push_back(i * kStep1Segment + pos(rng));
  return plan;
}

WindowPlan plan_step2_fixed(const std::string& exam_id, std::size_t c, std::size_t segment_len) {
  if (segment_len < kWindowLen || kDaySamples % segment_len != 0 || c > segment_len - kWindowLen) {
    throw Error(ErrorCode::OffsetOutOfRange, "step-2 segment " + std::to_string(segment_len) + " offset " +
                                                 std::to_string(c));
  }
  WindowPlan plan{exam_id, kWindowLen, segment_len, {}, PlanMode::Step2Fixed};
  const std::size_t n = kDaySamples / segment_len;
  plan.offsets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) plan.offsets.push_back(i * segment_len + c);
  return plan;
}

WindowPlan plan_step2(const std::string& exam_id, std::uint64_t seed, std::size_t segment_len) {
  if (segment_len < kWindowLen) throw Error(ErrorCode::OffsetOutOfRange, "segment shorter than a window");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pos(0, segment_len - kWindowLen);
  return plan_step2_fixed(exam_id, pos(rng), segment_len);
}

WindowBatch gather(const EcgRecording& rec, const WindowPlan& plan) {
  WindowBatch b;
  b.rows = plan.offsets.size();
  b.cols = plan.window_len;
  b.data.resize(b.rows * b.cols);
  b.masked.resize(b.rows);
  for (std::size_t i = 0; i < b.rows; ++i) {
    const std::size_t off = plan.offsets[i];
    if (off + plan.window_len > rec.size()) {
      throw Error(ErrorCode::OffsetOutOfRange, rec.exam_id() + " window at " + std::to_string(off));
    }
    rec.copy_uv(off, std::span<double>(b.data.data() + i * b.cols, b.cols));
    b.masked[i] = off >= rec.valid_len();
  }
  return b;
}

}  // namespace hhf
