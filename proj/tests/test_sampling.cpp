#include <doctest.h>

#include "hhf/sampling.hpp"

using namespace hhf;

namespace {

EcgRecording day(std::size_t valid) {
  std::vector<std::int16_t> codes(kDaySamples, 0);
  for (std::size_t i = 0; i < valid; ++i) codes[i] = static_cast<std::int16_t>(1 + i % 1000);
  EcgRecording r("E1", "P1", DateTime{Date::from_ymd(2018, 1, 1), 600}, std::move(codes));
  r.set_valid_len(valid);
  return r;
}

}  // namespace

TEST_CASE("constants") {
  CHECK(kWindowLen == 3840);
  CHECK(kStep1Windows == 480);
  CHECK(kStep2Windows == 720);
  CHECK(kStep1Windows * kStep1Segment == kDaySamples);
  CHECK(kStep2Windows * kStep2Segment == kDaySamples);
}

TEST_CASE("step-1 plans keep one window per 3-minute segment") {
  std::vector<std::size_t> first;
  std::size_t differing = 0;
  for (std::uint64_t epoch = 0; epoch < 100; ++epoch) {
    const auto p = plan_step1("E1", plan_seed(7, "E1", epoch));
    REQUIRE(p.offsets.size() == 480);
    CHECK(p.window_len == 3840);
    CHECK(p.mode == PlanMode::Step1Random);
    for (std::size_t i = 0; i < p.offsets.size(); ++i) {
      CHECK(p.offsets[i] >= i * 23040);
      CHECK(p.offsets[i] <= (i + 1) * 23040 - 3840);
    }
    CHECK(p.offsets[0] <= 19200);
    CHECK(p.offsets.back() + 3840 <= kDaySamples);
    if (epoch == 0) first = p.offsets;
    else if (p.offsets != first) ++differing;
  }
  CHECK(differing == 99);
}

TEST_CASE("plan seeds depend on every component") {
  const auto s = plan_seed(1, "E1", 0);
  CHECK(s == plan_seed(1, "E1", 0));
  CHECK(s != plan_seed(2, "E1", 0));
  CHECK(s != plan_seed(1, "E2", 0));
  CHECK(s != plan_seed(1, "E1", 1));
}

TEST_CASE("step-2 plans use a single constant offset") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = plan_step2("E1", seed);
    REQUIRE(p.offsets.size() == 720);
    CHECK(p.mode == PlanMode::Step2Fixed);
    const std::size_t c = p.offsets[0];
    CHECK(c <= 15360 - 3840);
    for (std::size_t i = 1; i < p.offsets.size(); ++i) CHECK(p.offsets[i] - p.offsets[i - 1] == 15360);
    CHECK(p.offsets.back() == 719 * 15360 + c);
    CHECK(p.offsets.back() + 3840 <= kDaySamples);
  }
  const auto z = plan_step2_fixed("E1", 0);
  CHECK(z.offsets[0] == 0);
  CHECK(z.offsets[1] == 15360);
  CHECK(z.offsets[2] == 30720);
}

TEST_CASE("gather shapes, masking and determinism") {
  const auto rec = day(kMinValidSamples);
  const auto plan = plan_step2_fixed("E1", 0);
  const auto a = gather(rec, plan);
  CHECK(a.rows == 720);
  CHECK(a.cols == 3840);
  CHECK(a.data.size() == 720 * 3840);
  const std::size_t first_masked = kMinValidSamples / kStep2Segment;  // 600
  for (std::size_t i = 0; i < a.rows; ++i) CHECK(a.masked[i] == (i >= first_masked));
  bool zero = true;
  for (std::size_t j = 0; j < a.cols; ++j) zero = zero && a.row(first_masked)[j] == 0.0;
  CHECK(zero);
  CHECK(a.row(1)[5] == rec.sample(15360 + 5));

  const auto b = gather(rec, plan);
  CHECK(a.data == b.data);
  CHECK(a.masked == b.masked);
}

TEST_CASE("gather rejects out-of-range offsets") {
  const auto rec = day(kDaySamples);
  auto plan = plan_step2_fixed("E1", 0);
  plan.offsets.back() = kDaySamples - 100;
  try {
    gather(rec, plan);
    FAIL("expected OffsetOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OffsetOutOfRange);
  }
}
