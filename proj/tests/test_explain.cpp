#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "hhf/explain.hpp"
#include "hhf/kmeans.hpp"
#include "hhf/sampling.hpp"
#include "hhf/synth.hpp"

using namespace hhf;

namespace {

LayerAttention layer(std::size_t heads, std::size_t seq, double attn, double grad) {
  return {heads, seq, std::vector<double>(heads * seq * seq, attn), std::vector<double>(heads * seq * seq, grad)};
}

LayerAttention random_layer(std::size_t heads, std::size_t seq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), g(-1.0, 1.0);
  LayerAttention L{heads, seq, std::vector<double>(heads * seq * seq), std::vector<double>(heads * seq * seq)};
  for (auto& v : L.attn) v = u(rng);
  for (auto& v : L.grad) v = g(rng);
  return L;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Gaussian QRS of the given width centred in a 100-sample beat, with noise.
std::vector<double> beats(std::size_t n, double width, double amp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 20.0);
  const double s = qrs_sigma_for_width(width);
  std::vector<double> out;
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < kBeatLen; ++i) {
      const double d = static_cast<double>(i) - 50.0;
      out.push_back(amp * std::exp(-d * d / (2 * s * s)) + noise(rng));
    }
  return out;
}

AttentionProfile profile_at(int start_minute, std::vector<double> mass) {
  AttentionProfile p;
  p.start_time = DateTime{Date::from_ymd(2018, 1, 1), start_minute};
  p.mask.assign(mass.size(), false);
  p.mass = std::move(mass);
  return p;
}

}  // namespace

TEST_CASE("uniform attention and gradient give a uniform profile") {
  const std::size_t seq = 12;
  const std::vector<bool> mask(seq, false);
  const auto m = rollout({layer(2, seq, 1.0 / seq, 0.3)}, mask);
  REQUIRE(m.size() == seq);
  for (double v : m) CHECK(v == doctest::Approx(1.0 / seq));
  const auto m3 = rollout({layer(2, seq, 1.0 / seq, 0.3), layer(2, seq, 1.0 / seq, 0.3), layer(2, seq, 1.0 / seq, 0.3)}, mask);
  for (double v : m3) CHECK(v == doctest::Approx(1.0 / seq));
}

TEST_CASE("identity attention layers pass the first-layer mass through") {
  const std::size_t seq = 6;
  const std::vector<bool> mask(seq, false);
  LayerAttention id{1, seq, std::vector<double>(seq * seq, 0.0), std::vector<double>(seq * seq, 1.0)};
  for (std::size_t i = 0; i < seq; ++i) id.attn[i * seq + i] = 1.0;
  const auto one = rollout({id}, mask);
  const auto three = rollout({id, id, id}, mask);
  for (std::size_t i = 0; i < seq; ++i) {
    CHECK(one[i] == doctest::Approx(1.0 / seq));
    CHECK(three[i] == doctest::Approx(one[i]));
  }
}

TEST_CASE("rollout matches a hand-composed two-layer example") {
  // seq 2, one head, no discard: layer matrices after clamp, +I and row
  // normalisation, then u^T A2 A1 with u = (1/2, 1/2).
  const std::vector<bool> mask(2, false);
  LayerAttention l1{1, 2, {0.5, 0.5, 0.5, 0.5}, {1.0, 0.0, 1.0, -1.0}};
  LayerAttention l2{1, 2, {0.2, 0.8, 0.6, 0.4}, {1.0, 1.0, 1.0, 1.0}};
  RolloutOptions opt;
  opt.discard_ratio = 0.0;
  const auto m = rollout({l1, l2}, mask, opt);
  // l1: clamp -> [[.5,0],[.5,0]] -> rows [[1,0],[1,0]] -> +I [[2,0],[1,1]] -> [[1,0],[.5,.5]]
  // l2: [[.2,.8],[.6,.4]] -> +I [[1.2,.8],[.6,1.4]] -> [[.6,.4],[.3,.7]]
  // u A2 = [.45,.55]; (u A2) A1 = [.45 + .275, .275] = [.725, .275]
  CHECK(m[0] == doctest::Approx(0.725));
  CHECK(m[1] == doctest::Approx(0.275));
}

TEST_CASE("rollout is invariant to a positive rescaling of a layer") {
  const std::size_t seq = 10;
  std::vector<bool> mask(seq, false);
  mask[9] = true;
  auto a = random_layer(2, seq, 1), b = random_layer(2, seq, 2);
  const auto base = rollout({a, b}, mask);
  for (auto& v : a.grad) v *= 7.5;
  const auto scaled = rollout({a, b}, mask);
  for (std::size_t i = 0; i < seq; ++i) CHECK(scaled[i] == doctest::Approx(base[i]).epsilon(1e-12));
  CHECK(sum(base) == doctest::Approx(1.0));
  CHECK(base[9] == 0.0);
}

TEST_CASE("rollout ignores entries touching masked positions") {
  const std::size_t seq = 8;
  std::vector<bool> mask(seq, false);
  mask[6] = mask[7] = true;
  auto a = random_layer(2, seq, 3);
  const auto base = rollout({a}, mask);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < seq; ++i)
      for (std::size_t j = 0; j < seq; ++j)
        if (mask[i] || mask[j]) a.attn[(h * seq + i) * seq + j] = 50.0 + static_cast<double>(i + j);
  const auto changed = rollout({a}, mask);
  for (std::size_t i = 0; i < seq; ++i) CHECK(changed[i] == base[i]);
  CHECK_THROWS_AS(rollout({}, mask), Error);
  CHECK_THROWS_AS(rollout({a}, std::vector<bool>(seq, true)), Error);
}

TEST_CASE("high-attention positions keep the top tenth") {
  std::vector<double> mass(100);
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = static_cast<double>((i * 37) % 100);
  std::vector<bool> mask(100, false);
  const auto high = high_attention_positions(mass, mask, 0.9);
  std::size_t n = 0;
  for (std::size_t i = 0; i < 100; ++i)
    if (high[i]) {
      ++n;
      CHECK(mass[i] >= 90.0);
    }
  CHECK(n == 10);
}

TEST_CASE("circadian density") {
  SUBCASE("all mass at 09:00 covers one bin") {
    std::vector<double> m(720, 0.0);
    m[30] = 1.0;  // start 08:00 + 30 * 2 min
    const auto d = circadian_density({profile_at(8 * 60, m)}, 10);
    CHECK(sum(d.mass) == doctest::Approx(1.0));
    CHECK(d.mass[54] == doctest::Approx(1.0));
    CHECK(d.cover95.begin_min == 540);
    CHECK(d.cover95.end_min == 550);
    CHECK(d.cover95.length_min() == 10);
  }
  SUBCASE("opposite start times with uniform profiles are flat") {
    const std::vector<double> u(720, 1.0 / 720);
    const auto d = circadian_density({profile_at(0, u), profile_at(720, u)}, 30);
    CHECK(sum(d.mass) == doctest::Approx(1.0));
    for (double v : d.mass) CHECK(v == doctest::Approx(1.0 / 48));
  }
  SUBCASE("each profile contributes unit mass regardless of its scale") {
    std::vector<double> a(720, 0.0), b(720, 0.0);
    a[0] = 5.0;    // 00:00
    b[360] = 0.1;  // 12:00
    const auto d = circadian_density({profile_at(0, a), profile_at(0, b)}, 60);
    CHECK(d.mass[0] == doctest::Approx(0.5));
    CHECK(d.mass[12] == doctest::Approx(0.5));
  }
  SUBCASE("cover wraps midnight") {
    std::vector<double> bins(24, 0.0);
    bins[23] = 0.5;
    bins[0] = 0.5;
    const auto c = shortest_cover(bins, 60, 0.95);
    CHECK(c.begin_min == 23 * 60);
    CHECK(c.end_min == 60);
    CHECK(c.wraps());
    CHECK(c.length_min() == 120);
  }
}

TEST_CASE("beat extraction") {
  SynthSpec s;
  s.seed = 8;
  s.duration_h = 20;
  s.mean_hr = 60;
  s.hr_circadian_amp = 0.001;
  s.noise_rms = 0;
  const auto rec = synthesize(s);
  std::vector<double> seg(kBeatSegment);
  rec.copy_uv(3600 * kFs, seg);
  const auto b = extract_beats(seg, 3600 * kFs, "E0");
  CHECK(b.count >= 8);
  CHECK(b.data.size() == b.count * kBeatLen);
  for (auto r : b.r_peak) CHECK(r >= 3600u * kFs + kBeatHalfWidth);

  const auto flat = EcgRecording("F", "P", s.start_time, std::vector<std::int16_t>(kDaySamples, 0));
  AttentionProfile p;
  p.mass.assign(720, 1.0 / 720);
  p.mask.assign(720, false);
  p.high.assign(720, true);
  try {
    extract_high_attention_beats(flat, p);
    FAIL("expected NoBeatsFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoBeatsFound);
  }
}

TEST_CASE("k-means objective never increases and is seed deterministic") {
  const auto x = beats(60, 12, 1000, 1);
  auto y = beats(60, 30, 1000, 2);
  std::vector<double> all = x;
  all.insert(all.end(), y.begin(), y.end());
  const auto a = kmeans(all, 120, kBeatLen, 3, 42);
  const auto b = kmeans(all, 120, kBeatLen, 3, 42);
  CHECK(a.assignment == b.assignment);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("silhouette matches a brute-force computation") {
  const std::vector<double> x{0.0, 1.0, 10.0, 11.0, 12.0};
  const std::vector<int> a{0, 0, 1, 1, 1};
  // point 0: a=1, b=(10+11+12)/3=11 -> 1-1/11; point 1: a=1, b=10 -> 0.9
  // point 2: a=1.5, b=9.5 -> 1-1.5/9.5; point 3: a=1, b=10.5; point 4: a=1.5, b=11.5
  const double expected =
      ((1 - 1.0 / 11) + 0.9 + (1 - 1.5 / 9.5) + (1 - 1.0 / 10.5) + (1 - 1.5 / 11.5)) / 5.0;
  CHECK(silhouette(x, 5, 1, a, 2) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("two beat morphologies are separated") {
  auto narrow = beats(100, 12, 1200, 10), wide = beats(100, 30, 1600, 11);
  std::vector<double> all = narrow;
  all.insert(all.end(), wide.begin(), wide.end());
  const auto r = cluster_beats(all, 200, kBeatLen, {});
  CHECK(r.k == 2);
  std::size_t pure = 0;
  for (int c = 0; c < 2; ++c) {
    std::size_t in_first = 0, in_second = 0;
    for (std::size_t i = 0; i < 200; ++i)
      if (r.assignment[i] == c) (i < 100 ? in_first : in_second)++;
    pure += std::max(in_first, in_second);
  }
  CHECK(static_cast<double>(pure) / 200.0 >= 0.95);
  REQUIRE(r.clusters.size() == 2);
  for (const auto& c : r.clusters) {
    CHECK(c.size >= 30);
    CHECK(c.average.size() == kBeatLen);
  }
}

TEST_CASE("clusters below 30 beats are dropped") {
  auto a = beats(100, 12, 1200, 20), b = beats(100, 30, 1600, 21), c = beats(29, 12, -1500, 22);
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  all.insert(all.end(), c.begin(), c.end());
  const auto r = cluster_beats(all, 229, kBeatLen, {});
  REQUIRE(r.k == 3);
  CHECK(r.clusters.size() == 2);
  for (std::size_t i = 200; i < 229; ++i) CHECK(r.assignment[i] == -1);
  for (const auto& cl : r.clusters) CHECK(cl.size >= 30);
}

TEST_CASE("degenerate beat sets") {
  const std::vector<double> same(100 * kBeatLen, 7.0);
  CHECK_THROWS_AS(cluster_beats(same, 100, kBeatLen, {}), Error);
  const auto few = beats(40, 12, 1000, 1);
  try {
    cluster_beats(few, 40, kBeatLen, {});
    FAIL("expected TooFewBeats");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewBeats);
  }
}

TEST_CASE("output writers") {
  const auto dir = std::filesystem::temp_directory_path() / "hhf_explain_out";
  std::filesystem::create_directories(dir);
  AttentionProfile p = profile_at(23 * 60 + 50, std::vector<double>(720, 1.0 / 720));
  p.high.assign(720, false);
  write_profile_csv(p, dir / "profile.csv");
  std::ifstream in(dir / "profile.csv");
  std::string header, first, second, third, line6;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == "position,wall_clock,mass,high");
  CHECK(first.rfind("0,2018-01-01T23:50,", 0) == 0);
  for (int i = 0; i < 5; ++i) std::getline(in, line6);
  CHECK(line6.rfind("6,2018-01-02T00:02,", 0) == 0);

  BeatSet b;
  b.count = 1;
  b.data.assign(kBeatLen, 2.5);
  b.exam_id = {"E1"};
  b.r_peak = {1234};
  write_beats(b, dir / "beats");
  CHECK(std::filesystem::file_size(dir / "beats.f32") == kBeatLen * 4);
}
