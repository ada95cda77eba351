#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "hhf/model.hpp"
#include "hhf/sampling.hpp"

using namespace hhf;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.enc_filters = 4;
  c.enc_strides = {8, 4, 4, 6};
  c.enc_hidden = 8;
  c.feat_dim = 6;
  c.cls_hidden = 5;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 2;
  c.ff_dim = 12;
  c.head_hidden = 6;
  c.seq_len = 10;
  return c;
}

std::vector<double> window(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 400.0);
  std::vector<double> w(kWindowLen);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = d(rng) + 800.0 * std::sin(0.05 * static_cast<double>(i));
  return w;
}

std::vector<double> features(std::size_t seq, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> f(seq * dim);
  for (auto& v : f) v = d(rng);
  return f;
}

bool close_rel(double analytic, double numeric) {
  return std::abs(analytic - numeric) <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

}  // namespace

TEST_CASE("weighted BCE values") {
  const double z0[] = {0.0}, y1[] = {1.0};
  CHECK(weighted_bce(z0, y1, 1.0) == doctest::Approx(0.693147180559945).epsilon(1e-12));
  CHECK(weighted_bce(z0, y1, 3.0) == doctest::Approx(2.079441541679836).epsilon(1e-12));
  const double z40[] = {40.0};
  const double l = weighted_bce(z40, y1, 5.0);
  const long double oracle = 5.0L * std::log1p(std::exp(-40.0L));
  CHECK(std::isfinite(l));
  CHECK(l < 1e-15);
  CHECK(std::abs(static_cast<long double>(l) - oracle) <= 1e-6L * oracle);
  const double zm[] = {-800.0}, y0[] = {0.0};
  CHECK(weighted_bce(zm, y0, 1.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(weighted_bce(zm, y1, 1.0)));
  CHECK(weighted_bce(zm, y1, 1.0) == doctest::Approx(800.0));
}

TEST_CASE("BCE gradient matches finite differences") {
  for (double z : {-3.0, -0.2, 0.0, 1.7}) {
    for (double y : {0.0, 1.0}) {
      const double h = 1e-6;
      const double zp[] = {z + h}, zm[] = {z - h}, yy[] = {y};
      const double fd = (weighted_bce(zp, yy, 2.5) - weighted_bce(zm, yy, 2.5)) / (2 * h);
      CHECK(weighted_bce_grad(z, y, 2.5, 1) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("encoder shapes and determinism") {
  Model m(tiny());
  m.init(1);
  const auto w = window(3);
  EncoderTape t1, t2;
  const double a = m.encoder().forward(m.params(), w, false, nullptr, t1);
  const double b = m.encoder().forward(m.params(), w, false, nullptr, t2);
  CHECK(std::isfinite(a));
  CHECK(a == b);
  CHECK(t1.feat.size() == tiny().feat_dim);
  CHECK(t1.feat == t2.feat);

  std::vector<double> zero(kWindowLen, 0.0);
  EncoderTape tz;
  CHECK(std::isfinite(m.encoder().forward(m.params(), zero, false, nullptr, tz)));
}

TEST_CASE("encoder output depends only on its own window") {
  Model m(tiny());
  m.init(2);
  const auto wa = window(5), wb = window(6);
  EncoderTape ta, tab;
  const double a = m.encoder().forward(m.params(), wa, false, nullptr, ta);
  m.encoder().forward(m.params(), wb, false, nullptr, tab);
  const double a2 = m.encoder().forward(m.params(), wa, false, nullptr, tab);
  CHECK(a == a2);
  CHECK(ta.feat == tab.feat);
}

TEST_CASE("parameters live on the float32 grid after init") {
  Model m(tiny());
  m.init(4);
  for (const auto& p : m.params().all())
    for (double v : p.value) CHECK(v == round_to_float(v));
}

TEST_CASE("encoder gradients match central finite differences") {
  Model m(tiny());
  m.init(7);
  auto& store = m.params();
  const auto w = window(8);
  const auto g = features(1, tiny().feat_dim, 9);
  const double label = 1.0, pw = 2.0;
  auto loss = [&]() {
    EncoderTape t;
    const double z = m.encoder().forward(store, w, false, nullptr, t);
    const double zz[] = {z}, yy[] = {label};
    double l = weighted_bce(zz, yy, pw);
    for (std::size_t i = 0; i < g.size(); ++i) l += g[i] * t.feat[i];
    return l;
  };
  store.zero_grad();
  EncoderTape t;
  const double z = m.encoder().forward(store, w, false, nullptr, t);
  m.encoder().backward(store, t, g, weighted_bce_grad(z, label, pw, 1));

  std::mt19937_64 rng(10);
  int checked = 0, failed = 0;
  while (checked < 50) {
    const std::size_t pi = rng() % store.size();
    auto& p = store[pi];
    if (!is_encoder_param(p.name)) continue;
    const std::size_t j = rng() % p.size();
    const double orig = p.value[j], h = 1e-4;
    p.value[j] = orig + h;
    const double lp = loss();
    p.value[j] = orig - h;
    const double lm = loss();
    p.value[j] = orig;
    const double fd = (lp - lm) / (2 * h);
    if (!close_rel(p.grad[j], fd)) {
      ++failed;
      MESSAGE(p.name << "[" << j << "] analytic " << p.grad[j] << " numeric " << fd);
    }
    ++checked;
  }
  CHECK(failed == 0);
}

TEST_CASE("head gradients match central finite differences") {
  auto cfg = tiny();
  Model m(cfg);
  m.init(11);
  auto& store = m.params();
  const std::size_t seq = 10;
  auto f = features(seq, cfg.feat_dim, 12);
  std::vector<bool> mask(seq, false);
  mask[8] = mask[9] = true;
  auto loss = [&](const std::vector<double>& feats) {
    HeadTape t;
    const double z = m.head().forward(store, feats, mask, false, nullptr, t);
    const double zz[] = {z}, yy[] = {0.0};
    return weighted_bce(zz, yy, 1.0);
  };
  store.zero_grad();
  HeadTape t;
  const double z = m.head().forward(store, f, mask, false, nullptr, t);
  std::vector<double> df;
  m.head().backward(store, t, weighted_bce_grad(z, 0.0, 1.0, 1), &df);
  REQUIRE(df.size() == f.size());

  for (const auto& p : store.all())
    if (is_encoder_param(p.name))
      for (double gv : p.grad) REQUIRE(gv == 0.0);

  std::mt19937_64 rng(13);
  int checked = 0, failed = 0;
  while (checked < 50) {
    const std::size_t pi = rng() % store.size();
    auto& p = store[pi];
    if (is_encoder_param(p.name)) continue;
    const std::size_t j = rng() % p.size();
    const double orig = p.value[j], h = 1e-4;
    p.value[j] = orig + h;
    const double lp = loss(f);
    p.value[j] = orig - h;
    const double lm = loss(f);
    p.value[j] = orig;
    const double fd = (lp - lm) / (2 * h);
    if (!close_rel(p.grad[j], fd)) {
      ++failed;
      MESSAGE(p.name << "[" << j << "] analytic " << p.grad[j] << " numeric " << fd);
    }
    ++checked;
  }
  CHECK(failed == 0);

  for (std::size_t j = 0; j < f.size(); j += 5) {
    auto fp = f, fm = f;
    fp[j] += 1e-4;
    fm[j] -= 1e-4;
    const double fd = (loss(fp) - loss(fm)) / 2e-4;
    CHECK(close_rel(df[j], fd));
    if (j / cfg.feat_dim >= 8) CHECK(df[j] == 0.0);
  }
}

TEST_CASE("head: attention rows, permutation and masking") {
  auto cfg = tiny();
  Model m(cfg);
  m.init(21);
  const std::size_t seq = 10;
  auto f = features(seq, cfg.feat_dim, 22);
  std::vector<bool> mask(seq, false);
  mask[7] = mask[8] = mask[9] = true;

  HeadTape t;
  const double z = m.head().forward(m.params(), f, mask, false, nullptr, t);
  CHECK(std::isfinite(z));
  for (const auto& lt : t.layers) {
    REQUIRE(lt.p.size() == cfg.n_heads * seq * seq);
    for (std::size_t h = 0; h < cfg.n_heads; ++h)
      for (std::size_t i = 0; i < seq; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < seq; ++j) {
          const double p = lt.p[(h * seq + i) * seq + j];
          if (mask[j]) CHECK(p == 0.0);
          s += p;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
  }

  SUBCASE("changing masked features leaves the logit unchanged") {
    auto g = f;
    for (std::size_t j = 7 * cfg.feat_dim; j < g.size(); ++j) g[j] = 1e3 * (static_cast<double>(j) + 1.0);
    HeadTape t2;
    CHECK(m.head().forward(m.params(), g, mask, false, nullptr, t2) == z);
  }
  SUBCASE("swapping two unmasked positions changes the logit") {
    auto g = f;
    for (std::size_t c = 0; c < cfg.feat_dim; ++c) std::swap(g[1 * cfg.feat_dim + c], g[4 * cfg.feat_dim + c]);
    HeadTape t2;
    CHECK(m.head().forward(m.params(), g, mask, false, nullptr, t2) != z);
  }
  SUBCASE("all-masked input is rejected") {
    HeadTape t2;
    try {
      m.head().forward(m.params(), f, std::vector<bool>(seq, true), false, nullptr, t2);
      FAIL("expected AllMasked");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AllMasked);
    }
  }
  SUBCASE("wrong feature width is rejected") {
    HeadTape t2;
    std::vector<double> bad(seq * (cfg.feat_dim + 1));
    try {
      m.head().forward(m.params(), bad, mask, false, nullptr, t2);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
  }
}

TEST_CASE("train and eval modes agree when dropout is off") {
  auto cfg = tiny();
  cfg.dropout_p = 0.0;
  Model m(cfg);
  m.init(31);
  std::mt19937_64 rng(1);
  const auto w = window(32);
  EncoderTape te, tt;
  CHECK(m.encoder().forward(m.params(), w, false, nullptr, te) == m.encoder().forward(m.params(), w, true, &rng, tt));
  const auto f = features(10, cfg.feat_dim, 33);
  std::vector<bool> mask(10, false);
  HeadTape he, ht;
  CHECK(m.head().forward(m.params(), f, mask, false, nullptr, he) ==
        m.head().forward(m.params(), f, mask, true, &rng, ht));
}

TEST_CASE("dropout in train mode perturbs the output") {
  auto cfg = tiny();
  cfg.dropout_p = 0.5;
  Model m(cfg);
  m.init(41);
  std::mt19937_64 rng(2);
  const auto w = window(42);
  EncoderTape te, tt;
  const double eval = m.encoder().forward(m.params(), w, false, nullptr, te);
  bool differs = false;
  for (int i = 0; i < 5; ++i) differs = differs || m.encoder().forward(m.params(), w, true, &rng, tt) != eval;
  CHECK(differs);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = fs::temp_directory_path() / "hhf_ckpt_test";
  fs::remove_all(dir);
  Model m(tiny());
  m.init(51);
  save_checkpoint(m, dir);
  const Model back = load_checkpoint(dir);
  CHECK(back.config() == m.config());
  REQUIRE(back.params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    CHECK(back.params()[i].name == m.params()[i].name);
    CHECK(back.params()[i].shape == m.params()[i].shape);
    CHECK(back.params()[i].value == m.params()[i].value);
  }
  const auto w = window(52);
  EncoderTape t1, t2;
  CHECK(m.encoder().forward(m.params(), w, false, nullptr, t1) ==
        back.encoder().forward(back.params(), w, false, nullptr, t2));

  SUBCASE("truncated tensor file") {
    fs::resize_file(dir / "params.f32", fs::file_size(dir / "params.f32") - 4);
    try {
      load_checkpoint(dir);
      FAIL("expected IncompatibleCheckpoint");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::IncompatibleCheckpoint);
    }
  }
  SUBCASE("wrong format tag") {
    std::ifstream in(dir / "manifest.txt");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    text.replace(text.find("hhf-checkpoint-1"), 16, "hhf-checkpoint-9");
    std::ofstream(dir / "manifest.txt") << text;
    CHECK_THROWS_AS(load_checkpoint(dir), Error);
  }
}

TEST_CASE("copying an encoder between mismatched configs fails") {
  auto a = tiny(), b = tiny();
  b.enc_filters = 6;
  Model ma(a), mb(b);
  ma.init(1);
  mb.init(1);
  try {
    ma.copy_encoder_from(mb);
    FAIL("expected IncompatibleCheckpoint");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompatibleCheckpoint);
  }
  Model mc(a);
  mc.init(99);
  mc.copy_encoder_from(ma);
  for (std::size_t i = 0; i < mc.params().size(); ++i) {
    if (is_encoder_param(mc.params()[i].name)) CHECK(mc.params()[i].value == ma.params()[i].value);
  }
}

TEST_CASE("config validation") {
  auto c = tiny();
  c.enc_strides = {7, 4, 4, 4};
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny();
  c.n_layers = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny();
  auto d = ModelConfig{};
  d.apply_kv(c.to_kv());
  CHECK(d == c);
}
