#include "hhf/encoder.hpp"

#include <cmath>

#include "hhf/kernels.hpp"
#include "hhf/sampling.hpp"

namespace hhf {

double elu(double x) { return x > 0 ? x : std::expm1(x); }
double elu_grad(double pre) { return pre > 0 ? 1.0 : std::exp(pre); }

namespace {

using kernels::Conv1dShape;

Conv1dShape stem_shape(const ModelConfig& c) {
  return {1, c.enc_filters, c.enc_first_kernel, 1, (c.enc_first_kernel - 1) / 2, kWindowLen, kWindowLen};
}
Conv1dShape res1_shape(const ModelConfig& c, std::size_t len) {
  return {c.enc_filters, c.res_hidden(), 3, 1, 1, len, len};
}
Conv1dShape res2_shape(const ModelConfig& c, std::size_t len) {
  return {c.res_hidden(), c.enc_filters, 1, 1, 0, len, len};
}
Conv1dShape down_shape(const ModelConfig& c, std::size_t len, std::size_t stride) {
  return {c.enc_filters, c.enc_filters, 2 * stride, stride, stride / 2, len, len / stride};
}

void apply_elu(const std::vector<double>& in, std::vector<double>& out) {
  out.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = elu(in[i]);
}

// dx[i] = dy[i] * elu'(pre[i]) in place on dy.
void elu_backward(const std::vector<double>& pre, std::vector<double>& dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= elu_grad(pre[i]);
}

// y[out] = W[out x in] x + b
void matvec(const Param& w, const Param& b, std::span<const double> x, std::vector<double>& y) {
  const std::size_t out = w.shape[0], in = w.shape[1];
  y.assign(out, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double* wr = w.value.data() + o * in;
    double acc = b.value[o];
    for (std::size_t i = 0; i < in; ++i) acc += wr[i] * x[i];
    y[o] = acc;
  }
}

// Accumulates dW, db; writes dx (overwrites) when non-null.
void matvec_backward(Param& w, Param& b, std::span<const double> x, std::span<const double> dy,
                     std::vector<double>* dx) {
  const std::size_t out = w.shape[0], in = w.shape[1];
  if (dx) dx->assign(in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    b.grad[o] += g;
    double* gw = w.grad.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) gw[i] += g * x[i];
    if (dx) {
      const double* wr = w.value.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) (*dx)[i] += g * wr[i];
    }
  }
}

void dropout(std::vector<double>& v, std::vector<double>& mask, double p, bool train, std::mt19937_64* rng) {
  mask.assign(v.size(), 1.0);
  if (!train || p <= 0 || rng == nullptr) return;
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < v.size(); ++i) {
    mask[i] = keep(*rng) ? scale : 0.0;
    v[i] *= mask[i];
  }
}

}  // namespace

EncoderNet::EncoderNet(const ModelConfig& cfg, ParamStore& store) : cfg_(cfg) {
  const std::size_t c = cfg.enc_filters, h = cfg.res_hidden();
  conv0_w_ = store.add("enc.conv0.w", {c, 1, cfg.enc_first_kernel});
  conv0_b_ = store.add("enc.conv0.b", {c});
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string pre = "enc.block" + std::to_string(i) + ".";
    auto& b = blocks_[i];
    b.res1_w = store.add(pre + "res1.w", {h, c, 3});
    b.res1_b = store.add(pre + "res1.b", {h});
    b.res2_w = store.add(pre + "res2.w", {c, h, 1});
    b.res2_b = store.add(pre + "res2.b", {c});
    b.down_w = store.add(pre + "down.w", {c, c, 2 * cfg.enc_strides[i]});
    b.down_b = store.add(pre + "down.b", {c});
  }
  const std::size_t flat = c * cfg.encoder_out_len();
  fc1_w_ = store.add("enc.fc1.w", {cfg.enc_hidden, flat});
  fc1_b_ = store.add("enc.fc1.b", {cfg.enc_hidden});
  fc2_w_ = store.add("enc.fc2.w", {cfg.feat_dim, cfg.enc_hidden});
  fc2_b_ = store.add("enc.fc2.b", {cfg.feat_dim});
  cls1_w_ = store.add("cls.fc1.w", {cfg.cls_hidden, cfg.feat_dim});
  cls1_b_ = store.add("cls.fc1.b", {cfg.cls_hidden});
  cls2_w_ = store.add("cls.fc2.w", {1, cfg.cls_hidden});
  cls2_b_ = store.add("cls.fc2.b", {1});
}

void EncoderNet::init(ParamStore& store, std::mt19937_64& rng) const {
  auto init_pair = [&](std::size_t w, std::size_t b) {
    const auto& shape = store[w].shape;
    std::size_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    init_he_uniform(store[w], fan_in, rng);
    std::fill(store[b].value.begin(), store[b].value.end(), 0.0);
  };
  init_pair(conv0_w_, conv0_b_);
  for (const auto& b : blocks_) {
    init_pair(b.res1_w, b.res1_b);
    init_pair(b.res2_w, b.res2_b);
    init_pair(b.down_w, b.down_b);
  }
  init_pair(fc1_w_, fc1_b_);
  init_pair(fc2_w_, fc2_b_);
  init_pair(cls1_w_, cls1_b_);
  init_pair(cls2_w_, cls2_b_);
}

double EncoderNet::forward(const ParamStore& store, std::span<const double> window_uv, bool train,
                           std::mt19937_64* rng, EncoderTape& t) const {
  if (window_uv.size() != kWindowLen) {
    throw Error(ErrorCode::ShapeMismatch, "window has " + std::to_string(window_uv.size()) + " samples");
  }
  const std::size_t c = cfg_.enc_filters, h = cfg_.res_hidden();
  t.x.resize(kWindowLen);
  for (std::size_t i = 0; i < kWindowLen; ++i) t.x[i] = window_uv[i] * cfg_.input_scale;

  const auto s0 = stem_shape(cfg_);
  t.a[0].resize(c * kWindowLen);
  kernels::conv1d_forward(s0, t.x, store[conv0_w_].value, store[conv0_b_].value, t.a[0]);

  std::size_t len = kWindowLen;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& bi = blocks_[i];
    auto& bt = t.blocks[i];
    apply_elu(t.a[i], bt.e_in);
    bt.r1.resize(h * len);
    kernels::conv1d_forward(res1_shape(cfg_, len), bt.e_in, store[bi.res1_w].value, store[bi.res1_b].value, bt.r1);
    apply_elu(bt.r1, bt.e_r1);
    bt.s.resize(c * len);
    kernels::conv1d_forward(res2_shape(cfg_, len), bt.e_r1, store[bi.res2_w].value, store[bi.res2_b].value, bt.s);
    for (std::size_t k = 0; k < bt.s.size(); ++k) bt.s[k] += t.a[i][k];
    apply_elu(bt.s, bt.e_s);
    const auto ds = down_shape(cfg_, len, cfg_.enc_strides[i]);
    t.a[i + 1].resize(c * ds.out_len);
    kernels::conv1d_forward(ds, bt.e_s, store[bi.down_w].value, store[bi.down_b].value, t.a[i + 1]);
    len = ds.out_len;
  }

  apply_elu(t.a[4], t.f0);
  matvec(store[fc1_w_], store[fc1_b_], t.f0, t.z1);
  apply_elu(t.z1, t.h1);
  dropout(t.h1, t.drop1, cfg_.dropout_p, train, rng);
  matvec(store[fc2_w_], store[fc2_b_], t.h1, t.feat);

  matvec(store[cls1_w_], store[cls1_b_], t.feat, t.c1pre);
  apply_elu(t.c1pre, t.c1);
  dropout(t.c1, t.drop2, cfg_.dropout_p, train, rng);
  std::vector<double> out;
  matvec(store[cls2_w_], store[cls2_b_], t.c1, out);
  t.logit = out[0];
  return t.logit;
}

void EncoderNet::backward(ParamStore& store, EncoderTape& t, std::span<const double> d_features,
                          double d_logit) const {
  const std::size_t c = cfg_.enc_filters;
  std::vector<double> d_c1, d_feat, d_h1, d_f0;
  const double dl[1] = {d_logit};
  matvec_backward(store[cls2_w_], store[cls2_b_], t.c1, dl, &d_c1);
  for (std::size_t i = 0; i < d_c1.size(); ++i) d_c1[i] *= t.drop2[i];
  elu_backward(t.c1pre, d_c1);
  matvec_backward(store[cls1_w_], store[cls1_b_], t.feat, d_c1, &d_feat);
  if (!d_features.empty()) {
    for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat[i] += d_features[i];
  }

  matvec_backward(store[fc2_w_], store[fc2_b_], t.h1, d_feat, &d_h1);
  for (std::size_t i = 0; i < d_h1.size(); ++i) d_h1[i] *= t.drop1[i];
  elu_backward(t.z1, d_h1);
  matvec_backward(store[fc1_w_], store[fc1_b_], t.f0, d_h1, &d_f0);
  elu_backward(t.a[4], d_f0);

  std::vector<double> d_a = std::move(d_f0);
  std::vector<double> d_es, d_er1, d_ein;
  std::size_t len = cfg_.encoder_out_len();
  for (std::size_t ii = 4; ii-- > 0;) {
    const auto& bi = blocks_[ii];
    auto& bt = t.blocks[ii];
    const std::size_t in_len = len * cfg_.enc_strides[ii];
    const auto ds = down_shape(cfg_, in_len, cfg_.enc_strides[ii]);
    d_es.assign(c * in_len, 0.0);
    kernels::conv1d_backward(ds, bt.e_s, store[bi.down_w].value, d_a, d_es, store[bi.down_w].grad,
                             store[bi.down_b].grad);
    elu_backward(bt.s, d_es);  // d_es now holds d s
    d_er1.assign(cfg_.res_hidden() * in_len, 0.0);
    kernels::conv1d_backward(res2_shape(cfg_, in_len), bt.e_r1, store[bi.res2_w].value, d_es, d_er1,
                             store[bi.res2_w].grad, store[bi.res2_b].grad);
    elu_backward(bt.r1, d_er1);
    d_ein.assign(c * in_len, 0.0);
    kernels::conv1d_backward(res1_shape(cfg_, in_len), bt.e_in, store[bi.res1_w].value, d_er1, d_ein,
                             store[bi.res1_w].grad, store[bi.res1_b].grad);
    elu_backward(t.a[ii], d_ein);
    // skip path
    for (std::size_t k = 0; k < d_ein.size(); ++k) d_ein[k] += d_es[k];
    d_a = std::move(d_ein);
    len = in_len;
  }
  kernels::conv1d_backward(stem_shape(cfg_), t.x, store[conv0_w_].value, d_a, {}, store[conv0_w_].grad,
                           store[conv0_b_].grad);
}

}  // namespace hhf
