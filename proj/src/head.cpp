#include "hhf/head.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hhf/kernels.hpp"

namespace hhf {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

std::vector<double> sinusoidal_encoding(std::size_t seq, std::size_t dim) {
  std::vector<double> pe(seq * dim);
  for (std::size_t pos = 0; pos < seq; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double a = static_cast<double>(pos) * rate;
      pe[pos * dim + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return pe;
}

namespace {

constexpr double kLnEps = 1e-5;

// Y[rows x out] = X[rows x in] W^T + b
void linear(std::size_t rows, const Param& w, const Param& b, std::span<const double> x, std::vector<double>& y) {
  const std::size_t out = w.shape[0], in = w.shape[1];
  y.resize(rows * out);
  kernels::gemm_nt(rows, out, in, x, w.value, y, false);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) y[r * out + o] += b.value[o];
}

// Accumulates dW, db; overwrites dx when non-null.
void linear_backward(std::size_t rows, Param& w, Param& b, std::span<const double> x, std::span<const double> dy,
                     std::vector<double>* dx) {
  const std::size_t out = w.shape[0], in = w.shape[1];
  kernels::gemm_tn(out, in, rows, dy, x, w.grad, true);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) b.grad[o] += dy[r * out + o];
  if (dx) {
    dx->resize(rows * in);
    kernels::gemm_nn(rows, in, out, dy, w.value, *dx, false);
  }
}

void layer_norm(std::size_t rows, std::size_t dim, const Param& g, const Param& b, std::span<const double> x,
                std::vector<double>& y, std::vector<double>& mean, std::vector<double>& rstd) {
  y.resize(rows * dim);
  mean.resize(rows);
  rstd.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * dim;
    double mu = 0;
    for (std::size_t i = 0; i < dim; ++i) mu += xr[i];
    mu /= static_cast<double>(dim);
    double var = 0;
    for (std::size_t i = 0; i < dim; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(dim);
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    mean[r] = mu;
    rstd[r] = rs;
    for (std::size_t i = 0; i < dim; ++i) y[r * dim + i] = (xr[i] - mu) * rs * g.value[i] + b.value[i];
  }
}

// Overwrites dy with dx.
void layer_norm_backward(std::size_t rows, std::size_t dim, Param& g, Param& b, std::span<const double> x,
                         const std::vector<double>& mean, const std::vector<double>& rstd, std::vector<double>& dy) {
  std::vector<double> dxhat(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * dim;
    double* d = dy.data() + r * dim;
    double m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double xhat = (xr[i] - mean[r]) * rstd[r];
      g.grad[i] += d[i] * xhat;
      b.grad[i] += d[i];
      dxhat[i] = d[i] * g.value[i];
      m1 += dxhat[i];
      m2 += dxhat[i] * xhat;
    }
    m1 /= static_cast<double>(dim);
    m2 /= static_cast<double>(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double xhat = (xr[i] - mean[r]) * rstd[r];
      d[i] = rstd[r] * (dxhat[i] - m1 - xhat * m2);
    }
  }
}

void dropout(std::vector<double>& v, std::vector<double>& mask, double p, bool train, std::mt19937_64* rng) {
  if (!train || p <= 0 || rng == nullptr) {
    mask.clear();
    return;
  }
  mask.resize(v.size());
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < v.size(); ++i) {
    mask[i] = keep(*rng) ? scale : 0.0;
    v[i] *= mask[i];
  }
}

void apply_mask(std::vector<double>& d, const std::vector<double>& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= mask[i];
}

void copy_cols(std::span<const double> src, std::size_t rows, std::size_t ld, std::size_t col0, std::size_t ncols,
               std::vector<double>& dst) {
  dst.resize(rows * ncols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ncols; ++c) dst[r * ncols + c] = src[r * ld + col0 + c];
}

}  // namespace

HeadNet::HeadNet(const ModelConfig& cfg, ParamStore& store) : cfg_(cfg) {
  const std::size_t d = cfg.d_model, f = cfg.ff_dim;
  project_ = cfg.feat_dim != cfg.d_model;
  if (project_) {
    in_w_ = store.add("head.in.w", {d, cfg.feat_dim});
    in_b_ = store.add("head.in.b", {d});
  }
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "head.layer" + std::to_string(l) + ".";
    LayerIdx li{};
    li.wq = store.add(pre + "wq", {d, d});
    li.bq = store.add(pre + "bq", {d});
    li.wk = store.add(pre + "wk", {d, d});
    li.bk = store.add(pre + "bk", {d});
    li.wv = store.add(pre + "wv", {d, d});
    li.bv = store.add(pre + "bv", {d});
    li.wo = store.add(pre + "wo", {d, d});
    li.bo = store.add(pre + "bo", {d});
    li.ln1_g = store.add(pre + "ln1.g", {d});
    li.ln1_b = store.add(pre + "ln1.b", {d});
    li.ff1_w = store.add(pre + "ff1.w", {f, d});
    li.ff1_b = store.add(pre + "ff1.b", {f});
    li.ff2_w = store.add(pre + "ff2.w", {d, f});
    li.ff2_b = store.add(pre + "ff2.b", {d});
    li.ln2_g = store.add(pre + "ln2.g", {d});
    li.ln2_b = store.add(pre + "ln2.b", {d});
    layers_.push_back(li);
  }
  fc1_w_ = store.add("head.fc1.w", {cfg.head_hidden, d});
  fc1_b_ = store.add("head.fc1.b", {cfg.head_hidden});
  fc2_w_ = store.add("head.fc2.w", {1, cfg.head_hidden});
  fc2_b_ = store.add("head.fc2.b", {1});
}

void HeadNet::init(ParamStore& store, std::mt19937_64& rng) const {
  auto init_pair = [&](std::size_t w, std::size_t b) {
    const std::size_t fan_in = store[w].shape[1];
    init_uniform_fan_in(store[w], fan_in, rng);
    init_uniform_fan_in(store[b], fan_in, rng);
  };
  if (project_) init_pair(in_w_, in_b_);
  for (const auto& l : layers_) {
    init_pair(l.wq, l.bq);
    init_pair(l.wk, l.bk);
    init_pair(l.wv, l.bv);
    init_pair(l.wo, l.bo);
    init_pair(l.ff1_w, l.ff1_b);
    init_pair(l.ff2_w, l.ff2_b);
    std::fill(store[l.ln1_g].value.begin(), store[l.ln1_g].value.end(), 1.0);
    std::fill(store[l.ln1_b].value.begin(), store[l.ln1_b].value.end(), 0.0);
    std::fill(store[l.ln2_g].value.begin(), store[l.ln2_g].value.end(), 1.0);
    std::fill(store[l.ln2_b].value.begin(), store[l.ln2_b].value.end(), 0.0);
  }
  init_pair(fc1_w_, fc1_b_);
  init_pair(fc2_w_, fc2_b_);
}

double HeadNet::forward(const ParamStore& store, std::span<const double> features, const std::vector<bool>& mask,
                        bool train, std::mt19937_64* rng, HeadTape& t) const {
  const std::size_t seq = mask.size(), d = cfg_.d_model, f = cfg_.ff_dim, nh = cfg_.n_heads, dh = head_dim();
  if (seq == 0 || features.size() != seq * cfg_.feat_dim) {
    throw Error(ErrorCode::ShapeMismatch, "head input has " + std::to_string(features.size()) + " values for " +
                                              std::to_string(seq) + " positions");
  }
  t.seq = seq;
  t.mask = mask;
  t.n_valid = 0;
  for (bool m : mask)
    if (!m) ++t.n_valid;
  if (t.n_valid == 0) throw Error(ErrorCode::AllMasked, "every position is padding");

  t.features.assign(features.begin(), features.end());
  t.x.assign(cfg_.n_layers + 1, {});
  if (project_) {
    linear(seq, store[in_w_], store[in_b_], features, t.x[0]);
  } else {
    t.x[0] = t.features;
  }
  const auto pe = sinusoidal_encoding(seq, d);
  for (std::size_t i = 0; i < seq * d; ++i) t.x[0][i] += pe[i];

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  t.layers.resize(cfg_.n_layers);
  std::vector<double> qh, kh, vh, oh, s(seq * seq);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    const auto& li = layers_[l];
    auto& lt = t.layers[l];
    const auto& x = t.x[l];
    linear(seq, store[li.wq], store[li.bq], x, lt.q);
    linear(seq, store[li.wk], store[li.bk], x, lt.k);
    linear(seq, store[li.wv], store[li.bv], x, lt.v);
    lt.p.resize(nh * seq * seq);
    lt.o.assign(seq * d, 0.0);
    for (std::size_t h = 0; h < nh; ++h) {
      copy_cols(lt.q, seq, d, h * dh, dh, qh);
      copy_cols(lt.k, seq, d, h * dh, dh, kh);
      copy_cols(lt.v, seq, d, h * dh, dh, vh);
      kernels::gemm_nt(seq, seq, dh, qh, kh, s, false);
      double* p = lt.p.data() + h * seq * seq;
      for (std::size_t i = 0; i < seq; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j)
          if (!mask[j]) mx = std::max(mx, s[i * seq + j] * scale);
        double z = 0;
        for (std::size_t j = 0; j < seq; ++j) {
          const double e = mask[j] ? 0.0 : std::exp(s[i * seq + j] * scale - mx);
          p[i * seq + j] = e;
          z += e;
        }
        for (std::size_t j = 0; j < seq; ++j) p[i * seq + j] /= z;
      }
      oh.resize(seq * dh);
      kernels::gemm_nn(seq, dh, seq, std::span<const double>(p, seq * seq), vh, oh, false);
      for (std::size_t r = 0; r < seq; ++r)
        for (std::size_t c = 0; c < dh; ++c) lt.o[r * d + h * dh + c] = oh[r * dh + c];
    }
    linear(seq, store[li.wo], store[li.bo], lt.o, lt.y);
    dropout(lt.y, lt.drop_a, cfg_.dropout_p, train, rng);
    lt.s1.resize(seq * d);
    for (std::size_t i = 0; i < seq * d; ++i) lt.s1[i] = x[i] + lt.y[i];
    layer_norm(seq, d, store[li.ln1_g], store[li.ln1_b], lt.s1, lt.x1, lt.ln1_mean, lt.ln1_rstd);

    linear(seq, store[li.ff1_w], store[li.ff1_b], lt.x1, lt.u);
    lt.g.resize(seq * f);
    for (std::size_t i = 0; i < seq * f; ++i) lt.g[i] = gelu(lt.u[i]);
    linear(seq, store[li.ff2_w], store[li.ff2_b], lt.g, lt.z);
    dropout(lt.z, lt.drop_f, cfg_.dropout_p, train, rng);
    lt.s2.resize(seq * d);
    for (std::size_t i = 0; i < seq * d; ++i) lt.s2[i] = lt.x1[i] + lt.z[i];
    layer_norm(seq, d, store[li.ln2_g], store[li.ln2_b], lt.s2, t.x[l + 1], lt.ln2_mean, lt.ln2_rstd);
  }

  const auto& xf = t.x[cfg_.n_layers];
  t.pooled.assign(d, 0.0);
  for (std::size_t r = 0; r < seq; ++r) {
    if (mask[r]) continue;
    for (std::size_t i = 0; i < d; ++i) t.pooled[i] += xf[r * d + i];
  }
  for (auto& v : t.pooled) v /= static_cast<double>(t.n_valid);

  linear(1, store[fc1_w_], store[fc1_b_], t.pooled, t.z1);
  t.h1.resize(t.z1.size());
  for (std::size_t i = 0; i < t.z1.size(); ++i) t.h1[i] = gelu(t.z1[i]);
  dropout(t.h1, t.drop1, cfg_.dropout_p, train, rng);
  std::vector<double> out;
  linear(1, store[fc2_w_], store[fc2_b_], t.h1, out);
  t.logit = out[0];
  return t.logit;
}

void HeadNet::backward(ParamStore& store, HeadTape& t, double d_logit, std::vector<double>* d_features) const {
  const std::size_t seq = t.seq, d = cfg_.d_model, f = cfg_.ff_dim, nh = cfg_.n_heads, dh = head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> dh1;
  const double dl[1] = {d_logit};
  linear_backward(1, store[fc2_w_], store[fc2_b_], t.h1, dl, &dh1);
  apply_mask(dh1, t.drop1);
  for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] *= gelu_grad(t.z1[i]);
  std::vector<double> dpooled;
  linear_backward(1, store[fc1_w_], store[fc1_b_], t.pooled, dh1, &dpooled);

  std::vector<double> dx(seq * d, 0.0);
  for (std::size_t r = 0; r < seq; ++r) {
    if (t.mask[r]) continue;
    for (std::size_t i = 0; i < d; ++i) dx[r * d + i] = dpooled[i] / static_cast<double>(t.n_valid);
  }

  std::vector<double> dz, dg, dx1, dy, d_o, dq(seq * d), dk(seq * d), dv(seq * d), tmp;
  std::vector<double> qh, kh, vh, doh, dp(seq * seq), ds(seq * seq), dqh(seq * dh), dkh(seq * dh), dvh(seq * dh);
  for (std::size_t l = cfg_.n_layers; l-- > 0;) {
    const auto& li = layers_[l];
    auto& lt = t.layers[l];
    // x2 = LN2(x1 + z)
    layer_norm_backward(seq, d, store[li.ln2_g], store[li.ln2_b], lt.s2, lt.ln2_mean, lt.ln2_rstd, dx);
    dz = dx;
    apply_mask(dz, lt.drop_f);
    linear_backward(seq, store[li.ff2_w], store[li.ff2_b], lt.g, dz, &dg);
    for (std::size_t i = 0; i < seq * f; ++i) dg[i] *= gelu_grad(lt.u[i]);
    linear_backward(seq, store[li.ff1_w], store[li.ff1_b], lt.x1, dg, &dx1);
    for (std::size_t i = 0; i < seq * d; ++i) dx1[i] += dx[i];
    // x1 = LN1(x + y)
    layer_norm_backward(seq, d, store[li.ln1_g], store[li.ln1_b], lt.s1, lt.ln1_mean, lt.ln1_rstd, dx1);
    dy = dx1;
    apply_mask(dy, lt.drop_a);
    linear_backward(seq, store[li.wo], store[li.bo], lt.o, dy, &d_o);

    if (t.capture_attention_grad) lt.dp.resize(nh * seq * seq);
    for (std::size_t h = 0; h < nh; ++h) {
      copy_cols(lt.q, seq, d, h * dh, dh, qh);
      copy_cols(lt.k, seq, d, h * dh, dh, kh);
      copy_cols(lt.v, seq, d, h * dh, dh, vh);
      copy_cols(d_o, seq, d, h * dh, dh, doh);
      const std::span<const double> p(lt.p.data() + h * seq * seq, seq * seq);
      kernels::gemm_nt(seq, seq, dh, doh, vh, dp, false);
      if (t.capture_attention_grad) std::copy(dp.begin(), dp.end(), lt.dp.begin() + static_cast<std::ptrdiff_t>(h * seq * seq));
      kernels::gemm_tn(seq, dh, seq, p, doh, dvh, false);
      for (std::size_t i = 0; i < seq; ++i) {
        double rowdot = 0;
        for (std::size_t j = 0; j < seq; ++j) rowdot += p[i * seq + j] * dp[i * seq + j];
        for (std::size_t j = 0; j < seq; ++j) ds[i * seq + j] = p[i * seq + j] * (dp[i * seq + j] - rowdot) * scale;
      }
      kernels::gemm_nn(seq, dh, seq, ds, kh, dqh, false);
      kernels::gemm_tn(seq, dh, seq, ds, qh, dkh, false);
      for (std::size_t r = 0; r < seq; ++r)
        for (std::size_t c = 0; c < dh; ++c) {
          dq[r * d + h * dh + c] = dqh[r * dh + c];
          dk[r * d + h * dh + c] = dkh[r * dh + c];
          dv[r * d + h * dh + c] = dvh[r * dh + c];
        }
    }
    const auto& x = t.x[l];
    // residual path into the layer input
    std::vector<double> dx_in = dx1;
    linear_backward(seq, store[li.wq], store[li.bq], x, dq, &tmp);
    for (std::size_t i = 0; i < seq * d; ++i) dx_in[i] += tmp[i];
    linear_backward(seq, store[li.wk], store[li.bk], x, dk, &tmp);
    for (std::size_t i = 0; i < seq * d; ++i) dx_in[i] += tmp[i];
    linear_backward(seq, store[li.wv], store[li.bv], x, dv, &tmp);
    for (std::size_t i = 0; i < seq * d; ++i) dx_in[i] += tmp[i];
    dx = std::move(dx_in);
  }

  if (project_) {
    linear_backward(seq, store[in_w_], store[in_b_], t.features, dx, d_features);
  } else if (d_features) {
    *d_features = dx;
  }
}

}  // namespace hhf
