#include "hhf/kernels.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include <omp.h>

namespace hhf::kernels {

namespace {

// Below this many multiply-adds a kernel stays on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;

// Four independent partial sums so the loop vectorizes without reassociation
// flags; the combination order is fixed.
inline double dot_strided(const double* a, const double* b, std::size_t n, std::size_t b_stride) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  if (b_stride == 1) {
    for (; i + 4 <= n; i += 4) {
      s0 += a[i] * b[i];
      s1 += a[i + 1] * b[i + 1];
      s2 += a[i + 2] * b[i + 2];
      s3 += a[i + 3] * b[i + 3];
    }
  } else {
    for (; i + 4 <= n; i += 4) {
      s0 += a[i] * b[i * b_stride];
      s1 += a[i + 1] * b[(i + 1) * b_stride];
      s2 += a[i + 2] * b[(i + 2) * b_stride];
      s3 += a[i + 3] * b[(i + 3) * b_stride];
    }
  }
  for (; i < n; ++i) s0 += a[i] * b[i * b_stride];
  return (s0 + s1) + (s2 + s3);
}

// Output positions t with 0 <= t*stride + k - pad < in_len.
inline void valid_range(const Conv1dShape& s, std::size_t k, std::size_t& t0, std::size_t& t1) {
  const auto pad = static_cast<std::ptrdiff_t>(s.pad_left);
  const auto kk = static_cast<std::ptrdiff_t>(k);
  const auto st = static_cast<std::ptrdiff_t>(s.stride);
  std::ptrdiff_t lo = pad - kk <= 0 ? 0 : (pad - kk + st - 1) / st;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(s.in_len) - 1 + pad - kk);
  hi = hi < 0 ? -1 : hi / st;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(s.out_len) - 1);
  t0 = static_cast<std::size_t>(lo);
  t1 = hi < lo ? t0 : static_cast<std::size_t>(hi + 1);
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

void conv1d_forward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const std::size_t work = s.out_channels * s.in_channels * s.kernel * s.out_len;
  const auto cout = static_cast<std::ptrdiff_t>(s.out_channels);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (std::ptrdiff_t oi = 0; oi < cout; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    double* yr = y.data() + o * s.out_len;
    std::fill(yr, yr + s.out_len, b.empty() ? 0.0 : b[o]);
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* xr = x.data() + c * s.in_len;
      for (std::size_t k = 0; k < s.kernel; ++k) {
        const double wv = w[(o * s.in_channels + c) * s.kernel + k];
        std::size_t t0, t1;
        valid_range(s, k, t0, t1);
        const double* xs = xr + (t0 * s.stride + k - s.pad_left);
        if (s.stride == 1) {
          for (std::size_t t = t0; t < t1; ++t) yr[t] += wv * xs[t - t0];
        } else {
          for (std::size_t t = t0; t < t1; ++t) yr[t] += wv * xs[(t - t0) * s.stride];
        }
      }
    }
  }
}

void conv1d_backward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw, std::span<double> db) {
  const std::size_t work = s.out_channels * s.in_channels * s.kernel * s.out_len;
  const auto cout = static_cast<std::ptrdiff_t>(s.out_channels);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (std::ptrdiff_t oi = 0; oi < cout; ++oi) {
    const auto o = static_cast<std::size_t>(oi);
    const double* g = dy.data() + o * s.out_len;
    if (!db.empty()) {
      double acc = 0;
      for (std::size_t t = 0; t < s.out_len; ++t) acc += g[t];
      db[o] += acc;
    }
    for (std::size_t c = 0; c < s.in_channels; ++c) {
      const double* xr = x.data() + c * s.in_len;
      for (std::size_t k = 0; k < s.kernel; ++k) {
        std::size_t t0, t1;
        valid_range(s, k, t0, t1);
        if (t1 <= t0) continue;
        dw[(o * s.in_channels + c) * s.kernel + k] +=
            dot_strided(g + t0, xr + (t0 * s.stride + k - s.pad_left), t1 - t0, s.stride);
      }
    }
  }
  if (dx.empty()) return;
  const auto cin = static_cast<std::ptrdiff_t>(s.in_channels);
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (std::ptrdiff_t ci = 0; ci < cin; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double* dxr = dx.data() + c * s.in_len;
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      const double* g = dy.data() + o * s.out_len;
      for (std::size_t k = 0; k < s.kernel; ++k) {
        const double wv = w[(o * s.in_channels + c) * s.kernel + k];
        std::size_t t0, t1;
        valid_range(s, k, t0, t1);
        double* ds = dxr + (t0 * s.stride + k - s.pad_left);
        if (s.stride == 1) {
          for (std::size_t t = t0; t < t1; ++t) ds[t - t0] += wv * g[t];
        } else {
          for (std::size_t t = t0; t < t1; ++t) ds[(t - t0) * s.stride] += wv * g[t];
        }
      }
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(m, n, k, a, bt, c, accumulate);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto mi = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < mi; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* cr = c.data() + i * n;
    if (!accumulate) std::fill(cr, cr + n, 0.0);
    const double* ar = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      if (av == 0.0) continue;
      const double* br = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  const auto mi = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < mi; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* cr = c.data() + i * n;
    if (!accumulate) std::fill(cr, cr + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + i];
      if (av == 0.0) continue;
      const double* br = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void pairwise_sq_dist(std::size_t n, std::size_t d, std::span<const double> x, std::span<double> out) {
  const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * n * d > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* xi = x.data() + i * d;
    for (std::size_t j = 0; j < n; ++j) {
      const double* xj = x.data() + j * d;
      double acc = 0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = xi[p] - xj[p];
        acc += diff * diff;
      }
      out[i * n + j] = acc;
    }
  }
}

double assign_nearest(std::size_t n, std::size_t d, std::size_t k, std::span<const double> x,
                      std::span<const double> centroids, std::span<int> assignment) {
  std::vector<double> best(n);
  const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * k * d > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double bd = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = x[i * d + p] - centroids[c * d + p];
        acc += diff * diff;
      }
      if (acc < bd) {
        bd = acc;
        arg = static_cast<int>(c);
      }
    }
    assignment[i] = arg;
    best[i] = bd;
  }
  double total = 0;
  for (double v : best) total += v;
  return total;
}

}  // namespace hhf::kernels
