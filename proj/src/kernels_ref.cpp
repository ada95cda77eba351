#include <limits>

#include "hhf/kernels.hpp"

namespace hhf::kernels::ref {

void conv1d_forward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t t = 0; t < s.out_len; ++t) {
      double acc = b.empty() ? 0.0 : b[o];
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        for (std::size_t k = 0; k < s.kernel; ++k) {
          const auto j = static_cast<std::ptrdiff_t>(t * s.stride + k) - static_cast<std::ptrdiff_t>(s.pad_left);
          if (j < 0 || j >= static_cast<std::ptrdiff_t>(s.in_len)) continue;
          acc += w[(o * s.in_channels + c) * s.kernel + k] * x[c * s.in_len + static_cast<std::size_t>(j)];
        }
      }
      y[o * s.out_len + t] = acc;
    }
  }
}

void conv1d_backward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw, std::span<double> db) {
  for (std::size_t o = 0; o < s.out_channels; ++o) {
    for (std::size_t t = 0; t < s.out_len; ++t) {
      const double g = dy[o * s.out_len + t];
      if (!db.empty()) db[o] += g;
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        for (std::size_t k = 0; k < s.kernel; ++k) {
          const auto j = static_cast<std::ptrdiff_t>(t * s.stride + k) - static_cast<std::ptrdiff_t>(s.pad_left);
          if (j < 0 || j >= static_cast<std::ptrdiff_t>(s.in_len)) continue;
          const auto ju = static_cast<std::size_t>(j);
          dw[(o * s.in_channels + c) * s.kernel + k] += g * x[c * s.in_len + ju];
          if (!dx.empty()) dx[c * s.in_len + ju] += g * w[(o * s.in_channels + c) * s.kernel + k];
        }
      }
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
}

void pairwise_sq_dist(std::size_t n, std::size_t d, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = x[i * d + p] - x[j * d + p];
        acc += diff * diff;
      }
      out[i * n + j] = acc;
    }
}

double assign_nearest(std::size_t n, std::size_t d, std::size_t k, std::span<const double> x,
                      std::span<const double> centroids, std::span<int> assignment) {
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = x[i * d + p] - centroids[c * d + p];
        acc += diff * diff;
      }
      if (acc < best) {
        best = acc;
        arg = static_cast<int>(c);
      }
    }
    assignment[i] = arg;
    total += best;
  }
  return total;
}

}  // namespace hhf::kernels::ref
