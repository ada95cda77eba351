#pragma once

// Dense inner loops of the network. The default implementations are
// OpenMP-parallel over output rows/channels; every output element is reduced
// by a single thread in a fixed order, so results do not depend on the thread
// count. `hhf::kernels::ref` holds plain serial versions used as test oracles
// and benchmark baselines.

#include <cstddef>
#include <span>

namespace hhf::kernels {

struct Conv1dShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t in_len = 0;
  std::size_t out_len = 0;
};

// y[Cout x Lout] = conv(x[Cin x Lin], w[Cout x Cin x K]) + b, zero padding.
void conv1d_forward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);

// Accumulates dw, db and (when non-empty) dx.
void conv1d_backward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw, std::span<double> db);

// C[M x N] (+)= A[M x K] * B[N x K]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
// C[M x N] (+)= A[M x K] * B[K x N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
// C[M x N] (+)= A[K x M]^T * B[K x N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);

// Squared Euclidean distance between all rows of x[n x d] -> out[n x n].
void pairwise_sq_dist(std::size_t n, std::size_t d, std::span<const double> x, std::span<double> out);

// Nearest centroid per row; returns total within-cluster squared distance.
double assign_nearest(std::size_t n, std::size_t d, std::size_t k, std::span<const double> x,
                      std::span<const double> centroids, std::span<int> assignment);

int max_threads();
void set_threads(int n);

namespace ref {

void conv1d_forward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y);
void conv1d_backward(const Conv1dShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> dy, std::span<double> dx, std::span<double> dw, std::span<double> db);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
             std::span<double> c, bool accumulate);
void pairwise_sq_dist(std::size_t n, std::size_t d, std::span<const double> x, std::span<double> out);
double assign_nearest(std::size_t n, std::size_t d, std::size_t k, std::span<const double> x,
                      std::span<const double> centroids, std::span<int> assignment);

}  // namespace ref
}  // namespace hhf::kernels
