// Times the OpenMP kernels against their serial reference versions and checks
// that both give the same numbers.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "hhf/kernels.hpp"

namespace k = hhf::kernels;

static double time_ms(const std::function<void()>& f, int reps) {
  f();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

static double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

static std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

static void row(const char* name, double par, double ser, double diff) {
  std::printf("%-22s %10.3f %10.3f %8.2fx  maxdiff %.1e\n", name, ser, par, ser / par, diff);
}

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(1);
  std::printf("threads: %d\n", k::max_threads());
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    const k::Conv1dShape s{64, 64, 8, 4, 2, 3840, 960};
    auto x = random_vec(64 * 3840, rng), w = random_vec(64 * 64 * 8, rng), b = random_vec(64, rng);
    std::vector<double> y1(64 * 960), y2(64 * 960);
    const double ser = time_ms([&] { k::ref::conv1d_forward(s, x, w, b, y1); }, reps);
    const double par = time_ms([&] { k::conv1d_forward(s, x, w, b, y2); }, reps);
    row("conv1d_forward", par, ser, max_abs_diff(y1, y2));

    auto dy = random_vec(64 * 960, rng);
    std::vector<double> dx1(x.size()), dw1(w.size()), db1(64), dx2(x.size()), dw2(w.size()), db2(64);
    const double ser_b = time_ms([&] { k::ref::conv1d_backward(s, x, w, dy, dx1, dw1, db1); }, reps);
    const double par_b = time_ms([&] { k::conv1d_backward(s, x, w, dy, dx2, dw2, db2); }, reps);
    row("conv1d_backward", par_b, ser_b, max_abs_diff(dx1, dx2) / (reps + 1));
  }
  {
    const std::size_t m = 720, n = 720, kk = 32;
    auto a = random_vec(m * kk, rng), b = random_vec(n * kk, rng);
    std::vector<double> c1(m * n), c2(m * n);
    const double ser = time_ms([&] { k::ref::gemm_nt(m, n, kk, a, b, c1, false); }, reps);
    const double par = time_ms([&] { k::gemm_nt(m, n, kk, a, b, c2, false); }, reps);
    row("gemm_nt 720x720x32", par, ser, max_abs_diff(c1, c2));
  }
  {
    const std::size_t n = 400, d = 100;
    auto x = random_vec(n * d, rng);
    std::vector<double> o1(n * n), o2(n * n);
    const double ser = time_ms([&] { k::ref::pairwise_sq_dist(n, d, x, o1); }, reps);
    const double par = time_ms([&] { k::pairwise_sq_dist(n, d, x, o2); }, reps);
    row("pairwise_sq_dist", par, ser, max_abs_diff(o1, o2));
  }
  return 0;
}
