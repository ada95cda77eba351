#pragma once

#include <span>
#include <vector>

namespace hhf {

struct LogisticModel {
  double intercept = 0;
  std::vector<double> coef;
  bool ridge_fallback = false;  // set when the unpenalized fit failed (separation / singular)
  std::size_t iterations = 0;
  double grad_norm = 0;

  double linear(std::span<const double> row) const;
  double apply(std::span<const double> row) const;  // probability
};

struct LogisticOptions {
  double tol = 1e-8;   // gradient norm
  std::size_t max_iter = 200;
  double ridge = 1e-6;  // used only in the fallback
};

// Maximum-likelihood fit by iteratively reweighted least squares. x is n x p
// row-major without an intercept column.
LogisticModel fit_logistic(std::span<const double> x, std::span<const int> y, std::size_t n, std::size_t p,
                           const LogisticOptions& opt = {});

// Column means and standard deviations (population); constant columns get sd 1.
struct Standardizer {
  std::vector<double> mean, sd;

  static Standardizer fit(std::span<const double> x, std::size_t n, std::size_t p);
  std::vector<double> apply(std::span<const double> x, std::size_t n) const;
};

}  // namespace hhf
