#include "hhf/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "hhf/common.hpp"
#include "hhf/params.hpp"

namespace hhf {

double LogisticModel::linear(std::span<const double> row) const {
  if (row.size() != coef.size()) throw Error(ErrorCode::ShapeMismatch, "covariate count differs from the model");
  double z = intercept;
  for (std::size_t j = 0; j < coef.size(); ++j) z += coef[j] * row[j];
  return z;
}

double LogisticModel::apply(std::span<const double> row) const { return sigmoid(linear(row)); }

namespace {

// Newton iterations on the (optionally ridge-penalized) log-likelihood;
// nullopt when the Hessian is singular or the iteration diverges.
std::optional<LogisticModel> irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge,
                                  const LogisticOptions& opt) {
  const Eigen::Index p = X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p, ridge);
  pen(0) = 0;  // intercept unpenalized
  LogisticModel m;
  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd mu(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = sigmoid(eta(i));
      w(i) = mu(i) * (1 - mu(i));
    }
    const Eigen::VectorXd grad = X.transpose() * (y - mu) - pen.cwiseProduct(beta);
    m.grad_norm = grad.norm();
    m.iterations = it;
    if (m.grad_norm < opt.tol) {
      m.intercept = beta(0);
      m.coef.assign(beta.data() + 1, beta.data() + p);
      return m;
    }
    Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    H.diagonal() += pen;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, dmax))
      return std::nullopt;
    beta += ldlt.solve(grad);
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e8) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

LogisticModel fit_logistic(std::span<const double> x, std::span<const int> y, std::size_t n, std::size_t p,
                           const LogisticOptions& opt) {
  if (x.size() != n * p || y.size() != n) throw Error(ErrorCode::ShapeMismatch, "logistic inputs");
  std::size_t pos = 0;
  for (int v : y) pos += v != 0;
  if (pos == 0 || pos == n) throw Error(ErrorCode::SingleClass, "logistic fit needs both classes");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
  Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = x[i * p + j];
    Y(static_cast<Eigen::Index>(i)) = y[i] ? 1.0 : 0.0;
  }
  if (auto m = irls(X, Y, 0.0, opt)) {
    // A converged fit whose linear predictor splits the classes means the
    // data are completely separated and the MLE lies at infinity.
    Eigen::VectorXd beta(static_cast<Eigen::Index>(p + 1));
    beta(0) = m->intercept;
    for (std::size_t j = 0; j < p; ++j) beta(static_cast<Eigen::Index>(j + 1)) = m->coef[j];
    const Eigen::VectorXd eta = X * beta;
    double min_pos = std::numeric_limits<double>::infinity(), max_neg = -min_pos;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      if (Y(i) > 0) min_pos = std::min(min_pos, eta(i));
      else max_neg = std::max(max_neg, eta(i));
    }
    if (!(min_pos > max_neg)) return *m;
  }
  auto m = irls(X, Y, opt.ridge, opt);
  if (!m) throw Error(ErrorCode::BadConfig, "logistic fit did not converge even with ridge fallback");
  m->ridge_fallback = true;
  return *m;
}

Standardizer Standardizer::fit(std::span<const double> x, std::size_t n, std::size_t p) {
  Standardizer s;
  s.mean.assign(p, 0.0);
  s.sd.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) s.mean[j] += x[i * p + j] / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) s.sd[j] += std::pow(x[i * p + j] - s.mean[j], 2) / static_cast<double>(n);
  for (auto& v : s.sd) v = v > 0 ? std::sqrt(v) : 1.0;
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x, std::size_t n) const {
  const std::size_t p = mean.size();
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) out[i * p + j] = (x[i * p + j] - mean[j]) / sd[j];
  return out;
}

}  // namespace hhf
