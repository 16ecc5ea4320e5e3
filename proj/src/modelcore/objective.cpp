#include "amc/modelcore/objective.hpp"

#include "amc/common/error.hpp"

namespace amc::nn {

QuadraticObjective::QuadraticObjective(std::vector<double> a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != b_.size() * b_.size()) throw InputShapeError("quadratic: A must be n x n");
}

QuadraticObjective QuadraticObjective::isotropic(std::size_t n, double scale) {
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] = scale;
  return QuadraticObjective(std::move(a), std::vector<double>(n, 0.0));
}

double QuadraticObjective::value(std::span<const double> theta) const {
  const std::size_t n = b_.size();
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += a_[i * n + j] * theta[j];
    v += 0.5 * theta[i] * row + b_[i] * theta[i];
  }
  return v;
}

double QuadraticObjective::value_grad(std::span<const double> theta, std::span<double> grad) const {
  const std::size_t n = b_.size();
  for (std::size_t i = 0; i < n; ++i) {
    double row = b_[i];
    for (std::size_t j = 0; j < n; ++j) row += a_[i * n + j] * theta[j];
    grad[i] = row;
  }
  return value(theta);
}

void QuadraticObjective::hvp(std::span<const double>, std::span<const double> v,
                             std::span<double> out) const {
  const std::size_t n = b_.size();
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += a_[i * n + j] * v[j];
    out[i] = row;
  }
}

std::vector<double> fd_hvp(const Objective& f, std::span<const double> theta,
                           std::span<const double> v, double h) {
  const std::size_t n = f.dim();
  std::vector<double> plus(theta.begin(), theta.end()), minus(plus), gp(n), gm(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    plus[i] += h * v[i];
    minus[i] -= h * v[i];
  }
  f.value_grad(plus, gp);
  f.value_grad(minus, gm);
  for (std::size_t i = 0; i < n; ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
  return out;
}

}  // namespace amc::nn
