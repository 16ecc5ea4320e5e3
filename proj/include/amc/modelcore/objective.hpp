#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "amc/modelcore/sequential.hpp"

namespace amc::nn {

// A scalar function of a parameter vector with first- and second-order
// information. Meta-learning is written against this interface.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> theta) const = 0;
  virtual double value_grad(std::span<const double> theta, std::span<double> grad) const = 0;
  virtual void hvp(std::span<const double> theta, std::span<const double> v,
                   std::span<double> out) const = 0;
};

// Mean loss of a network over a fixed batch. Holds references; the network
// and batch must outlive it.
class BatchObjective final : public Objective {
 public:
  BatchObjective(const Sequential& net, const Batch& batch, Loss loss = Loss::cross_entropy,
                 Exec exec = Exec::parallel)
      : net_(net), batch_(batch), loss_(loss), exec_(exec) {}

  std::size_t dim() const override { return net_.param_count(); }
  double value(std::span<const double> theta) const override {
    return net_.loss(theta, batch_, loss_, exec_);
  }
  double value_grad(std::span<const double> theta, std::span<double> grad) const override {
    return net_.loss_grad(theta, batch_, loss_, grad, exec_);
  }
  void hvp(std::span<const double> theta, std::span<const double> v,
           std::span<double> out) const override {
    net_.hvp(theta, batch_, loss_, v, out, exec_);
  }

 private:
  const Sequential& net_;
  const Batch& batch_;
  Loss loss_;
  Exec exec_;
};

// 0.5 * theta^T A theta + b^T theta with symmetric A (row-major n x n).
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(std::vector<double> a, std::vector<double> b);
  static QuadraticObjective isotropic(std::size_t n, double scale = 1.0);

  std::size_t dim() const override { return b_.size(); }
  double value(std::span<const double> theta) const override;
  double value_grad(std::span<const double> theta, std::span<double> grad) const override;
  void hvp(std::span<const double> theta, std::span<const double> v,
           std::span<double> out) const override;

 private:
  std::vector<double> a_;
  std::vector<double> b_;
};

// Central-difference Hessian-vector product of any objective's gradient:
// (grad(theta + h v) - grad(theta - h v)) / 2h.
std::vector<double> fd_hvp(const Objective& f, std::span<const double> theta,
                           std::span<const double> v, double h = 1e-5);

}  // namespace amc::nn
