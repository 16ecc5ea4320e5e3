#include "amc/modelcore/optimizer.hpp"

#include <cmath>

#include "amc/common/error.hpp"

namespace amc::nn {

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  return std::nullopt;
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::size_t dim) : cfg_(cfg) {
  if (cfg.lr < 0.0) throw ConfigError("optimizer: learning rate must be non-negative");
  if (cfg.kind == OptimizerKind::adam || cfg.momentum != 0.0) m_.assign(dim, 0.0);
  if (cfg.kind == OptimizerKind::adam) v_.assign(dim, 0.0);
}

void Optimizer::step(std::span<double> theta, std::span<const double> grad) {
  if (theta.size() != grad.size()) throw InputShapeError("optimizer: size mismatch");
  ++t_;
  if (cfg_.kind == OptimizerKind::sgd) {
    if (cfg_.momentum == 0.0) {
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg_.lr * grad[i];
      return;
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = cfg_.momentum * m_[i] + grad[i];
      theta[i] -= cfg_.lr * m_[i];
    }
    return;
  }
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    theta[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

}  // namespace amc::nn
