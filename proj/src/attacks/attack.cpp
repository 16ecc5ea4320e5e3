#include "amc/attacks/attack.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "amc/common/error.hpp"

namespace amc::atk {
namespace {

constexpr std::array<std::string_view, kNumMethods> kMethodNames = {"fgsm", "pgd", "mim", "cw",
                                                                    "pca"};

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<double> grads_at(const nn::Model& sub, const nn::Batch& x, std::span<const double> delta,
                             Exec exec) {
  nn::Batch cur = x;
  for (std::size_t k = 0; k < cur.x.size(); ++k) cur.x[k] += delta[k];
  std::vector<double> g(cur.x.size());
  sub.net.input_grads(sub.params(), cur, nn::Loss::cross_entropy, g, exec);
  return g;
}

nn::Batch add_delta(const nn::Batch& x, std::span<const double> delta) {
  nn::Batch out = x;
  for (std::size_t k = 0; k < out.x.size(); ++k) out.x[k] += delta[k];
  return out;
}

// Shared sign-step loop of PGD (mu < 0 disables momentum) and MIM.
std::vector<double> sign_steps(const nn::Model& sub, const nn::Batch& x, double eps, double alpha,
                               int steps, double mu, Exec exec,
                               std::vector<std::vector<double>>* trace) {
  if (steps < 1) throw ConfigError("iterative attack: steps must be >= 1");
  const std::size_t dim = x.dim;
  std::vector<double> delta(x.x.size(), 0.0);
  std::vector<double> mom(mu >= 0.0 ? x.x.size() : 0, 0.0);
  for (int t = 0; t < steps; ++t) {
    const auto g = grads_at(sub, x, delta, exec);
    for_each_index(exec, x.size(), [&](std::size_t i) {
      const double* gi = g.data() + i * dim;
      double* di = delta.data() + i * dim;
      if (mu >= 0.0) {
        double* mi = mom.data() + i * dim;
        double l1 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) l1 += std::abs(gi[k]);
        for (std::size_t k = 0; k < dim; ++k) mi[k] = mu * mi[k] + (l1 > 0.0 ? gi[k] / l1 : 0.0);
        for (std::size_t k = 0; k < dim; ++k) di[k] += alpha * sign(mi[k]);
      } else {
        for (std::size_t k = 0; k < dim; ++k) di[k] += alpha * sign(gi[k]);
      }
      project_l2({di, dim}, eps);
    });
    if (trace) trace->push_back(delta);
  }
  return delta;
}

double margin_of(std::span<const double> z, int y, std::size_t* runner_up) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.size(); ++j)
    if (static_cast<int>(j) != y && z[j] > best) {
      best = z[j];
      *runner_up = j;
    }
  return z[static_cast<std::size_t>(y)] - best;
}

void cw_frame(const nn::Model& sub, std::span<const double> x, int y, const AttackSpec& spec,
              std::span<double> out_delta, std::uint8_t& converged) {
  const std::size_t dim = x.size();
  const std::size_t classes = sub.net.output_shape().size();
  const double lr = spec.cw_lr * spec.epsilon / std::sqrt(static_cast<double>(dim));
  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

  std::vector<double> delta(dim), m(dim), v(dim), xin(dim), z(classes), dout(classes), gx(dim);
  std::vector<double> best_success, fallback;
  double best_norm = std::numeric_limits<double>::infinity();
  double best_margin = std::numeric_limits<double>::infinity();
  double c = spec.c, lo = 0.0, hi = std::numeric_limits<double>::infinity();

  for (int round = 0; round < spec.binary_search_steps; ++round) {
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    bool success = false;
    for (int t = 0; t <= spec.steps; ++t) {
      for (std::size_t k = 0; k < dim; ++k) xin[k] = x[k] + delta[k];
      sub.net.forward(sub.params(), xin, z);
      std::size_t j = 0;
      const double margin = margin_of(z, y, &j);
      if (margin < 0.0) {
        success = true;
        const double n = l2_norm(delta);
        if (n < best_norm) {
          best_norm = n;
          best_success = delta;
        }
      }
      if (margin < best_margin) {
        best_margin = margin;
        fallback = delta;
      }
      if (t == spec.steps) break;
      if (margin > -spec.kappa && c > 0.0) {
        std::fill(dout.begin(), dout.end(), 0.0);
        dout[static_cast<std::size_t>(y)] = c;
        dout[j] = -c;
        sub.net.vjp_input(sub.params(), xin, dout, gx);
      } else {
        std::fill(gx.begin(), gx.end(), 0.0);
      }
      const double tt = static_cast<double>(t + 1);
      const double c1 = 1.0 - std::pow(b1, tt), c2 = 1.0 - std::pow(b2, tt);
      for (std::size_t k = 0; k < dim; ++k) {
        const double g = 2.0 * delta[k] + gx[k];
        m[k] = b1 * m[k] + (1.0 - b1) * g;
        v[k] = b2 * v[k] + (1.0 - b2) * g * g;
        delta[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + adam_eps);
      }
    }
    if (success) {
      hi = std::min(hi, c);
      c = 0.5 * (lo + hi);
    } else {
      lo = std::max(lo, c);
      c = std::isinf(hi) ? 2.0 * c : 0.5 * (lo + hi);
    }
  }
  converged = best_success.empty() ? 0 : 1;
  const auto& chosen = best_success.empty() ? fallback : best_success;
  std::copy(chosen.begin(), chosen.end(), out_delta.begin());
  project_l2(out_delta, spec.epsilon);
}

}  // namespace

std::string_view method_name(Method m) { return kMethodNames.at(static_cast<std::size_t>(m)); }

std::optional<Method> parse_method(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i)
    if (kMethodNames[i] == name) return static_cast<Method>(i);
  return std::nullopt;
}

void AttackSpec::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("attack: epsilon must be positive");
  if ((method == Method::pgd || method == Method::mim) && steps < 1)
    throw ConfigError("attack: PGD/MIM need steps >= 1");
  if (method == Method::cw && steps < 10) throw ConfigError("attack: CW needs steps >= 10");
  if (alpha < 0.0) throw ConfigError("attack: alpha must be positive (0 selects epsilon/4)");
  if (mu < 0.0) throw ConfigError("attack: mu must be non-negative");
  if (c < 0.0) throw ConfigError("attack: c must be non-negative");
  if (method == Method::cw && binary_search_steps < 1)
    throw ConfigError("attack: binary_search_steps must be >= 1");
  if (!(cw_lr > 0.0)) throw ConfigError("attack: cw_lr must be positive");
}

double epsilon_from_psr(double psr_db, std::size_t frame_len, double signal_power) {
  return std::sqrt(static_cast<double>(frame_len) * signal_power * std::pow(10.0, psr_db / 10.0));
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void project_l2(std::span<double> delta, double eps) {
  double peak = 0.0;
  for (double d : delta) peak = std::max(peak, std::abs(d));
  if (peak == 0.0) return;
  double s = 0.0;
  for (double d : delta) s += (d / peak) * (d / peak);
  const double unit_norm = std::sqrt(s);
  if (peak * unit_norm <= eps) return;
  const double scale = eps / unit_norm;
  for (double& d : delta) d = (d / peak) * scale;
}

nn::Batch fgsm(const nn::Model& sub, const nn::Batch& x, double eps, Exec exec) {
  std::vector<double> g(x.x.size());
  sub.net.input_grads(sub.params(), x, nn::Loss::cross_entropy, g, exec);
  const std::size_t dim = x.dim;
  for_each_index(exec, x.size(), [&](std::size_t i) {
    double* gi = g.data() + i * dim;
    for (std::size_t k = 0; k < dim; ++k) gi[k] = eps * sign(gi[k]);
    project_l2({gi, dim}, eps);
  });
  return add_delta(x, g);
}

nn::Batch pgd(const nn::Model& sub, const nn::Batch& x, double eps, double alpha, int steps,
              Exec exec) {
  return add_delta(x, sign_steps(sub, x, eps, alpha, steps, -1.0, exec, nullptr));
}

nn::Batch mim(const nn::Model& sub, const nn::Batch& x, double eps, double alpha, int steps,
              double mu, Exec exec) {
  if (mu < 0.0) throw ConfigError("mim: mu must be non-negative");
  return add_delta(x, sign_steps(sub, x, eps, alpha, steps, mu, exec, nullptr));
}

std::vector<std::vector<double>> pgd_trajectory(const nn::Model& sub, std::span<const double> x,
                                                int y, double eps, double alpha, int steps) {
  nn::Batch b(x.size(), 0);
  b.push_back(x, y);
  std::vector<std::vector<double>> trace;
  sign_steps(sub, b, eps, alpha, steps, -1.0, Exec::serial, &trace);
  return trace;
}

std::vector<std::vector<double>> mim_trajectory(const nn::Model& sub, std::span<const double> x,
                                                int y, double eps, double alpha, int steps,
                                                double mu) {
  if (mu < 0.0) throw ConfigError("mim: mu must be non-negative");
  nn::Batch b(x.size(), 0);
  b.push_back(x, y);
  std::vector<std::vector<double>> trace;
  sign_steps(sub, b, eps, alpha, steps, mu, Exec::serial, &trace);
  return trace;
}

CwResult cw(const nn::Model& sub, const nn::Batch& x, const AttackSpec& spec, Exec exec) {
  if (spec.steps < 10) throw ConfigError("cw: steps must be >= 10");
  CwResult r;
  std::vector<double> delta(x.x.size(), 0.0);
  r.converged.assign(x.size(), 0);
  for_each_index(exec, x.size(), [&](std::size_t i) {
    cw_frame(sub, x.frame(i), x.y[i], spec, {delta.data() + i * x.dim, x.dim}, r.converged[i]);
  });
  r.x_adv = add_delta(x, delta);
  return r;
}

std::vector<double> pca_universal(const nn::Model& sub, const nn::Batch& data, double eps,
                                  PcaSpace space, Exec exec) {
  const std::size_t dim = data.dim;
  if (data.size() < dim)
    throw InputShapeError("pca_universal: need at least " + std::to_string(dim) + " frames");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(dim));
  if (space == PcaSpace::gradient) {
    std::vector<double> g(data.x.size());
    sub.net.input_grads(sub.params(), data, nn::Loss::cross_entropy, g, exec);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double n = l2_norm({g.data() + i * dim, dim});
      for (std::size_t k = 0; k < dim; ++k)
        rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            n > 0.0 ? g[i * dim + k] / n : 0.0;
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t k = 0; k < dim; ++k)
        rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = data.x[i * dim + k];
    rows.rowwise() -= rows.colwise().mean();
  }
  const Eigen::MatrixXd moment = rows.transpose() * rows;
  if (moment.cwiseAbs().maxCoeff() == 0.0)
    throw NumericalError("pca_universal: collection has rank 0");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(moment);
  if (solver.info() != Eigen::Success) throw NumericalError("pca_universal: eigensolver failed");
  const Eigen::VectorXd u = solver.eigenvectors().col(static_cast<Eigen::Index>(dim) - 1);

  std::vector<double> v(dim);
  const double un = u.norm();
  for (std::size_t k = 0; k < dim; ++k) v[k] = eps * u(static_cast<Eigen::Index>(k)) / un;
  std::vector<double> neg(dim);
  for (std::size_t k = 0; k < dim; ++k) neg[k] = -v[k];
  const double plus = sub.net.loss(add_universal(data, v), nn::Loss::cross_entropy, exec);
  const double minus = sub.net.loss(add_universal(data, neg), nn::Loss::cross_entropy, exec);
  return minus > plus ? neg : v;
}

nn::Batch add_universal(const nn::Batch& x, std::span<const double> v) {
  if (v.size() != x.dim) throw InputShapeError("add_universal: vector length mismatch");
  nn::Batch out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t k = 0; k < x.dim; ++k) out.x[i * x.dim + k] += v[k];
  return out;
}

Perturber::Perturber(const nn::Model& sub, const AttackSpec& spec, const nn::Batch* pca_data,
                     Exec exec)
    : sub_(sub), spec_(spec), exec_(exec) {
  spec_.validate();
  if (spec_.method == Method::pca) {
    if (!pca_data) throw ConfigError("PCA attack needs attacker data for the universal vector");
    universal_ = pca_universal(sub, *pca_data, spec_.epsilon, spec_.pca_space, exec);
  }
}

nn::Batch Perturber::apply(const nn::Batch& x) const {
  if (x.empty()) return x;
  switch (spec_.method) {
    case Method::fgsm:
      return fgsm(sub_, x, spec_.epsilon, exec_);
    case Method::pgd:
      return pgd(sub_, x, spec_.epsilon, spec_.step_size(), spec_.steps, exec_);
    case Method::mim:
      return mim(sub_, x, spec_.epsilon, spec_.step_size(), spec_.steps, spec_.mu, exec_);
    case Method::cw:
      return cw(sub_, x, spec_, exec_).x_adv;
    case Method::pca:
      return add_universal(x, universal_);
  }
  throw UnsupportedOperationError("unknown attack method");
}

}  // namespace amc::atk
