#include "amc/offline/meta.hpp"

#include <array>
#include <cmath>

#include "amc/common/error.hpp"
#include "amc/modelcore/training.hpp"

namespace amc::off {
namespace {
constexpr std::array<std::string_view, 3> kAlgoNames = {"maml", "fomaml", "reptile"};
}

std::string_view meta_algo_name(MetaAlgo a) { return kAlgoNames.at(static_cast<std::size_t>(a)); }

std::optional<MetaAlgo> parse_meta_algo(std::string_view name) {
  for (std::size_t i = 0; i < kAlgoNames.size(); ++i)
    if (kAlgoNames[i] == name) return static_cast<MetaAlgo>(i);
  return std::nullopt;
}

MetaStep meta_gradient(MetaAlgo algo, std::span<const double> theta,
                       std::span<const nn::Objective* const> support,
                       const nn::Objective& query, double alpha) {
  const std::size_t n = theta.size();
  MetaStep out;
  std::vector<std::vector<double>> iterates;
  std::vector<double> cur(theta.begin(), theta.end()), g(n);
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (algo == MetaAlgo::maml) iterates.push_back(cur);
    const double l = support[i]->value_grad(cur, g);
    if (i == 0) out.support_loss = l;
    if (!std::isfinite(l) || !nn::all_finite(g)) {
      out.diverged = true;
      return out;
    }
    for (std::size_t k = 0; k < n; ++k) cur[k] -= alpha * g[k];
  }
  if (!nn::all_finite(cur)) {
    out.diverged = true;
    return out;
  }

  std::vector<double> gq(n);
  out.query_loss = query.value_grad(cur, gq);
  if (support.empty()) out.support_loss = out.query_loss;
  if (!std::isfinite(out.query_loss)) {
    out.diverged = true;
    return out;
  }
  switch (algo) {
    case MetaAlgo::fomaml:
      out.direction = std::move(gq);
      break;
    case MetaAlgo::maml: {
      std::vector<double> hg(n);
      for (std::size_t i = support.size(); i-- > 0;) {
        support[i]->hvp(iterates[i], gq, hg);
        for (std::size_t k = 0; k < n; ++k) gq[k] -= alpha * hg[k];
      }
      out.direction = std::move(gq);
      break;
    }
    case MetaAlgo::reptile:
      out.direction.resize(n);
      for (std::size_t k = 0; k < n; ++k) out.direction[k] = theta[k] - cur[k];
      break;
  }
  out.diverged = !nn::all_finite(out.direction);
  out.adapted = std::move(cur);
  return out;
}

nn::Model adapt_inner(const nn::Model& m, const nn::Batch& support, double alpha,
                      std::size_t inner_steps, Exec exec) {
  if (support.empty()) throw ConfigError("adapt_inner: support set is empty");
  nn::Model out = m;
  std::vector<double> g(out.param_count());
  for (std::size_t s = 0; s < inner_steps; ++s) {
    nn::param_grad(out, support, g, exec);
    auto p = out.params();
    for (std::size_t k = 0; k < g.size(); ++k) p[k] -= alpha * g[k];
  }
  return out;
}

}  // namespace amc::off
