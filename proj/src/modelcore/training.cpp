#include "amc/modelcore/training.hpp"

#include <cmath>

#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"

namespace amc::nn {

namespace {
constexpr std::uint64_t kShuffleStream = 0x5A;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  auto rng = make_rng(seed, kShuffleStream, epoch);
  const auto order = shuffled_indices(n, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

std::vector<double> fit(Model& m, const Batch& data, const FitConfig& cfg, std::uint64_t seed,
                        Exec exec, const StepHook& hook) {
  if (data.empty()) throw ConfigError("fit: training set is empty");
  Optimizer opt(cfg.optimizer, m.param_count());
  std::vector<double> grad(m.param_count());
  std::vector<double> last(m.params().begin(), m.params().end());
  std::vector<double> curve;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    double total = 0.0;
    std::size_t step = 0;
    for (const auto& idx : epoch_batches(data.size(), cfg.batch_size, seed, e)) {
      const Batch b = select(data, idx);
      const double loss = param_grad(m, b, grad, exec);
      if (!std::isfinite(loss) || !all_finite(grad))
        throw TrainingError("training diverged at epoch " + std::to_string(e), last);
      opt.step(m.params(), grad);
      if (!all_finite(m.params()))
        throw TrainingError("parameters became non-finite at epoch " + std::to_string(e), last);
      last.assign(m.params().begin(), m.params().end());
      total += loss * static_cast<double>(idx.size());
      if (hook) hook(e, step, loss);
      ++step;
    }
    curve.push_back(total / static_cast<double>(data.size()));
  }
  return curve;
}

}  // namespace amc::nn
