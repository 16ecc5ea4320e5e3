#include "amc/offline/strategy.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "amc/common/bytes.hpp"
#include "amc/common/clock.hpp"
#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"

namespace amc::off {
namespace {

constexpr std::array<std::string_view, 4> kStrategyNames = {"scratch", "clean", "adversarial",
                                                            "meta"};
constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kTaskSubsetStream = 0x12;
constexpr std::uint64_t kAdvSampleStream = 0x13;
constexpr std::uint64_t kMetaStream = 0x14;

void finish(OfflineResult& r, const Clock& clock) {
  r.cpu_seconds = clock.cpu();
  r.wall_seconds = clock.wall();
}

}  // namespace

std::string_view strategy_name(Strategy s) { return kStrategyNames.at(static_cast<std::size_t>(s)); }

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
    if (kStrategyNames[i] == name) return static_cast<Strategy>(i);
  if (name == "meta_adversarial") return Strategy::meta_adversarial;
  return std::nullopt;
}

void OfflineConfig::validate() const {
  if (!(inner_lr > 0.0) || !(outer_lr > 0.0))
    throw ConfigError("offline: inner_lr and outer_lr must be positive");
  if (!(mix_weight >= 0.0 && mix_weight <= 1.0)) throw ConfigError("offline: mix_weight must lie in [0, 1]");
  if (!(support_fraction > 0.0 && support_fraction < 1.0))
    throw ConfigError("offline: support_fraction must lie in (0, 1)");
  if (meta_batch == 0) throw ConfigError("offline: meta_batch must be >= 1");
  if (fit.batch_size == 0) throw ConfigError("offline: batch_size must be >= 1");
}

std::vector<TaskData> build_task_data(std::span<const atk::AdversarialTask> tasks,
                                      std::span<const atk::Substitute> substitutes,
                                      const sig::DomainDataset& source_train,
                                      std::size_t frames_per_task, std::uint64_t seed, Exec exec) {
  const auto labeled = source_train.labeled_idx();
  if (labeled.empty()) throw ConfigError("build_task_data: no labeled source frames");
  const nn::Batch full = nn::to_batch(source_train, labeled);
  std::vector<TaskData> out;
  out.reserve(tasks.size());
  for (const auto& task : tasks) {
    if (task.substitute >= substitutes.size())
      throw ConfigError("build_task_data: task refers to a missing substitute");
    const auto& sub = substitutes[task.substitute];
    auto rng = make_rng(seed, kTaskSubsetStream, task.id);
    auto idx = sample_indices(full.size(), frames_per_task, rng);
    TaskData td;
    td.task = task;
    td.substitute_id = sub.id;
    td.clean = nn::select(full, idx);
    atk::Perturber attack(sub.model, task.attack, &full, exec);
    td.adv = attack.apply(td.clean);
    out.push_back(std::move(td));
  }
  return out;
}

nn::Model initial_model(const nn::ArchDescriptor& arch, const OfflineConfig& cfg) {
  return nn::make_model(arch, derive_seed(cfg.seed, kInitStream));
}

OfflineResult train_scratch(const nn::ArchDescriptor& arch, const OfflineConfig& cfg) {
  Clock clock;
  OfflineResult r;
  r.model = initial_model(arch, cfg);
  finish(r, clock);
  return r;
}

OfflineResult train_clean(const nn::ArchDescriptor& arch, const sig::DomainDataset& source,
                          const OfflineConfig& cfg, Exec exec) {
  cfg.validate();
  const auto labeled = source.labeled_idx();
  if (labeled.empty()) throw ConfigError("train_clean: no labeled source frames");
  Clock clock;
  OfflineResult r;
  r.model = initial_model(arch, cfg);
  const auto curve = nn::fit(r.model, nn::to_batch(source, labeled), cfg.fit, cfg.seed, exec);
  for (std::size_t e = 0; e < curve.size(); ++e)
    r.log.push_back({e, -1, curve[e], std::numeric_limits<double>::quiet_NaN(), clock.wall(), false});
  finish(r, clock);
  return r;
}

double mixed_loss_grad(const nn::Model& m, const nn::Batch& clean, const nn::Batch& adv, double mix,
                       std::span<double> grad, Exec exec) {
  if (mix == 1.0) return nn::param_grad(m, clean, grad, exec);
  if (mix == 0.0) return nn::param_grad(m, adv, grad, exec);
  std::vector<double> ga(grad.size());
  const double lc = nn::param_grad(m, clean, grad, exec);
  const double la = nn::param_grad(m, adv, ga, exec);
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = mix * grad[k] + (1.0 - mix) * ga[k];
  return mix * lc + (1.0 - mix) * la;
}

OfflineResult train_adversarial(const nn::ArchDescriptor& arch, std::span<const TaskData> tasks,
                                std::size_t source_size, const OfflineConfig& cfg, Exec exec) {
  cfg.validate();
  if (tasks.empty()) throw ConfigError("train_adversarial: the train task pool is empty");
  Clock clock;
  OfflineResult r;
  r.model = initial_model(arch, cfg);
  const std::size_t per_epoch = (source_size + cfg.fit.batch_size - 1) / cfg.fit.batch_size;
  const std::size_t steps = cfg.adversarial_steps ? cfg.adversarial_steps : cfg.fit.epochs * per_epoch;
  nn::Optimizer opt(cfg.fit.optimizer, r.model.param_count());
  std::vector<double> grad(r.model.param_count());
  std::vector<double> last(r.model.params().begin(), r.model.params().end());
  auto rng = make_rng(cfg.seed, kAdvSampleStream);
  double epoch_loss = 0.0;
  std::size_t epoch_steps = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& td = tasks[uniform_index(rng, tasks.size())];
    const auto idx = sample_indices(td.clean.size(), cfg.fit.batch_size, rng);
    const double loss =
        mixed_loss_grad(r.model, nn::select(td.clean, idx), nn::select(td.adv, idx), cfg.mix_weight, grad, exec);
    if (!std::isfinite(loss) || !nn::all_finite(grad))
      throw TrainingError("adversarial training diverged at step " + std::to_string(s), last);
    opt.step(r.model.params(), grad);
    last.assign(r.model.params().begin(), r.model.params().end());
    epoch_loss += loss;
    ++epoch_steps;
    if (epoch_steps == per_epoch || s + 1 == steps) {
      r.log.push_back({r.log.size(), -1, epoch_loss / static_cast<double>(epoch_steps),
                       std::numeric_limits<double>::quiet_NaN(), clock.wall(), false});
      epoch_loss = 0.0;
      epoch_steps = 0;
    }
  }
  finish(r, clock);
  return r;
}

OfflineResult meta_train(const nn::ArchDescriptor& arch, std::span<const TaskData> tasks,
                         const OfflineConfig& cfg, Exec exec) {
  cfg.validate();
  if (tasks.empty()) throw ConfigError("meta_train: the train task pool is empty");
  Clock clock;
  OfflineResult r;
  r.model = initial_model(arch, cfg);
  const std::size_t n = r.model.param_count();
  nn::Optimizer opt({cfg.outer_optimizer, cfg.outer_lr}, n);
  std::vector<double> dir(n);
  for (std::size_t it = 0; it < cfg.outer_iters; ++it) {
    auto rng = make_rng(cfg.seed, kMetaStream, it);
    std::fill(dir.begin(), dir.end(), 0.0);
    std::size_t used = 0;
    for (std::size_t b = 0; b < cfg.meta_batch; ++b) {
      const auto& td = tasks[uniform_index(rng, tasks.size())];
      const std::size_t total = td.adv.size();
      const auto order = shuffled_indices(total, rng);
      const std::size_t n_support = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::lround(cfg.support_fraction * static_cast<double>(total))), 1,
          total > 1 ? total - 1 : 1);
      const nn::Batch support =
          nn::select(td.adv, std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_support)));
      const nn::Batch query =
          nn::select(td.adv, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(n_support), order.end()));

      std::vector<nn::Batch> inner;
      inner.reserve(cfg.inner_steps);
      for (std::size_t s = 0; s < cfg.inner_steps; ++s)
        inner.push_back(nn::select(support, sample_indices(support.size(), cfg.inner_batch, rng)));
      const nn::Batch qb = nn::select(query, sample_indices(query.size(), cfg.query_batch, rng));

      std::vector<nn::BatchObjective> objs;
      objs.reserve(inner.size());
      for (const auto& ib : inner) objs.emplace_back(r.model.net, ib, nn::Loss::cross_entropy, exec);
      std::vector<const nn::Objective*> ptrs;
      for (const auto& o : objs) ptrs.push_back(&o);
      const nn::BatchObjective qobj(r.model.net, qb, nn::Loss::cross_entropy, exec);

      const auto step = meta_gradient(cfg.meta_algo, r.model.params(), ptrs, qobj, cfg.inner_lr);
      LogRow row{it, td.task.id, step.support_loss, step.query_loss, clock.wall(), step.diverged};
      r.log.push_back(row);
      if (step.diverged) {
        ++r.skipped_tasks;
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) dir[k] += step.direction[k];
      ++used;
    }
    if (used == 0) continue;
    for (auto& d : dir) d /= static_cast<double>(used);
    opt.step(r.model.params(), dir);
  }
  finish(r, clock);
  return r;
}

OfflineResult train_offline(const nn::ArchDescriptor& arch, const sig::DomainDataset& source,
                            std::span<const TaskData> tasks, const OfflineConfig& cfg, Exec exec) {
  switch (cfg.strategy) {
    case Strategy::scratch:
      return train_scratch(arch, cfg);
    case Strategy::clean:
      return train_clean(arch, source, cfg, exec);
    case Strategy::adversarial:
      return train_adversarial(arch, tasks, source.labeled_idx().size(), cfg, exec);
    case Strategy::meta_adversarial:
      return meta_train(arch, tasks, cfg, exec);
  }
  throw UnsupportedOperationError("unknown offline strategy");
}

void write_log_csv(const std::filesystem::path& path, std::span<const LogRow> log) {
  std::ostringstream os;
  os.precision(9);
  os << "iteration,task_id,support_loss,query_loss,wall_seconds,skipped\n";
  for (const auto& r : log) {
    os << r.iteration << ',' << r.task_id << ',' << r.support_loss << ',';
    if (!std::isnan(r.query_loss)) os << r.query_loss;
    os << ',' << r.wall_seconds << ',' << (r.skipped ? 1 : 0) << '\n';
  }
  write_text_atomic(path, os.str());
}

}  // namespace amc::off
