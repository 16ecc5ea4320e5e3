#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amc/attacks/substitute.hpp"
#include "amc/attacks/task_pool.hpp"
#include "amc/modelcore/training.hpp"
#include "amc/offline/meta.hpp"

namespace amc::off {

enum class Strategy : std::uint8_t { scratch = 0, clean, adversarial, meta_adversarial };
inline constexpr Strategy kAllStrategies[4] = {Strategy::scratch, Strategy::clean,
                                               Strategy::adversarial, Strategy::meta_adversarial};

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct OfflineConfig {
  Strategy strategy = Strategy::clean;
  MetaAlgo meta_algo = MetaAlgo::fomaml;
  double inner_lr = 0.01;          // alpha
  double outer_lr = 0.001;         // beta
  std::size_t inner_steps = 5;
  std::size_t outer_iters = 1000;
  std::size_t meta_batch = 1;      // tasks per outer update
  std::size_t inner_batch = 32;    // support frames per inner step; 0 = whole support split
  std::size_t query_batch = 32;    // 0 = whole query split
  double support_fraction = 0.7;
  nn::OptimizerKind outer_optimizer = nn::OptimizerKind::adam;
  double mix_weight = 0.5;         // lambda_mix: weight of the clean loss
  std::size_t adversarial_steps = 0;  // 0 = as many steps as clean training takes
  nn::FitConfig fit;               // clean and adversarial training
  std::uint64_t seed = 0;

  void validate() const;
};

// The perturbed data of one train task: a subset of source frames and its
// adversarial counterpart under the task's (attack, substitute).
struct TaskData {
  atk::AdversarialTask task;
  std::string substitute_id;
  nn::Batch clean;
  nn::Batch adv;
};

// Materializes each task on its own seeded subset of `frames_per_task`
// labeled source frames. PCA tasks compute their universal vector from the
// full labeled set.
std::vector<TaskData> build_task_data(std::span<const atk::AdversarialTask> tasks,
                                      std::span<const atk::Substitute> substitutes,
                                      const sig::DomainDataset& source_train,
                                      std::size_t frames_per_task, std::uint64_t seed,
                                      Exec exec = Exec::parallel);

struct LogRow {
  std::size_t iteration = 0;
  std::int64_t task_id = -1;     // -1 when not task based
  double support_loss = 0.0;     // training loss for clean/adversarial
  double query_loss = 0.0;       // NaN when not applicable
  double wall_seconds = 0.0;
  bool skipped = false;
};

struct OfflineResult {
  nn::Model model;
  std::vector<LogRow> log;
  double cpu_seconds = 0.0;
  double wall_seconds = 0.0;
  std::size_t skipped_tasks = 0;
};

// Initial parameters shared by every strategy for a given config seed.
nn::Model initial_model(const nn::ArchDescriptor& arch, const OfflineConfig& cfg);

OfflineResult train_scratch(const nn::ArchDescriptor& arch, const OfflineConfig& cfg);
OfflineResult train_clean(const nn::ArchDescriptor& arch, const sig::DomainDataset& source,
                          const OfflineConfig& cfg, Exec exec = Exec::parallel);

// Gradient of mix * L(clean) + (1 - mix) * L(adv); the term with zero weight
// is not evaluated. Returns the mixed loss.
double mixed_loss_grad(const nn::Model& m, const nn::Batch& clean, const nn::Batch& adv,
                       double mix, std::span<double> grad, Exec exec = Exec::parallel);

OfflineResult train_adversarial(const nn::ArchDescriptor& arch, std::span<const TaskData> tasks,
                                std::size_t source_size, const OfflineConfig& cfg,
                                Exec exec = Exec::parallel);

// Episodic meta-training over the perturbed task data (perturbed frames
// only). Each visit re-draws the task's support/query split. Tasks whose
// inner loop diverges are skipped and logged.
OfflineResult meta_train(const nn::ArchDescriptor& arch, std::span<const TaskData> tasks,
                         const OfflineConfig& cfg, Exec exec = Exec::parallel);

// Dispatches on cfg.strategy.
OfflineResult train_offline(const nn::ArchDescriptor& arch, const sig::DomainDataset& source,
                            std::span<const TaskData> tasks, const OfflineConfig& cfg,
                            Exec exec = Exec::parallel);

// iteration,task_id,support_loss,query_loss,wall_seconds,skipped
void write_log_csv(const std::filesystem::path& path, std::span<const LogRow> log);

}  // namespace amc::off
