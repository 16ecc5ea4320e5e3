#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amc/attacks/substitute.hpp"
#include "amc/attacks/task_pool.hpp"
#include "amc/evalcli/config.hpp"
#include "amc/evalcli/report.hpp"
#include "amc/online/metrics.hpp"

namespace amc::eval {

using Logger = std::function<void(const std::string&)>;

struct SeedData {
  sig::DomainDataset source_train, source_test;
  sig::DomainDataset pilot_pool, unlabeled, target_test;
  sig::DomainDataset attacker_train;  // the interferer's own target-domain frames
};

// Deterministic in (cfg, seed).
SeedData make_seed_data(const ExperimentConfig& cfg, std::uint64_t seed, Exec exec = Exec::parallel);

struct OfflineTiming {
  double cpu_seconds = 0.0;
  double wall_seconds = 0.0;
};

// The attacked target sets for one held-out (attack, substitute) task.
struct AttackedTarget {
  std::string attack_id;  // "<method>@<substitute arch>"
  sig::DomainDataset pilot_pool, unlabeled, test;
};

struct CellResult {
  off::Strategy offline = off::Strategy::scratch;
  onl::OnlineStrategy online = onl::OnlineStrategy::none;
  std::size_t shots = 0;
  std::string attack;
  std::uint64_t seed = 0;
  std::vector<std::tuple<double, std::size_t, std::size_t>> bins;  // (snr, wrong, n)
  std::size_t wrong = 0, n = 0;
  double online_cpu_seconds = 0.0;
  double online_wall_seconds = 0.0;

  double ser() const { return n ? static_cast<double>(wrong) / static_cast<double>(n) : 0.0; }
};

// Every stage of one seed's pipeline, computed on first use and cached under
// `dir` (datasets, substitute and offline artifacts, per-cell results), so a
// rerun or a resumed run reuses finished work.
class SeedRun {
 public:
  SeedRun(const ExperimentConfig& cfg, std::uint64_t seed, std::filesystem::path dir, Exec exec = Exec::parallel,
          Logger log = {});

  std::uint64_t seed() const { return seed_; }
  const SeedData& data();
  const std::vector<atk::Substitute>& source_substitutes();
  const atk::TaskPool& pool();
  const nn::Model& offline_model(off::Strategy s);
  OfflineTiming offline_timing(off::Strategy s);
  std::size_t held_out_count() { return pool().held_out_tasks.size(); }
  const AttackedTarget& attacked(std::size_t held_out_index);

  // Adapts the offline model with `shots` pilots per class (ignored for
  // online none) and scores it on the attacked target test set.
  CellResult cell(off::Strategy offline, onl::OnlineStrategy online, std::size_t shots,
                  std::size_t held_out_index);
  // Adapted model for a cell without scoring or caching.
  nn::Model adapt(off::Strategy offline, onl::OnlineStrategy online, std::size_t shots,
                  std::size_t held_out_index, onl::AdaptResult* details = nullptr);

 private:
  std::filesystem::path cell_path(off::Strategy, onl::OnlineStrategy, std::size_t, std::size_t) const;
  void say(const std::string& s) const;

  const ExperimentConfig& cfg_;
  std::uint64_t seed_;
  std::filesystem::path dir_;
  Exec exec_;
  Logger log_;
  std::string digest_;
  std::optional<SeedData> data_;
  std::optional<std::vector<atk::Substitute>> subs_;
  std::optional<atk::TaskPool> pool_;
  std::map<off::Strategy, nn::Model> offline_;
  std::map<off::Strategy, OfflineTiming> timing_;
  std::map<std::size_t, AttackedTarget> attacked_;
};

// The 12-model grid: zero-shot per offline strategy plus finetune and DANN at
// every configured shot count, for every seed and held-out attack. Writes a
// manifest under cfg.out_dir; refuses a directory holding a run with another
// config digest, and one holding any run unless `resume` is set.
SerReport run_grid(const ExperimentConfig& cfg, bool resume, Exec exec = Exec::parallel, Logger log = {});

// Sweeps cfg.efficiency.shots upward for every (offline, finetune|dann)
// method until the seed-averaged SER reaches the threshold. Uses and extends
// the cached cells of the run in cfg.out_dir.
std::vector<EfficiencyRow> efficiency_probe(const ExperimentConfig& cfg, Exec exec = Exec::parallel,
                                            Logger log = {});

// Opens (or creates) the run directory, checking the manifest digest.
void open_run_dir(const ExperimentConfig& cfg, bool allow_existing);

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace amc::eval
