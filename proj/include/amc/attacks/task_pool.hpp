#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amc/attacks/attack.hpp"
#include "amc/sigdata/dataset.hpp"

namespace amc::atk {

// One (attack, substitute) combination. `substitute` indexes the caller's
// substitute list; the same index names the architecture and seed in every
// domain.
struct AdversarialTask {
  std::uint32_t id = 0;
  AttackSpec attack;
  std::size_t substitute = 0;

  bool operator==(const AdversarialTask&) const = default;
};

struct TaskPool {
  std::vector<AdversarialTask> train_tasks;
  std::vector<AdversarialTask> held_out_tasks;
};

// Cartesian product of attacks x substitutes with a seeded partition that
// holds out `holdout` combinations. Throws ConfigError when holdout is not
// smaller than the pool.
TaskPool build_task_pool(std::span<const AttackSpec> attacks, std::size_t substitutes,
                         std::size_t holdout, std::uint64_t seed);

// Copy of `ds` with every frame perturbed; the provenance block records the
// attack, the substitute and the budget.
sig::DomainDataset perturb_dataset(const sig::DomainDataset& ds, const Perturber& attack,
                                   const std::string& substitute_id);

}  // namespace amc::atk
