#include "amc/attacks/task_pool.hpp"

#include <algorithm>

#include "json.hpp"

#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"
#include "amc/modelcore/batch.hpp"

namespace amc::atk {

namespace {
constexpr std::uint64_t kPartitionStream = 0x7A;
}

TaskPool build_task_pool(std::span<const AttackSpec> attacks, std::size_t substitutes,
                         std::size_t holdout, std::uint64_t seed) {
  const std::size_t total = attacks.size() * substitutes;
  if (total == 0) throw ConfigError("task pool: need at least one attack and one substitute");
  if (holdout >= total)
    throw ConfigError("task pool: holdout " + std::to_string(holdout) +
                      " must be smaller than the pool size " + std::to_string(total));
  std::vector<AdversarialTask> all;
  for (std::size_t a = 0; a < attacks.size(); ++a)
    for (std::size_t s = 0; s < substitutes; ++s)
      all.push_back({static_cast<std::uint32_t>(a * substitutes + s), attacks[a], s});
  auto rng = make_rng(seed, kPartitionStream);
  const auto order = shuffled_indices(total, rng);
  std::vector<bool> held(total, false);
  for (std::size_t i = 0; i < holdout; ++i) held[order[i]] = true;
  TaskPool pool;
  for (std::size_t i = 0; i < total; ++i)
    (held[i] ? pool.held_out_tasks : pool.train_tasks).push_back(all[i]);
  return pool;
}

sig::DomainDataset perturb_dataset(const sig::DomainDataset& ds, const Perturber& attack,
                                   const std::string& substitute_id) {
  auto out = nn::with_frames(ds, attack.apply(nn::to_batch(ds)));
  nlohmann::json prov = {{"attack", method_name(attack.spec().method)},
                         {"substitute", substitute_id},
                         {"epsilon", attack.spec().epsilon}};
  if (!ds.provenance.empty()) {
    auto parsed = nlohmann::json::parse(ds.provenance, nullptr, false);
    prov["source"] = parsed.is_discarded() ? nlohmann::json(ds.provenance) : parsed;
  }
  out.provenance = prov.dump();
  return out;
}

}  // namespace amc::atk
