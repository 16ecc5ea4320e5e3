#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "amc/modelcore/model.hpp"
#include "amc/modelcore/optimizer.hpp"

namespace amc::nn {

struct FitConfig {
  OptimizerConfig optimizer;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
};

// Called after every optimizer step with (epoch, step, mean batch loss).
using StepHook = std::function<void(std::size_t, std::size_t, double)>;

// Mini-batch cross-entropy training of `m` in place. Batches are drawn from
// a fresh shuffle per epoch derived from `seed`. Returns the mean training
// loss of each epoch. A non-finite batch loss raises TrainingError carrying
// the last parameters whose loss was finite.
std::vector<double> fit(Model& m, const Batch& data, const FitConfig& cfg, std::uint64_t seed,
                        Exec exec = Exec::parallel, const StepHook& hook = {});

// Mini-batch index lists for one epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);

// True when every entry is finite.
bool all_finite(std::span<const double> v);

}  // namespace amc::nn
