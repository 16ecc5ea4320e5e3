#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "amc/modelcore/model.hpp"
#include "amc/sigdata/dataset.hpp"

namespace amc::onl {

// Fraction of misclassified frames. Throws InputError on empty input and
// InputShapeError on a length mismatch.
double ser(std::span<const int> predictions, std::span<const int> labels);

struct SerBin {
  double snr_db = 0.0;
  double ser = 0.0;
  std::size_t n = 0;
};

struct SerSlice {
  std::vector<SerBin> bins;  // ascending snr
  double pooled = 0.0;
  std::size_t n = 0;
};

// Evaluates `m` on every frame of `test` without changing it.
SerSlice zero_shot(const nn::Model& m, const sig::DomainDataset& test, Exec exec = Exec::parallel);

}  // namespace amc::onl
