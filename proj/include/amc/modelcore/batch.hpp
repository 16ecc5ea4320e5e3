#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "amc/sigdata/dataset.hpp"

namespace amc::nn {

// Contiguous row-major batch of frames in double precision plus one integer
// target per frame (class id, or 0/1 domain label for the discriminator).
struct Batch {
  std::size_t dim = 0;
  std::vector<double> x;
  std::vector<int> y;

  Batch() = default;
  Batch(std::size_t dim_, std::size_t n) : dim(dim_), x(dim_ * n, 0.0), y(n, 0) {}

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
  std::span<const double> frame(std::size_t i) const { return {x.data() + i * dim, dim}; }
  std::span<double> frame(std::size_t i) { return {x.data() + i * dim, dim}; }

  void push_back(std::span<const double> f, int label);
  void append(const Batch& other);
};

Batch to_batch(const sig::DomainDataset& ds);
Batch to_batch(const sig::DomainDataset& ds, std::span<const std::size_t> idx);
Batch select(const Batch& b, std::span<const std::size_t> idx);

// Writes frames back into a dataset copy (rounded to f32), e.g. after an
// attack perturbed them.
sig::DomainDataset with_frames(const sig::DomainDataset& ds, const Batch& b);

}  // namespace amc::nn
