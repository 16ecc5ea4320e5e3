#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <omp.h>

namespace amc {

// Serial is the reference path kept for testing; parallel uses OpenMP.
enum class Exec { serial, parallel };

// Fixed reduction granularity. Partial sums are formed per chunk and then
// added in chunk order, so parallel results are bit-identical for every
// thread count.
inline constexpr std::size_t kReduceChunk = 16;

template <class Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

// Sums `body(i, acc)` contributions over i in [0, n) into `out` (overwritten).
// `make_ws()` builds a per-worker scratch object passed as the third
// argument. Both paths form one partial per chunk of kReduceChunk indices and
// add the partials in chunk order, so serial and parallel agree bit for bit.
template <class MakeWs, class Body>
void reduce_sum(Exec exec, std::size_t n, std::span<double> out, MakeWs&& make_ws, Body&& body) {
  std::fill(out.begin(), out.end(), 0.0);
  if (n == 0) return;
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  const std::size_t dim = out.size();
  if (exec == Exec::serial) {
    auto ws = make_ws();
    std::vector<double> acc(dim);
    for (std::size_t c = 0; c < chunks; ++c) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const std::size_t end = std::min(n, (c + 1) * kReduceChunk);
      for (std::size_t i = c * kReduceChunk; i < end; ++i) body(i, std::span<double>(acc), ws);
      for (std::size_t k = 0; k < dim; ++k) out[k] += acc[k];
    }
    return;
  }
  std::vector<double> partial(chunks * dim, 0.0);
  const auto nchunks = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel
  {
    auto ws = make_ws();
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < nchunks; ++c) {
      std::span<double> acc(partial.data() + static_cast<std::size_t>(c) * dim, dim);
      const std::size_t begin = static_cast<std::size_t>(c) * kReduceChunk;
      const std::size_t end = std::min(n, begin + kReduceChunk);
      for (std::size_t i = begin; i < end; ++i) body(i, acc, ws);
    }
  }
  for (std::size_t c = 0; c < chunks; ++c)
    for (std::size_t k = 0; k < dim; ++k) out[k] += partial[c * dim + k];
}

}  // namespace amc
