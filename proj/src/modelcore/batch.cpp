#include "amc/modelcore/batch.hpp"

#include "amc/common/error.hpp"

namespace amc::nn {

void Batch::push_back(std::span<const double> f, int label) {
  if (dim == 0 && y.empty()) dim = f.size();
  if (f.size() != dim) throw InputShapeError("batch: frame dimension mismatch");
  x.insert(x.end(), f.begin(), f.end());
  y.push_back(label);
}

void Batch::append(const Batch& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (other.dim != dim) throw InputShapeError("batch: append dimension mismatch");
  x.insert(x.end(), other.x.begin(), other.x.end());
  y.insert(y.end(), other.y.begin(), other.y.end());
}

Batch to_batch(const sig::DomainDataset& ds) {
  Batch b(2u * ds.frame_len, ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& f = ds.frames[i];
    auto dst = b.frame(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = f.iq[k];
    b.y[i] = static_cast<int>(f.label);
  }
  return b;
}

Batch to_batch(const sig::DomainDataset& ds, std::span<const std::size_t> idx) {
  Batch b(2u * ds.frame_len, idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& f = ds.frames.at(idx[i]);
    auto dst = b.frame(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = f.iq[k];
    b.y[i] = static_cast<int>(f.label);
  }
  return b;
}

Batch select(const Batch& b, std::span<const std::size_t> idx) {
  Batch out(b.dim, idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = b.frame(idx[i]);
    std::copy(src.begin(), src.end(), out.frame(i).begin());
    out.y[i] = b.y[idx[i]];
  }
  return out;
}

sig::DomainDataset with_frames(const sig::DomainDataset& ds, const Batch& b) {
  if (b.size() != ds.size() || b.dim != 2u * ds.frame_len)
    throw InputShapeError("with_frames: batch does not match dataset");
  sig::DomainDataset out = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto src = b.frame(i);
    for (std::size_t k = 0; k < src.size(); ++k) out.frames[i].iq[k] = static_cast<float>(src[k]);
  }
  return out;
}

}  // namespace amc::nn
