#include "amc/online/metrics.hpp"

#include <map>

#include "amc/common/error.hpp"

namespace amc::onl {

double ser(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw InputShapeError("ser: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw InputError("ser: empty evaluation set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

SerSlice zero_shot(const nn::Model& m, const sig::DomainDataset& test, Exec exec) {
  const nn::Batch b = nn::to_batch(test);
  const auto pred = nn::predict(m, b, exec);
  SerSlice out;
  out.pooled = ser(pred, b.y);
  out.n = b.size();
  std::map<float, std::pair<std::size_t, std::size_t>> bins;  // snr -> (wrong, n)
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto& [wrong, n] = bins[test.frames[i].snr_db];
    wrong += pred[i] != b.y[i];
    ++n;
  }
  for (const auto& [snr, c] : bins)
    out.bins.push_back({snr, static_cast<double>(c.first) / static_cast<double>(c.second), c.second});
  return out;
}

}  // namespace amc::onl
