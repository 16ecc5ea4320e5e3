#include "amc/attacks/substitute.hpp"

#include "amc/common/error.hpp"
#include "amc/modelcore/batch.hpp"

namespace amc::atk {

double accuracy_at_snr(const nn::Model& m, const sig::DomainDataset& ds, double min_snr, Exec exec) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.frames[i].snr_db >= min_snr) idx.push_back(i);
  if (idx.empty()) return 0.0;
  return nn::accuracy(m, nn::to_batch(ds, idx), exec);
}

Substitute train_substitute(const nn::ArchDescriptor& arch, const sig::DomainDataset& train,
                            const sig::DomainDataset* test, std::uint64_t seed,
                            const SubstituteConfig& cfg, Exec exec) {
  const auto labeled = train.labeled_idx();
  if (labeled.empty()) throw ConfigError("train_substitute: no labeled frames");
  Substitute s;
  s.domain = train.domain;
  s.id = std::string(nn::family_name(arch.family)) + "-" +
         std::string(nn::activation_name(arch.activation)) + "#" + std::to_string(seed) + "@" +
         (train.domain == sig::Domain::source ? "source" : "target");
  s.model = nn::make_model(arch, seed);
  nn::fit(s.model, nn::to_batch(train, labeled), cfg.fit, seed, exec);
  if (test) {
    s.high_snr_accuracy = accuracy_at_snr(s.model, *test, cfg.high_snr_db, exec);
    s.weak = s.high_snr_accuracy < cfg.weak_accuracy;
  }
  return s;
}

}  // namespace amc::atk
