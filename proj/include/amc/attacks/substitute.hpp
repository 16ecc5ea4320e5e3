#pragma once

#include <cstdint>
#include <string>

#include "amc/modelcore/model.hpp"
#include "amc/modelcore/training.hpp"
#include "amc/sigdata/dataset.hpp"

namespace amc::atk {

struct SubstituteConfig {
  nn::FitConfig fit;
  double weak_accuracy = 0.6;  // below this at high SNR the substitute is flagged weak
  double high_snr_db = 10.0;
};

struct Substitute {
  std::string id;  // "<family>-<activation>#<seed>@<domain>"
  nn::Model model;
  sig::Domain domain = sig::Domain::source;
  double high_snr_accuracy = 0.0;
  bool weak = false;
};

// Trains a substitute classifier on the labeled frames of `train`. When
// `test` is given, accuracy on its frames with snr >= high_snr_db decides the
// weak flag. Throws ConfigError when no labeled frames are available.
Substitute train_substitute(const nn::ArchDescriptor& arch, const sig::DomainDataset& train,
                            const sig::DomainDataset* test, std::uint64_t seed,
                            const SubstituteConfig& cfg, Exec exec = Exec::parallel);

// Accuracy over the frames of `ds` with snr_db >= min_snr (all frames by
// default); 0 when none qualify.
double accuracy_at_snr(const nn::Model& m, const sig::DomainDataset& ds,
                       double min_snr = -1e300, Exec exec = Exec::parallel);

}  // namespace amc::atk
