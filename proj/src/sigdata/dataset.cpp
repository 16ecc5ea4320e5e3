#include "amc/sigdata/dataset.hpp"

#include <array>
#include <string>

#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"

namespace amc::sig {
namespace {

constexpr std::uint64_t kStreamSnrShuffle = 0x51;
constexpr std::uint64_t kStreamFrame = 0xF0;

struct FramePlan {
  ModulationClass label;
  double snr_db;
  std::uint32_t frame_id;
};

// Per class: n frames whose SNRs cycle over the grid, in seeded random order.
std::vector<double> stratified_snrs(const std::vector<double>& grid, std::size_t n, Rng& rng) {
  std::vector<double> snr(n);
  const auto order = shuffled_indices(n, rng);
  for (std::size_t j = 0; j < n; ++j) snr[j] = grid[order[j] % grid.size()];
  return snr;
}

DomainDataset realize(const std::vector<FramePlan>& plan, const DomainSpec& spec, Role role,
                      std::uint64_t seed, Exec exec) {
  DomainDataset ds;
  ds.role = role;
  ds.domain = spec.domain;
  ds.frame_len = static_cast<std::uint16_t>(spec.frame_len);
  ds.frames.resize(plan.size());
  const std::uint64_t domain_stream = kStreamFrame + static_cast<std::uint64_t>(spec.domain);
  for_each_index(exec, plan.size(), [&](std::size_t i) {
    const auto& p = plan[i];
    ds.frames[i] = make_frame(p.label, p.snr_db, spec.profile, spec.frame_len, spec.domain,
                              p.frame_id, derive_seed(seed, domain_stream, p.frame_id));
  });
  const bool labeled = role != Role::target_unlabeled;
  ds.label_mask.assign(plan.size(), labeled ? 1 : 0);
  return ds;
}

}  // namespace

std::string_view role_name(Role role) {
  static constexpr std::array<std::string_view, 5> names = {
      "source_train", "source_test", "target_pilot", "target_unlabeled", "target_test"};
  return names.at(static_cast<std::size_t>(role));
}

std::vector<std::size_t> DomainDataset::labeled_idx() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < label_mask.size(); ++i)
    if (label_mask[i]) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> DomainDataset::unlabeled_idx() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < label_mask.size(); ++i)
    if (!label_mask[i]) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> DomainDataset::class_counts() const {
  std::vector<std::size_t> counts(kNumClasses, 0);
  for (const auto& f : frames) ++counts[static_cast<std::size_t>(f.label)];
  return counts;
}

void DomainDataset::validate() const {
  if (label_mask.size() != frames.size())
    throw InputShapeError("dataset: label mask size does not match frame count");
  for (const auto& f : frames) {
    if (f.iq.size() != 2u * frame_len) throw InputShapeError("dataset: frame length mismatch");
    if (static_cast<std::size_t>(f.label) >= kNumClasses) throw InputError("dataset: bad label");
  }
}

IQFrame make_frame(ModulationClass mod, double snr_db, const ChannelProfile& profile,
                   std::size_t frame_len, Domain domain, std::uint32_t frame_id,
                   std::uint64_t seed) {
  const auto clean = synth_clean(mod, frame_len, derive_seed(seed, 1));
  const auto rx = apply_channel(clean, profile, snr_db, derive_seed(seed, 2));
  IQFrame f;
  f.iq.resize(2 * frame_len);
  for (std::size_t t = 0; t < frame_len; ++t) {
    f.iq[t] = static_cast<float>(rx[t].real());
    f.iq[frame_len + t] = static_cast<float>(rx[t].imag());
  }
  f.label = mod;
  f.snr_db = static_cast<float>(snr_db);
  f.domain = domain;
  f.frame_id = frame_id;
  return f;
}

std::vector<DomainDataset> build_domain(const DomainSpec& spec, std::uint64_t seed, Exec exec) {
  spec.profile.validate();
  if (spec.frame_len < 16 || spec.frame_len > 65535)
    throw ConfigError("build_domain: frame_len out of range");
  if (spec.shots > spec.per_class)
    throw ConfigError("build_domain: shots (" + std::to_string(spec.shots) +
                      ") exceeds per_class (" + std::to_string(spec.per_class) + ")");
  if (spec.domain == Domain::source && spec.shots != 0)
    throw ConfigError("build_domain: shots only apply to the target domain");
  if (spec.domain == Domain::target && spec.shots > 0 &&
      10 * spec.shots > spec.per_class - spec.shots)
    throw ConfigError("build_domain: pilot set would exceed 10% of the unlabeled set");

  Rng snr_rng = make_rng(seed, kStreamSnrShuffle, static_cast<std::uint64_t>(spec.domain));
  std::vector<FramePlan> pool, pilot, test;
  std::uint32_t next_id = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto mod = static_cast<ModulationClass>(c);
    const auto snrs = stratified_snrs(spec.profile.snr_grid, spec.per_class, snr_rng);
    for (std::size_t j = 0; j < spec.per_class; ++j) {
      FramePlan p{mod, snrs[j], next_id++};
      if (j < spec.shots)
        pilot.push_back(p);
      else
        pool.push_back(p);
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto mod = static_cast<ModulationClass>(c);
    const auto snrs = stratified_snrs(spec.profile.snr_grid, spec.test_per_class, snr_rng);
    for (std::size_t j = 0; j < spec.test_per_class; ++j) test.push_back({mod, snrs[j], next_id++});
  }

  std::vector<DomainDataset> out;
  if (spec.domain == Domain::source) {
    out.push_back(realize(pool, spec, Role::source_train, seed, exec));
    out.push_back(realize(test, spec, Role::source_test, seed, exec));
  } else {
    out.push_back(realize(pilot, spec, Role::target_pilot, seed, exec));
    out.push_back(realize(pool, spec, Role::target_unlabeled, seed, exec));
    out.push_back(realize(test, spec, Role::target_test, seed, exec));
  }
  return out;
}

DomainDataset take_shots(const DomainDataset& pilot, std::size_t k) {
  std::vector<std::size_t> taken(kNumClasses, 0), idx;
  for (std::size_t i = 0; i < pilot.size(); ++i) {
    auto& n = taken[static_cast<std::size_t>(pilot.frames[i].label)];
    if (n < k) {
      idx.push_back(i);
      ++n;
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (taken[c] != k)
      throw ConfigError("take_shots: pilot set has fewer than " + std::to_string(k) +
                        " frames of class " + std::string(class_name(static_cast<ModulationClass>(c))));
  return subset(pilot, idx);
}

DomainDataset subset(const DomainDataset& ds, const std::vector<std::size_t>& idx) {
  DomainDataset out;
  out.role = ds.role;
  out.domain = ds.domain;
  out.frame_len = ds.frame_len;
  out.provenance = ds.provenance;
  out.frames.reserve(idx.size());
  for (auto i : idx) {
    out.frames.push_back(ds.frames.at(i));
    out.label_mask.push_back(ds.label_mask.at(i));
  }
  return out;
}

}  // namespace amc::sig
