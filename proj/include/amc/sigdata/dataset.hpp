#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "amc/common/parallel.hpp"
#include "amc/sigdata/channel.hpp"
#include "amc/sigdata/modulation.hpp"

namespace amc::sig {

enum class Domain : std::uint8_t { source = 0, target = 1 };
enum class Role : std::uint8_t {
  source_train = 0,
  source_test,
  target_pilot,
  target_unlabeled,
  target_test
};

std::string_view role_name(Role role);

inline constexpr std::size_t kDefaultFrameLen = 128;

// One received frame: iq holds 2*frame_len floats, row 0 (in-phase) then
// row 1 (quadrature). frame_id is the generation index within its domain
// and is what disjointness audits compare.
struct IQFrame {
  std::vector<float> iq;
  ModulationClass label = ModulationClass::BPSK;
  float snr_db = 0.0f;
  Domain domain = Domain::source;
  std::uint32_t frame_id = 0;

  bool operator==(const IQFrame&) const = default;
};

// A set of frames with a labeled/unlabeled partition. label_mask[i] != 0
// means frame i's label may be used for training. Labels of unlabeled frames
// are still stored (ground truth for scoring and for the attacker).
struct DomainDataset {
  Role role = Role::source_train;
  Domain domain = Domain::source;
  std::uint16_t frame_len = kDefaultFrameLen;
  std::vector<IQFrame> frames;
  std::vector<std::uint8_t> label_mask;
  std::string provenance;  // free-form JSON text; empty for generated data

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  std::vector<std::size_t> labeled_idx() const;
  std::vector<std::size_t> unlabeled_idx() const;
  std::vector<std::size_t> class_counts() const;
  void validate() const;

  bool operator==(const DomainDataset&) const = default;
};

struct DomainSpec {
  ChannelProfile profile;
  Domain domain = Domain::source;
  std::size_t frame_len = kDefaultFrameLen;
  std::size_t per_class = 100;       // training pool per class (source_train / pilot+unlabeled)
  std::size_t test_per_class = 100;
  std::size_t shots = 0;             // target only: pilot frames per class drawn from the pool
};

// Source domains yield {source_train, source_test}; target domains yield
// {target_pilot, target_unlabeled, target_test}. Class-balanced and
// stratified over the profile's snr_grid. Throws ConfigError when
// shots > per_class or when pilots exceed 10% of the unlabeled set.
std::vector<DomainDataset> build_domain(const DomainSpec& spec, std::uint64_t seed,
                                        Exec exec = Exec::parallel);

// Generates one frame: clean synthesis followed by the channel.
IQFrame make_frame(ModulationClass mod, double snr_db, const ChannelProfile& profile,
                   std::size_t frame_len, Domain domain, std::uint32_t frame_id,
                   std::uint64_t seed);

// First k frames of each class of a pilot set (nested pilot subsets).
DomainDataset take_shots(const DomainDataset& pilot, std::size_t k);

// Frames of `ds` at the given positions (mask and metadata preserved).
DomainDataset subset(const DomainDataset& ds, const std::vector<std::size_t>& idx);

}  // namespace amc::sig
