#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amc/modelcore/model.hpp"

namespace amc::nn {

inline constexpr char kArtifactMagic[4] = {'A', 'M', 'C', 'W'};
inline constexpr std::uint16_t kArtifactVersion = 1;

struct Provenance {
  std::string config_digest;
  std::vector<std::uint64_t> seeds;
  std::string offline_strategy;
  std::string online_strategy;  // empty until online adaptation

  bool operator==(const Provenance&) const = default;
};

// A trained model as stored on disk. Parameters are single precision; a
// model rebuilt from an artifact carries exactly these values.
struct TrainedArtifact {
  ArchDescriptor arch;
  std::uint32_t split_point = 0;
  std::vector<float> theta;
  Provenance provenance;

  bool operator==(const TrainedArtifact&) const = default;
};

TrainedArtifact make_artifact(const Model& m, Provenance prov);
// Rebuilds the model for the artifact's architecture and loads theta.
Model to_model(const TrainedArtifact& a);
// Rounds parameters to single precision in place so that an in-memory model
// matches the one reloaded from its artifact.
void round_to_f32(Model& m);

std::vector<std::uint8_t> encode_artifact(const TrainedArtifact& a);
TrainedArtifact decode_artifact(const std::vector<std::uint8_t>& bytes);
void save_artifact(const std::filesystem::path& path, const TrainedArtifact& a);
TrainedArtifact load_artifact(const std::filesystem::path& path);

}  // namespace amc::nn
