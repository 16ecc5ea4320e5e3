#pragma once

#include <cstdint>
#include <filesystem>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "amc/attacks/attack.hpp"
#include "amc/attacks/substitute.hpp"
#include "amc/offline/strategy.hpp"
#include "amc/online/adapt.hpp"
#include "amc/sigdata/channel.hpp"
#include "json.hpp"

namespace amc::eval {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetConfig {
  std::size_t frame_len = 128;
  sig::ChannelProfile source = sig::ChannelProfile::source_default();
  sig::ChannelProfile target = sig::ChannelProfile::target_default();
  std::size_t source_per_class = 300;
  std::size_t source_test_per_class = 100;
  std::size_t target_per_class = 500;     // pilot pool + unlabeled
  std::size_t target_test_per_class = 100;
  std::size_t attacker_per_class = 300;   // attacker's own target-domain data
  std::vector<std::size_t> shots = {5, 10};
};

struct AttackConfig {
  std::vector<atk::Method> methods = {std::begin(atk::kAllMethods), std::end(atk::kAllMethods)};
  double psr_db = -10.0;
  atk::AttackSpec base;  // steps, mu, CW and PCA settings; epsilon comes from psr_db
  std::vector<nn::ArchDescriptor> substitutes;
  std::size_t holdout = 1;
  std::size_t frames_per_task = 300;
  atk::SubstituteConfig substitute_fit;

  std::vector<atk::AttackSpec> specs(std::size_t frame_len) const;
};

struct EfficiencyConfig {
  std::vector<std::size_t> shots = {1, 2, 3, 5, 7, 10, 15, 20, 30, 45};
  std::optional<double> threshold;  // default: Clean + finetune SER at 10 shots
  std::size_t reference_shots = 10;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  nn::ArchDescriptor model;
  AttackConfig attack;
  off::OfflineConfig clean;
  off::OfflineConfig adversarial;
  off::OfflineConfig meta;
  onl::OnlineConfig finetune;
  onl::OnlineConfig dann;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  EfficiencyConfig efficiency;
  std::filesystem::path out_dir;

  const off::OfflineConfig& offline(off::Strategy s) const;
  const onl::OnlineConfig& online(onl::OnlineStrategy s) const;
  // Largest pilot count any stage draws per class.
  std::size_t max_shots() const;
  // Hex SHA-256 of the canonical JSON text without the output section.
  std::string digest() const;
  nlohmann::json to_json() const;
};

// Missing keys take the defaults above; unknown keys, a wrong schema_version
// or invalid values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string sha256_hex(const std::string& text);

}  // namespace amc::eval
