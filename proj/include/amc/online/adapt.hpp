#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amc/modelcore/model.hpp"
#include "amc/modelcore/optimizer.hpp"
#include "amc/sigdata/dataset.hpp"

namespace amc::onl {

enum class OnlineStrategy : std::uint8_t { none = 0, finetune, dann };
inline constexpr OnlineStrategy kAllOnline[3] = {OnlineStrategy::none, OnlineStrategy::finetune,
                                                 OnlineStrategy::dann};

std::string_view online_name(OnlineStrategy s);
std::optional<OnlineStrategy> parse_online(std::string_view name);

struct OnlineConfig {
  OnlineStrategy strategy = OnlineStrategy::none;
  std::size_t shots = 0;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double ft_lr = 1e-3;
  std::size_t ft_steps = 100;
  std::size_t ft_batch = 0;       // 0 = all pilots every step
  std::size_t patience = 10;
  double lambda_grl = 1.0;
  std::size_t dann_epochs = 3;    // passes over the unlabeled target frames
  std::size_t dann_batch = 64;    // domain batch, half source and half target
  std::size_t pilot_batch = 32;
  double dann_lr = 1e-3;
  double disc_lr = 1e-3;
  std::size_t disc_hidden = 64;
  double warmup_fraction = 0.2;
  std::size_t collapse_window = 50;
  bool attack_adaptation_data = true;  // pilots and unlabeled frames carry the attack
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdaptLogRow {
  std::size_t step = 0;
  double source_loss = 0.0;   // L_s^y
  double pilot_loss = 0.0;    // L_t^y
  double domain_loss = 0.0;   // L^d
  double domain_accuracy = 0.0;
  double lambda = 0.0;
  double wall_seconds = 0.0;
};

struct AdaptResult {
  nn::Model model;
  std::vector<AdaptLogRow> log;
  std::vector<std::string> warnings;
  double cpu_seconds = 0.0;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
};

// Cross-entropy steps on the pilot frames with early stopping once the pilot
// loss has not improved for `patience` steps. Throws ConfigError for an empty
// pilot set (use the zero-shot path instead).
AdaptResult finetune(const nn::Model& m, const sig::DomainDataset& pilots, const OnlineConfig& cfg,
                     Exec exec = Exec::parallel);

struct DannLosses {
  double source_loss = 0.0;
  double pilot_loss = 0.0;
  double domain_loss = 0.0;
  double domain_accuracy = 0.0;
};

// Gradients of one DANN step. grad_theta receives
//   grad[L(src) + L(pilot)] + GRL_lambda(grad of L^d through G_f),
// grad_disc receives grad_{theta_d} L^d. An empty pilot batch drops L_t^y.
DannLosses dann_step_grad(const nn::Model& m, const nn::DomainDiscriminator& disc,
                          const nn::Batch& source, const nn::Batch& target,
                          const nn::Batch& pilots, double lambda, std::span<double> grad_theta,
                          std::span<double> grad_disc, Exec exec = Exec::parallel);

// Domain-adversarial adaptation with a gradient reversal layer between G_f
// and the discriminator. lambda ramps from 0 over the warm-up fraction.
AdaptResult dann_adapt(const nn::Model& m, const sig::DomainDataset& source,
                       const sig::DomainDataset& pilots, const sig::DomainDataset& unlabeled,
                       const OnlineConfig& cfg, Exec exec = Exec::parallel);

struct DomainMetrics {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Discriminator accuracy (logit > 0 predicts target) and mean binary CE on
// G_f features of a source and a target batch.
DomainMetrics discriminator_metrics(const nn::DomainDiscriminator& disc, const nn::Model& m,
                                    const nn::Batch& source, const nn::Batch& target,
                                    Exec exec = Exec::parallel);
// Same on precomputed features with explicit 0/1 domain labels.
DomainMetrics discriminator_metrics(const nn::DomainDiscriminator& disc, const nn::Batch& features,
                                    Exec exec = Exec::parallel);

// Throws InputError when any frame id appears in more than one of the sets.
void audit_disjoint(const sig::DomainDataset& pilots, const sig::DomainDataset& unlabeled,
                    const sig::DomainDataset& test);

// step,source_loss,pilot_loss,domain_loss,domain_accuracy,lambda,wall_seconds
void write_adapt_log_csv(const std::filesystem::path& path, std::span<const AdaptLogRow> log);

}  // namespace amc::onl
