#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "amc/modelcore/model.hpp"

namespace amc::atk {

enum class Method : std::uint8_t { fgsm = 0, pgd, mim, cw, pca };
inline constexpr std::size_t kNumMethods = 5;
inline constexpr Method kAllMethods[kNumMethods] = {Method::fgsm, Method::pgd, Method::mim,
                                                    Method::cw, Method::pca};

std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);

// Which collection the universal perturbation's principal direction is
// taken from.
enum class PcaSpace : std::uint8_t { gradient = 0, data };

struct AttackSpec {
  Method method = Method::fgsm;
  double epsilon = 1.0;       // L2 budget per frame
  int steps = 10;             // PGD/MIM iterations; CW optimizer steps
  double alpha = 0.0;         // sign-step size; 0 selects epsilon / 4
  double mu = 1.0;            // MIM momentum
  double c = 1.0;             // CW initial trade-off constant
  int binary_search_steps = 5;
  double kappa = 0.0;         // CW confidence margin
  double cw_lr = 0.25;        // CW Adam step, in units of epsilon / sqrt(dim)
  PcaSpace pca_space = PcaSpace::gradient;

  double step_size() const { return alpha > 0.0 ? alpha : epsilon / 4.0; }
  // Throws ConfigError on out-of-range fields.
  void validate() const;
  bool operator==(const AttackSpec&) const = default;
};

// Budget for a given perturbation-to-signal power ratio:
// ||delta||^2 = psr * frame_len * signal_power over the 2 x frame_len reals.
double epsilon_from_psr(double psr_db, std::size_t frame_len, double signal_power = 1.0);

// Radial projection of delta onto the L2 ball of radius eps, in place. The
// scale is computed from delta / max|delta|, so c * delta projects to the
// same bits for every c > 0.
void project_l2(std::span<double> delta, double eps);
double l2_norm(std::span<const double> v);

// Each attack returns perturbed frames x + delta, one per input frame, with
// ||delta||_2 <= eps.
nn::Batch fgsm(const nn::Model& sub, const nn::Batch& x, double eps, Exec exec = Exec::parallel);
nn::Batch pgd(const nn::Model& sub, const nn::Batch& x, double eps, double alpha, int steps,
              Exec exec = Exec::parallel);
// A zero input gradient skips the L1 normalization, so the accumulator only
// decays by mu on that step.
nn::Batch mim(const nn::Model& sub, const nn::Batch& x, double eps, double alpha, int steps,
              double mu, Exec exec = Exec::parallel);

struct CwResult {
  nn::Batch x_adv;
  std::vector<std::uint8_t> converged;  // 1 when some search round misclassified the frame
};
CwResult cw(const nn::Model& sub, const nn::Batch& x, const AttackSpec& spec,
            Exec exec = Exec::parallel);

// Per-step perturbations of one frame (delta after each step), for
// inspecting trajectories.
std::vector<std::vector<double>> pgd_trajectory(const nn::Model& sub, std::span<const double> x,
                                                int y, double eps, double alpha, int steps);
std::vector<std::vector<double>> mim_trajectory(const nn::Model& sub, std::span<const double> x,
                                                int y, double eps, double alpha, int steps,
                                                double mu);

// Single universal perturbation with ||v||_2 = eps along the first principal
// direction of the normalized input gradients (or of the frames), signed to
// increase the mean loss over `data`. Requires |data| >= frame dimension;
// throws NumericalError when the collection has rank 0.
std::vector<double> pca_universal(const nn::Model& sub, const nn::Batch& data, double eps,
                                  PcaSpace space = PcaSpace::gradient, Exec exec = Exec::parallel);
nn::Batch add_universal(const nn::Batch& x, std::span<const double> v);

// An attack bound to a substitute. For PCA the universal vector is computed
// once at construction from `pca_data`.
class Perturber {
 public:
  Perturber(const nn::Model& sub, const AttackSpec& spec, const nn::Batch* pca_data = nullptr,
            Exec exec = Exec::parallel);

  nn::Batch apply(const nn::Batch& x) const;
  const AttackSpec& spec() const { return spec_; }
  std::span<const double> universal() const { return universal_; }

 private:
  const nn::Model& sub_;
  AttackSpec spec_;
  Exec exec_;
  std::vector<double> universal_;
};

}  // namespace amc::atk
