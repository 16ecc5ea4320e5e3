#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "amc/modelcore/model.hpp"
#include "amc/modelcore/objective.hpp"

namespace amc::off {

enum class MetaAlgo : std::uint8_t { maml = 0, fomaml, reptile };

std::string_view meta_algo_name(MetaAlgo a);
std::optional<MetaAlgo> parse_meta_algo(std::string_view name);

struct MetaStep {
  std::vector<double> direction;  // the outer update is theta -= beta * direction
  std::vector<double> adapted;    // theta' after the inner loop
  double support_loss = 0.0;      // loss of the first inner objective at theta
  double query_loss = 0.0;        // query loss at theta'
  bool diverged = false;          // a non-finite inner loss or iterate was met
};

// Runs the inner loop theta_{i+1} = theta_i - alpha * grad S_i(theta_i) over
// the given support objectives (one per inner step; an empty list means no
// adaptation) and returns the meta update direction:
//   maml    - exact gradient of Q(theta_K) w.r.t. theta, obtained by the
//             backward recursion g <- g - alpha * H_{S_i}(theta_i) g;
//   fomaml  - grad Q(theta_K);
//   reptile - theta - theta_K.
MetaStep meta_gradient(MetaAlgo algo, std::span<const double> theta,
                       std::span<const nn::Objective* const> support,
                       const nn::Objective& query, double alpha);

// Full-batch gradient steps on `support` from a copy of `m`.
nn::Model adapt_inner(const nn::Model& m, const nn::Batch& support, double alpha,
                      std::size_t inner_steps, Exec exec = Exec::parallel);

}  // namespace amc::off
