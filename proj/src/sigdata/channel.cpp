#include "amc/sigdata/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"

namespace amc::sig {

ChannelProfile ChannelProfile::make(std::vector<double> snr_grid, Fading fading, double rician_k,
                                    double max_cfo, double max_phase, unsigned tap_count) {
  ChannelProfile p;
  p.snr_grid = std::move(snr_grid);
  p.fading = fading;
  p.rician_k = rician_k;
  p.max_cfo = max_cfo;
  p.max_phase = max_phase;
  p.tap_count = fading == Fading::none ? 1u : tap_count;
  p.validate();
  return p;
}

std::vector<double> default_snr_grid() { return {-6.0, -2.0, 2.0, 6.0, 10.0, 14.0, 18.0}; }

ChannelProfile ChannelProfile::source_default() {
  return make(default_snr_grid(), Fading::none, 0.0, 0.0, 0.0, 1);
}

ChannelProfile ChannelProfile::target_default() {
  return make(default_snr_grid(), Fading::rician, 4.0, 0.01, std::numbers::pi, 3);
}

void ChannelProfile::validate() const {
  if (snr_grid.empty()) throw ConfigError("channel profile: snr_grid must be non-empty");
  for (std::size_t i = 1; i < snr_grid.size(); ++i)
    if (!(snr_grid[i] > snr_grid[i - 1]))
      throw ConfigError("channel profile: snr_grid must be strictly increasing");
  if (tap_count == 0) throw ConfigError("channel profile: tap_count must be positive");
  if (fading == Fading::none && tap_count != 1)
    throw ConfigError("channel profile: fading=none requires tap_count=1");
  if (rician_k < 0.0 || max_cfo < 0.0 || max_phase < 0.0)
    throw ConfigError("channel profile: k, max_cfo and max_phase must be non-negative");
}

std::vector<cplx> apply_channel(std::span<const cplx> signal, const ChannelProfile& profile,
                                double snr_db, std::uint64_t seed) {
  using std::numbers::pi;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t n = signal.size();
  std::vector<cplx> y(signal.begin(), signal.end());

  if (profile.fading != Fading::none) {
    const unsigned taps = profile.tap_count;
    std::vector<double> pdp(taps);
    double total = 0.0;
    for (unsigned k = 0; k < taps; ++k) total += pdp[k] = std::exp(-static_cast<double>(k));
    std::vector<cplx> h(taps);
    for (unsigned k = 0; k < taps; ++k) {
      const cplx scatter(gauss(rng) / std::sqrt(2.0), gauss(rng) / std::sqrt(2.0));
      cplx tap = scatter;
      if (profile.fading == Fading::rician && k == 0) {
        const double kk = profile.rician_k;
        const double los_phase = pi * unit(rng);
        tap = std::sqrt(kk / (kk + 1.0)) * std::polar(1.0, los_phase) +
              std::sqrt(1.0 / (kk + 1.0)) * scatter;
      }
      h[k] = std::sqrt(pdp[k] / total) * tap;
    }
    for (std::size_t t = 0; t < n; ++t) {
      cplx acc{0.0, 0.0};
      for (unsigned k = 0; k < taps && k <= t; ++k) acc += h[k] * signal[t - k];
      y[t] = acc;
    }
  }

  const double cfo = profile.max_cfo * unit(rng);
  const double phase = profile.max_phase * unit(rng);
  if (cfo != 0.0 || phase != 0.0) {
    for (std::size_t t = 0; t < n; ++t)
      y[t] *= std::polar(1.0, 2.0 * pi * cfo * static_cast<double>(t) + phase);
  }

  if (std::isfinite(snr_db)) {
    const double sigma2 = mean_power(y) * std::pow(10.0, -snr_db / 10.0);
    const double s = std::sqrt(sigma2 / 2.0);
    for (auto& v : y) v += cplx(s * gauss(rng), s * gauss(rng));
  }
  return y;
}

}  // namespace amc::sig
