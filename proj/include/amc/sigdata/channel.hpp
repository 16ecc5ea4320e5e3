#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amc/sigdata/modulation.hpp"

namespace amc::sig {

enum class Fading : std::uint8_t { none = 0, rayleigh, rician };

// Impairments applied to a clean frame. Construct through make() so the
// invariants hold: non-empty, strictly increasing snr_grid; tap_count == 1
// when fading is none.
struct ChannelProfile {
  std::vector<double> snr_grid;
  Fading fading = Fading::none;
  double rician_k = 0.0;    // linear
  double max_cfo = 0.0;     // fraction of the sample rate
  double max_phase = 0.0;   // radians
  unsigned tap_count = 1;

  static ChannelProfile make(std::vector<double> snr_grid, Fading fading, double rician_k,
                             double max_cfo, double max_phase, unsigned tap_count);

  // AWGN only.
  static ChannelProfile source_default();
  // Rician k=4 over 3 taps, CFO up to 1%, uniformly random phase.
  static ChannelProfile target_default();

  void validate() const;
  bool operator==(const ChannelProfile&) const = default;
};

// Applies, in order: multipath fading, carrier frequency offset, phase
// offset, complex AWGN. Noise power is set relative to the faded signal
// power, sigma^2 = P_faded * 10^(-snr_db/10). snr_db = +inf adds no noise.
std::vector<cplx> apply_channel(std::span<const cplx> signal, const ChannelProfile& profile,
                                double snr_db, std::uint64_t seed);

std::vector<double> default_snr_grid();

}  // namespace amc::sig
