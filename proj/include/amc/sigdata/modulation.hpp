#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace amc::sig {

using cplx = std::complex<double>;

// The seven classes shared by the source and target domains.
enum class ModulationClass : std::uint8_t { BPSK = 0, QPSK, PSK8, QAM16, QAM64, AM_DSB, AM_SSB };

inline constexpr std::size_t kNumClasses = 7;
inline constexpr std::size_t kSamplesPerSymbol = 4;
inline constexpr double kRrcRolloff = 0.35;
inline constexpr std::size_t kRrcSpanSymbols = 8;
inline constexpr double kAmModulationIndex = 0.8;

std::string_view class_name(ModulationClass mod);
std::optional<ModulationClass> parse_class(std::string_view name);
ModulationClass class_from_id(std::uint8_t id);  // throws InputError

bool is_digital(ModulationClass mod);
std::size_t bits_per_symbol(ModulationClass mod);  // throws for analog classes

// Gray-mapped, unit-average-power constellation symbols.
// Bits are consumed MSB-first per symbol.
std::vector<cplx> map_symbols(ModulationClass mod, std::span<const std::uint8_t> bits);

// The full constellation, indexed by the integer value of each bit pattern.
std::vector<cplx> constellation(ModulationClass mod);

// Root-raised-cosine taps (unit energy) for the configured pulse shape.
std::vector<double> rrc_taps(double rolloff, std::size_t sps, std::size_t span_symbols);

// Amplitude modulation of a random three-tone message. AM-DSB keeps the
// carrier (1 + m*index); AM-SSB keeps only the upper sideband (analytic
// message, suppressed carrier). Output has unit average power.
std::vector<cplx> synth_analog(ModulationClass mod, std::size_t n, std::uint64_t seed);

// Pulse-shaped random symbol stream with a random timing offset, normalized
// to unit average power.
std::vector<cplx> synth_digital(ModulationClass mod, std::size_t n, std::uint64_t seed);

// Clean (pre-channel) baseband frame of any class; unit average power.
std::vector<cplx> synth_clean(ModulationClass mod, std::size_t n, std::uint64_t seed);

double mean_power(std::span<const cplx> x);

}  // namespace amc::sig
