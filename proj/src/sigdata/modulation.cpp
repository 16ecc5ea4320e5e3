#include "amc/sigdata/modulation.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "amc/common/error.hpp"
#include "amc/common/rng.hpp"

namespace amc::sig {
namespace {

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "BPSK", "QPSK", "8PSK", "QAM16", "QAM64", "AM-DSB", "AM-SSB"};

std::uint32_t gray_decode(std::uint32_t g) {
  std::uint32_t b = g;
  for (std::uint32_t shift = g >> 1; shift != 0; shift >>= 1) b ^= shift;
  return b;
}

// Gray-coded PAM level for `bits` bits: index i -> 2i - (M-1).
double pam_level(std::uint32_t value, std::size_t bits) {
  const auto levels = static_cast<double>(1u << bits);
  return 2.0 * gray_decode(value) - (levels - 1.0);
}

cplx map_one(ModulationClass mod, std::uint32_t v) {
  using std::numbers::pi;
  switch (mod) {
    case ModulationClass::BPSK:
      return v == 0 ? cplx(1.0, 0.0) : cplx(-1.0, 0.0);
    case ModulationClass::QPSK: {
      const double s = 1.0 / std::sqrt(2.0);
      return {(v & 2u) ? -s : s, (v & 1u) ? -s : s};
    }
    case ModulationClass::PSK8: {
      const double phase = 2.0 * pi * gray_decode(v) / 8.0;
      return std::polar(1.0, phase);
    }
    case ModulationClass::QAM16:
      return cplx(pam_level(v >> 2, 2), pam_level(v & 3u, 2)) / std::sqrt(10.0);
    case ModulationClass::QAM64:
      return cplx(pam_level(v >> 3, 3), pam_level(v & 7u, 3)) / std::sqrt(42.0);
    default:
      throw UnsupportedOperationError("map_symbols: analog class has no constellation");
  }
}

void normalize_power(std::vector<cplx>& x) {
  const double p = mean_power(x);
  if (p <= 0.0) return;
  const double g = 1.0 / std::sqrt(p);
  for (auto& s : x) s *= g;
}

}  // namespace

std::string_view class_name(ModulationClass mod) {
  return kNames.at(static_cast<std::size_t>(mod));
}

std::optional<ModulationClass> parse_class(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<ModulationClass>(i);
  if (name == "PSK8") return ModulationClass::PSK8;
  return std::nullopt;
}

ModulationClass class_from_id(std::uint8_t id) {
  if (id >= kNumClasses) throw InputError("class id " + std::to_string(id) + " out of range");
  return static_cast<ModulationClass>(id);
}

bool is_digital(ModulationClass mod) {
  return mod != ModulationClass::AM_DSB && mod != ModulationClass::AM_SSB;
}

std::size_t bits_per_symbol(ModulationClass mod) {
  switch (mod) {
    case ModulationClass::BPSK: return 1;
    case ModulationClass::QPSK: return 2;
    case ModulationClass::PSK8: return 3;
    case ModulationClass::QAM16: return 4;
    case ModulationClass::QAM64: return 6;
    default:
      throw UnsupportedOperationError("bits_per_symbol: analog class " +
                                      std::string(class_name(mod)));
  }
}

std::vector<cplx> map_symbols(ModulationClass mod, std::span<const std::uint8_t> bits) {
  const std::size_t k = bits_per_symbol(mod);
  if (bits.size() % k != 0)
    throw InputShapeError("map_symbols: " + std::to_string(bits.size()) +
                          " bits not divisible by " + std::to_string(k));
  std::vector<cplx> out;
  out.reserve(bits.size() / k);
  for (std::size_t i = 0; i < bits.size(); i += k) {
    std::uint32_t v = 0;
    for (std::size_t b = 0; b < k; ++b) v = (v << 1) | (bits[i + b] ? 1u : 0u);
    out.push_back(map_one(mod, v));
  }
  return out;
}

std::vector<cplx> constellation(ModulationClass mod) {
  const std::size_t k = bits_per_symbol(mod);
  std::vector<cplx> pts;
  for (std::uint32_t v = 0; v < (1u << k); ++v) pts.push_back(map_one(mod, v));
  return pts;
}

std::vector<double> rrc_taps(double rolloff, std::size_t sps, std::size_t span_symbols) {
  using std::numbers::pi;
  const std::size_t n = span_symbols * sps + 1;
  const double half = static_cast<double>(n - 1) / 2.0;
  std::vector<double> h(n);
  const double b = rolloff;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - half) / static_cast<double>(sps);
    if (std::abs(t) < 1e-12) {
      h[i] = 1.0 - b + 4.0 * b / pi;
    } else if (b > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
      h[i] = b / std::sqrt(2.0) *
             ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
    } else {
      const double num = std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b));
      const double den = pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
      h[i] = num / den;
    }
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  for (double& v : h) v /= std::sqrt(energy);
  return h;
}

std::vector<cplx> synth_analog(ModulationClass mod, std::size_t n, std::uint64_t seed) {
  if (is_digital(mod))
    throw UnsupportedOperationError("synth_analog: digital class " + std::string(class_name(mod)));
  if (n < 16) throw InputShapeError("synth_analog: n must be >= 16");
  using std::numbers::pi;
  Rng rng(seed);
  std::uniform_real_distribution<double> amp(0.5, 1.0), freq(0.02, 0.1), phase(0.0, 2.0 * pi);
  std::array<double, 3> a{}, f{}, ph{};
  double amp_sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    a[i] = amp(rng);
    f[i] = freq(rng);
    ph[i] = phase(rng);
    amp_sum += a[i];
  }
  std::vector<cplx> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t);
    if (mod == ModulationClass::AM_DSB) {
      double m = 0.0;
      for (std::size_t i = 0; i < 3; ++i) m += a[i] * std::cos(2.0 * pi * f[i] * tt + ph[i]);
      out[t] = cplx(1.0 + kAmModulationIndex * m / amp_sum, 0.0);
    } else {
      // m + j*H{m}: each cosine tone becomes a positive-frequency exponential.
      cplx m{0.0, 0.0};
      for (std::size_t i = 0; i < 3; ++i) m += a[i] * std::polar(1.0, 2.0 * pi * f[i] * tt + ph[i]);
      out[t] = kAmModulationIndex * m / amp_sum;
    }
  }
  normalize_power(out);
  return out;
}

std::vector<cplx> synth_digital(ModulationClass mod, std::size_t n, std::uint64_t seed) {
  const std::size_t k = bits_per_symbol(mod);
  static const std::vector<double> taps = rrc_taps(kRrcRolloff, kSamplesPerSymbol, kRrcSpanSymbols);
  Rng rng(seed);
  const std::size_t sps = kSamplesPerSymbol;
  const std::size_t guard = taps.size();
  const std::size_t offset = uniform_index(rng, sps);
  const std::size_t total = n + 2 * guard + sps;
  const std::size_t nsym = total / sps + 1;
  std::vector<std::uint8_t> bits(nsym * k);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
  const auto symbols = map_symbols(mod, bits);

  // Upsample by zero insertion and filter; keep a window past the transient.
  std::vector<cplx> up(nsym * sps, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < nsym; ++i) up[i * sps] = symbols[i];
  std::vector<cplx> out(n);
  const std::size_t start = guard + offset;
  for (std::size_t t = 0; t < n; ++t) {
    cplx acc{0.0, 0.0};
    const std::size_t pos = start + t;
    for (std::size_t j = 0; j < taps.size(); ++j) acc += taps[j] * up[pos - j];
    out[t] = acc;
  }
  normalize_power(out);
  return out;
}

std::vector<cplx> synth_clean(ModulationClass mod, std::size_t n, std::uint64_t seed) {
  return is_digital(mod) ? synth_digital(mod, n, seed) : synth_analog(mod, n, seed);
}

double mean_power(std::span<const cplx> x) {
  if (x.empty()) return 0.0;
  double p = 0.0;
  for (const auto& s : x) p += std::norm(s);
  return p / static_cast<double>(x.size());
}

}  // namespace amc::sig
