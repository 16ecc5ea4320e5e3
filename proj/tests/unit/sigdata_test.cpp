#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include "amc/common/error.hpp"
#include "amc/sigdata/channel.hpp"
#include "amc/sigdata/dataset.hpp"
#include "amc/sigdata/dataset_io.hpp"
#include "amc/sigdata/modulation.hpp"

using namespace amc;
using namespace amc::sig;

namespace {

std::vector<cplx> dft(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / double(n));
    out[k] = acc;
  }
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "amc_sigdata_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(MapSymbols, BpskAntipodal) {
  const std::vector<std::uint8_t> bits{0, 1};
  const auto s = map_symbols(ModulationClass::BPSK, bits);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], cplx(1.0, 0.0));
  EXPECT_EQ(s[1], cplx(-1.0, 0.0));
}

TEST(MapSymbols, QpskGrayCorner) {
  const std::vector<std::uint8_t> bits{0, 0};
  const auto s = map_symbols(ModulationClass::QPSK, bits);
  EXPECT_NEAR(s[0].real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s[0].imag(), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(MapSymbols, Qam16EnumeratedPower) {
  // Independent oracle: the 16 points of the square grid {-3,-1,1,3}^2
  // have mean power 10.
  double grid_power = 0.0;
  for (int i : {-3, -1, 1, 3})
    for (int q : {-3, -1, 1, 3}) grid_power += i * i + q * q;
  grid_power /= 16.0;
  EXPECT_DOUBLE_EQ(grid_power, 10.0);

  std::vector<std::uint8_t> bits;
  for (int v = 0; v < 16; ++v)
    for (int b = 3; b >= 0; --b) bits.push_back((v >> b) & 1);
  const auto s = map_symbols(ModulationClass::QAM16, bits);
  ASSERT_EQ(s.size(), 16u);
  std::set<std::pair<double, double>> distinct;
  for (auto z : s) distinct.insert({std::round(z.real() * std::sqrt(grid_power)),
                                    std::round(z.imag() * std::sqrt(grid_power))});
  EXPECT_EQ(distinct.size(), 16u);
  EXPECT_NEAR(mean_power(s), 1.0, 1e-9);
}

TEST(MapSymbols, GrayNeighborsDifferByOneBit) {
  for (auto mod : {ModulationClass::PSK8, ModulationClass::QAM16, ModulationClass::QAM64}) {
    const std::size_t k = bits_per_symbol(mod);
    const std::size_t m = std::size_t{1} << k;
    std::vector<cplx> pts(m);
    for (std::size_t v = 0; v < m; ++v) {
      std::vector<std::uint8_t> bits;
      for (std::size_t b = k; b-- > 0;) bits.push_back((v >> b) & 1);
      pts[v] = map_symbols(mod, bits)[0];
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) dmin = std::min(dmin, std::abs(pts[a] - pts[b]));
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        if (std::abs(pts[a] - pts[b]) < dmin * 1.0001)
          EXPECT_EQ(std::popcount(a ^ b), 1) << class_name(mod) << " " << a << " " << b;
  }
}

TEST(MapSymbols, ConstellationPowerAllDigital) {
  for (auto mod : {ModulationClass::BPSK, ModulationClass::QPSK, ModulationClass::PSK8,
                   ModulationClass::QAM16, ModulationClass::QAM64})
    EXPECT_NEAR(mean_power(constellation(mod)), 1.0, 1e-9) << class_name(mod);
}

TEST(MapSymbols, Errors) {
  const std::vector<std::uint8_t> three{0, 1, 0};
  EXPECT_THROW(map_symbols(ModulationClass::QPSK, three), InputShapeError);
  EXPECT_THROW(map_symbols(ModulationClass::AM_DSB, three), UnsupportedOperationError);
}

TEST(SynthAnalog, Deterministic) {
  EXPECT_EQ(synth_analog(ModulationClass::AM_DSB, 128, 7), synth_analog(ModulationClass::AM_DSB, 128, 7));
  EXPECT_NE(synth_analog(ModulationClass::AM_DSB, 128, 7), synth_analog(ModulationClass::AM_DSB, 128, 8));
}

TEST(SynthAnalog, SsbOneSided) {
  const auto x = synth_analog(ModulationClass::AM_SSB, 1024, 3);
  const auto spec = dft(x);
  double neg = 0.0, total = 0.0;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double e = std::norm(spec[k]);
    total += e;
    if (k > spec.size() / 2) neg += e;
  }
  EXPECT_LE(neg, 0.01 * total);
}

TEST(SynthAnalog, DsbUnitPower) {
  double acc = 0.0;
  for (std::uint64_t s = 0; s < 1000; ++s) acc += mean_power(synth_analog(ModulationClass::AM_DSB, 128, s));
  EXPECT_NEAR(acc / 1000.0, 1.0, 0.05);
}

TEST(SynthAnalog, Errors) {
  EXPECT_THROW(synth_analog(ModulationClass::QPSK, 128, 0), UnsupportedOperationError);
  EXPECT_THROW(synth_analog(ModulationClass::AM_DSB, 8, 0), InputShapeError);
}

TEST(SynthClean, EveryClassUnitPower) {
  for (std::uint8_t c = 0; c < kNumClasses; ++c)
    EXPECT_NEAR(mean_power(synth_clean(class_from_id(c), 128, 11)), 1.0, 1e-6);
}

TEST(Channel, IdentityAtInfiniteSnr) {
  const auto x = synth_clean(ModulationClass::QPSK, 128, 1);
  const auto prof = ChannelProfile::make({0.0}, Fading::none, 0.0, 0.0, 0.0, 1);
  EXPECT_EQ(apply_channel(x, prof, std::numeric_limits<double>::infinity(), 5), x);
}

TEST(Channel, NoiseVarianceAtZeroDb) {
  const std::vector<cplx> zero_free(4096, cplx(1.0, 0.0));
  const auto prof = ChannelProfile::source_default();
  const auto y = apply_channel(zero_free, prof, 0.0, 9);
  double var = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) var += std::norm(y[i] - zero_free[i]);
  EXPECT_NEAR(var / double(y.size()), 1.0, 0.06);
}

TEST(Channel, SnrCalibration) {
  for (double snr : {-10.0, 0.0, 10.0}) {
    double sig = 0.0, noise = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const auto x = synth_clean(ModulationClass::QAM16, 128, s);
      const auto y = apply_channel(x, ChannelProfile::source_default(), snr, 1000 + s);
      for (std::size_t i = 0; i < x.size(); ++i) {
        sig += std::norm(x[i]);
        noise += std::norm(y[i] - x[i]);
      }
    }
    EXPECT_NEAR(10.0 * std::log10(sig / noise), snr, 0.2);
  }
}

TEST(Channel, ProfileValidation) {
  EXPECT_THROW(ChannelProfile::make({}, Fading::none, 0, 0, 0, 1), ConfigError);
  EXPECT_THROW(ChannelProfile::make({2.0, 1.0}, Fading::none, 0, 0, 0, 1), ConfigError);
  EXPECT_EQ(ChannelProfile::make({0.0}, Fading::none, 0, 0, 0, 4).tap_count, 1u);
}

TEST(BuildDomain, SourceBalanced) {
  DomainSpec spec{ChannelProfile::source_default(), Domain::source, 128, 100, 20, 0};
  const auto sets = build_domain(spec, 1);
  ASSERT_EQ(sets.size(), 2u);
  EXPECT_EQ(sets[0].size(), 700u);
  for (auto c : sets[0].class_counts()) EXPECT_EQ(c, 100u);
  EXPECT_EQ(sets[0].role, Role::source_train);
  EXPECT_EQ(sets[1].role, Role::source_test);
}

TEST(BuildDomain, SnrStratified) {
  DomainSpec spec{ChannelProfile::source_default(), Domain::source, 128, 70, 7, 0};
  const auto sets = build_domain(spec, 2);
  std::map<float, std::size_t> per_snr;
  for (const auto& f : sets[0].frames) ++per_snr[f.snr_db];
  EXPECT_EQ(per_snr.size(), default_snr_grid().size());
  for (auto& [snr, n] : per_snr) EXPECT_EQ(n, 70u);
}

TEST(BuildDomain, TargetPilotShots) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 100, 10, 5};
  const auto sets = build_domain(spec, 3);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[0].size(), 35u);
  for (auto c : sets[0].class_counts()) EXPECT_EQ(c, 5u);
  EXPECT_TRUE(sets[1].labeled_idx().empty());
  EXPECT_EQ(sets[1].unlabeled_idx().size(), sets[1].size());

  std::set<std::uint32_t> pilot_ids, other_ids;
  for (auto& f : sets[0].frames) pilot_ids.insert(f.frame_id);
  for (auto& f : sets[1].frames) other_ids.insert(f.frame_id);
  for (auto& f : sets[2].frames) other_ids.insert(f.frame_id);
  for (auto id : pilot_ids) EXPECT_FALSE(other_ids.count(id));
}

TEST(BuildDomain, ZeroShots) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 20, 5, 0};
  const auto sets = build_domain(spec, 4);
  EXPECT_TRUE(sets[0].empty());
  EXPECT_EQ(sets[1].size(), 140u);
}

TEST(BuildDomain, Errors) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 10, 5, 11};
  EXPECT_THROW(build_domain(spec, 0), ConfigError);
  spec.shots = 5;  // 35 pilots vs 35 unlabeled exceeds the 10% ceiling
  EXPECT_THROW(build_domain(spec, 0), ConfigError);
}

TEST(BuildDomain, SerialMatchesParallel) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 40, 10, 2};
  EXPECT_EQ(build_domain(spec, 9, Exec::serial), build_domain(spec, 9, Exec::parallel));
}

TEST(TakeShots, NestedPrefix) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 100, 5, 8};
  const auto pilot = build_domain(spec, 5)[0];
  const auto three = take_shots(pilot, 3);
  const auto five = take_shots(pilot, 5);
  EXPECT_EQ(three.size(), 21u);
  for (const auto& f : three.frames)
    EXPECT_NE(std::find(five.frames.begin(), five.frames.end(), f), five.frames.end());
}

TEST(DatasetIo, RoundTrip) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 30, 5, 2};
  const auto sets = build_domain(spec, 6);
  for (const auto& ds : sets) {
    const auto p = temp_path(std::string(role_name(ds.role)) + ".amcf");
    save_dataset(ds, p);
    EXPECT_EQ(load_dataset(p), ds);
  }
}

TEST(DatasetIo, EmptyDataset) {
  DomainDataset ds;
  const auto p = temp_path("empty.amcf");
  save_dataset(ds, p);
  EXPECT_EQ(load_dataset(p), ds);
}

TEST(DatasetIo, CorruptHeader) {
  DomainSpec spec{ChannelProfile::source_default(), Domain::source, 128, 2, 1, 0};
  auto bytes = encode_dataset(build_domain(spec, 7)[0]);
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_dataset(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  bad = bytes;
  bad[4] = 99;
  EXPECT_THROW(decode_dataset(bad), FormatError);
  bad = bytes;
  bad.resize(bad.size() / 2);
  EXPECT_THROW(decode_dataset(bad), FormatError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_dataset(bad), FormatError);
}

TEST(DatasetIo, Deterministic) {
  DomainSpec spec{ChannelProfile::target_default(), Domain::target, 128, 30, 5, 2};
  EXPECT_EQ(encode_dataset(build_domain(spec, 8)[2]), encode_dataset(build_domain(spec, 8)[2]));
}
