#include "amc/modelcore/artifact.hpp"

#include "amc/common/bytes.hpp"
#include "amc/common/error.hpp"

namespace amc::nn {

TrainedArtifact make_artifact(const Model& m, Provenance prov) {
  TrainedArtifact a;
  a.arch = m.arch;
  a.split_point = static_cast<std::uint32_t>(m.split_point);
  a.theta.reserve(m.param_count());
  for (double v : m.params()) a.theta.push_back(static_cast<float>(v));
  a.provenance = std::move(prov);
  return a;
}

Model to_model(const TrainedArtifact& a) {
  Model m = make_model(a.arch, 0);
  if (m.param_count() != a.theta.size())
    throw InputShapeError("artifact: parameter count does not match architecture");
  if (m.split_point != a.split_point) throw InputError("artifact: split point does not match");
  std::vector<double> p(a.theta.begin(), a.theta.end());
  m.net.set_params(p);
  return m;
}

void round_to_f32(Model& m) {
  for (double& v : m.params()) v = static_cast<double>(static_cast<float>(v));
}

std::vector<std::uint8_t> encode_artifact(const TrainedArtifact& a) {
  ByteWriter w;
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kArtifactMagic), 4));
  w.u16(kArtifactVersion);
  w.u8(static_cast<std::uint8_t>(a.arch.family));
  w.u8(static_cast<std::uint8_t>(a.arch.activation));
  w.u16(a.arch.frame_len);
  w.u16(a.arch.num_classes);
  w.u32(a.split_point);
  w.u32(static_cast<std::uint32_t>(a.theta.size()));
  for (float v : a.theta) w.f32(v);
  w.str32(a.provenance.config_digest);
  w.u32(static_cast<std::uint32_t>(a.provenance.seeds.size()));
  for (auto s : a.provenance.seeds) w.u64(s);
  w.str32(a.provenance.offline_strategy);
  w.str32(a.provenance.online_strategy);
  return w.take();
}

TrainedArtifact decode_artifact(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_magic(kArtifactMagic);
  std::size_t at = r.pos();
  if (r.u16() != kArtifactVersion) throw FormatError("unsupported artifact version", at);
  TrainedArtifact a;
  at = r.pos();
  const auto family = r.u8();
  if (family >= kNumFamilies) throw FormatError("unknown architecture family", at);
  a.arch.family = static_cast<Family>(family);
  at = r.pos();
  const auto act = r.u8();
  if (act > 1) throw FormatError("unknown activation", at);
  a.arch.activation = static_cast<Activation>(act);
  a.arch.frame_len = r.u16();
  a.arch.num_classes = r.u16();
  a.split_point = r.u32();
  at = r.pos();
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 4 > r.remaining())
    throw FormatError("parameter payload truncated", at);
  a.theta.resize(n);
  for (auto& v : a.theta) v = r.f32();
  a.provenance.config_digest = r.str32();
  at = r.pos();
  const std::uint32_t ns = r.u32();
  if (static_cast<std::uint64_t>(ns) * 8 > r.remaining()) throw FormatError("seed list truncated", at);
  a.provenance.seeds.resize(ns);
  for (auto& s : a.provenance.seeds) s = r.u64();
  a.provenance.offline_strategy = r.str32();
  a.provenance.online_strategy = r.str32();
  r.expect_end();
  return a;
}

void save_artifact(const std::filesystem::path& path, const TrainedArtifact& a) {
  write_file_atomic(path, encode_artifact(a));
}

TrainedArtifact load_artifact(const std::filesystem::path& path) {
  return decode_artifact(read_file(path));
}

}  // namespace amc::nn
