#include "amc/sigdata/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "amc/common/bytes.hpp"
#include "amc/common/error.hpp"

namespace amc::sig {

std::vector<std::uint8_t> encode_dataset(const DomainDataset& ds) {
  ds.validate();
  ByteWriter w;
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kDatasetMagic), 4));
  w.u16(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.frames.size()));
  w.u16(ds.frame_len);
  w.u8(static_cast<std::uint8_t>(ds.role));
  w.u8(static_cast<std::uint8_t>(ds.domain));
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    const auto& f = ds.frames[i];
    w.u32(f.frame_id);
    w.u8(static_cast<std::uint8_t>(f.label));
    w.u8(ds.label_mask[i]);
    w.f32(f.snr_db);
    for (float v : f.iq) w.f32(v);
  }
  w.str32(ds.provenance);
  return w.take();
}

DomainDataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  r.expect_magic(kDatasetMagic);
  const std::size_t version_at = r.pos();
  if (r.u16() != kDatasetVersion) throw FormatError("unsupported dataset version", version_at);
  const std::uint32_t count = r.u32();
  DomainDataset ds;
  ds.frame_len = r.u16();
  const std::size_t role_at = r.pos();
  const std::uint8_t role = r.u8();
  if (role > static_cast<std::uint8_t>(Role::target_test)) throw FormatError("bad role", role_at);
  ds.role = static_cast<Role>(role);
  const std::size_t domain_at = r.pos();
  const std::uint8_t domain = r.u8();
  if (domain > 1) throw FormatError("bad domain", domain_at);
  ds.domain = static_cast<Domain>(domain);

  const std::size_t record = 4 + 1 + 1 + 4 + 8u * ds.frame_len;
  if (static_cast<std::uint64_t>(count) * record > r.remaining())
    throw FormatError("truncated frame payload", r.pos());
  ds.frames.resize(count);
  ds.label_mask.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& f = ds.frames[i];
    f.frame_id = r.u32();
    const std::size_t class_at = r.pos();
    const std::uint8_t cls = r.u8();
    if (cls >= kNumClasses) throw FormatError("class id out of range", class_at);
    f.label = static_cast<ModulationClass>(cls);
    ds.label_mask[i] = r.u8();
    f.snr_db = r.f32();
    f.domain = ds.domain;
    f.iq.resize(2u * ds.frame_len);
    for (auto& v : f.iq) v = r.f32();
  }
  ds.provenance = r.str32();
  r.expect_end();
  return ds;
}

void save_dataset(const DomainDataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, encode_dataset(ds));
}

DomainDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(read_file(path));
}

DomainDataset import_raw(const std::filesystem::path& iq_path,
                         const std::filesystem::path& labels_path, std::size_t frame_len,
                         Domain domain, Role role) {
  const auto raw = read_file(iq_path);
  const std::size_t frame_bytes = frame_len * 2 * sizeof(float);
  if (frame_len == 0 || raw.size() % frame_bytes != 0)
    throw FormatError("raw IQ size is not a multiple of the frame size", raw.size());
  const std::size_t count = raw.size() / frame_bytes;

  std::ifstream labels(labels_path);
  if (!labels) throw IoError("cannot open " + labels_path.string());
  DomainDataset ds;
  ds.role = role;
  ds.domain = domain;
  ds.frame_len = static_cast<std::uint16_t>(frame_len);
  ByteReader r(raw);
  std::string line;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(labels, line)) throw InputError("label file has fewer lines than frames");
    std::istringstream ls(line);
    std::string name;
    double snr = 0.0;
    if (!(ls >> name >> snr)) throw InputError("malformed label line " + std::to_string(i + 1));
    const auto cls = parse_class(name);
    if (!cls) throw InputError("unknown class '" + name + "' on line " + std::to_string(i + 1));
    IQFrame f;
    f.label = *cls;
    f.snr_db = static_cast<float>(snr);
    f.domain = domain;
    f.frame_id = static_cast<std::uint32_t>(i);
    f.iq.resize(2 * frame_len);
    for (std::size_t t = 0; t < frame_len; ++t) {
      f.iq[t] = r.f32();
      f.iq[frame_len + t] = r.f32();
    }
    ds.frames.push_back(std::move(f));
  }
  ds.label_mask.assign(count, role == Role::target_unlabeled ? 0 : 1);
  return ds;
}

}  // namespace amc::sig
