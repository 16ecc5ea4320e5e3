#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amc/sigdata/dataset.hpp"

namespace amc::sig {

// Dataset file layout (little-endian):
//
//   0   char[4]  magic "AMCF"
//   4   u16      version (1)
//   6   u32      frame count N
//   10  u16      frame_len L
//   12  u8       role
//   13  u8       domain
//   14  N records:
//         u32      frame_id
//         u8       class id
//         u8       label mask (1 = labeled)
//         f32      snr_db
//         f32[2L]  IQ payload, row-major (I row then Q row)
//   ..  u32      provenance length P, then P bytes of UTF-8 JSON
inline constexpr char kDatasetMagic[4] = {'A', 'M', 'C', 'F'};
inline constexpr std::uint16_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(const DomainDataset& ds);
DomainDataset decode_dataset(const std::vector<std::uint8_t>& bytes);

void save_dataset(const DomainDataset& ds, const std::filesystem::path& path);
DomainDataset load_dataset(const std::filesystem::path& path);

// Imports externally exported frames. `iq_path` holds N*frame_len
// interleaved little-endian f32 pairs (I, Q). `labels_path` is a text file
// with one line per frame: "<class name> <snr_db>", where class name is one
// of BPSK QPSK 8PSK QAM16 QAM64 AM-DSB AM-SSB.
DomainDataset import_raw(const std::filesystem::path& iq_path,
                         const std::filesystem::path& labels_path, std::size_t frame_len,
                         Domain domain, Role role);

}  // namespace amc::sig
