#pragma once

// Binary parameter files.
//
//   "SREM" | u16 version | u16 concept | u32 tensor count
//   per tensor: u32 rank, u32 dims[rank]
//   float32 weights, little-endian, tensors in order
//   u32 CRC32 of everything before it
//
// Training runs in double precision, so a save/load round trip rounds
// every weight to float.

#include <filesystem>
#include <string>

#include "rearrange/ebm.hpp"

namespace rearrange {

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string save_checkpoint(const EBMParams& p);
// CheckpointError on a bad magic, version, concept tag, shape table, length
// or CRC.
EBMParams load_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const EBMParams& p);
EBMParams read_checkpoint(const std::filesystem::path& path);  // MissingAssetError if absent

// Every weight rounded through float, as a round trip would.
EBMParams round_to_float(const EBMParams& p);

// "<dir>/<concept name>.srem"
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, ConceptKind kind);

}  // namespace rearrange
