#pragma once

// Self-describing binary checkpoint.
//
//   bytes  field
//   8      magic "RSCCKPT\0"
//   4      format version (u32 LE), currently 1
//   4+n    config echo: u32 length + UTF-8 "key = value" lines
//   4      seed count, then per seed: u32 name length, name, u64 value
//   4      array count, then per array:
//            u32 name length, name, u32 rank, rank × u64 extents,
//            product(extents) × f32 LE
//
// Integers are little-endian regardless of host. Readers reject any other
// magic or version.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rsc/numerics/graph.hpp"

namespace rsc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::pair<std::string, Tensor>> arrays;

  const Tensor* find(const std::string& name) const;

  // Appends every parameter of `params` under "<prefix><name>".
  void add_params(const std::string& prefix, const ParameterSet<float>& params);
  // Copies stored values back into `params`; missing names or shape changes
  // raise ShapeMismatch.
  void load_params(const std::string& prefix, ParameterSet<float>& params) const;
};

// Writes to a sibling temporary file and renames it into place. Any failure
// removes the partial file and raises DoomedCheckpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

}  // namespace rsc
