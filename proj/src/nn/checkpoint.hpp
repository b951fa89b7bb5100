#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nn/network.hpp"

// Checkpoint container:
//
//   GDCECKPT <format-version>\n
//   <header-byte-count>\n
//   <JSON header>
//   <float32 little-endian blobs, concatenated>
//
// The header lists every blob with its name, shape, element count and byte
// offset relative to the first blob byte, so offsets can be recomputed from
// the header alone.
namespace gdce::nn {

inline constexpr int kCheckpointVersion = 1;

struct Blob {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct CheckpointFile {
  nlohmann::json architecture;
  std::uint64_t seed = 0;
  bool frozen = false;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<Blob> blobs;
};

void write_checkpoint(const CheckpointFile& ckpt, const std::filesystem::path& path);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

// Network parameters are stored as blobs named "layers.<i>.<param>"; `extra`
// blobs (optimizer moments etc.) follow them.
void save_checkpoint(const Network<float>& net, const std::filesystem::path& path,
                     const nlohmann::json& meta = nlohmann::json::object(),
                     const std::vector<Blob>& extra = {});

struct LoadedCheckpoint {
  Network<float> network;
  nlohmann::json meta;
  std::vector<Blob> extra;
};

// Throws DataError when the stored role differs from `expected_role`
// (unless empty), on version mismatch, or on blob/shape inconsistencies.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::string_view expected_role = {});

}  // namespace gdce::nn
