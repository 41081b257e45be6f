#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "bexrl/ad/tensor.hpp"

namespace bexrl::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian container: "BXRL", u32 version, u64 metadata length, metadata
// JSON bytes, u32 tensor count, then per tensor: u32 name length, name bytes,
// u32 rank, u64 dims[rank], f64 payload.
struct Checkpoint {
  nlohmann::ordered_json metadata;
  std::map<std::string, Tensor> tensors;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace bexrl::ad
