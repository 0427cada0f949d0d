#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "ocan/params.hpp"

namespace ocan {

// Binary container:
//   "OCANCKPT" | u32 version | u64 manifest bytes | JSON manifest | tensor data
// The manifest lists kind, string metadata and (name, rows, cols) for every
// tensor; data follows in that order as little-endian IEEE doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;
  std::map<std::string, std::string> meta;
  ParamGroup tensors;

  const std::string& get(const std::string& key) const;
  double get_number(const std::string& key) const;
  void set(const std::string& key, std::string value) { meta[key] = std::move(value); }
  void set_number(const std::string& key, double value);
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
// Loads and checks the kind; CheckpointError names both kinds on mismatch.
Checkpoint load_checkpoint(const std::string& path, std::string_view expected_kind);

}  // namespace ocan
