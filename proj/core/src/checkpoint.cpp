#include "ocan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "ocan/errors.hpp"
#include "ocan/fileio.hpp"

namespace ocan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'O', 'C', 'A', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos, const std::string& source) {
  if (bytes.size() - pos < sizeof(T)) throw CheckpointError(source + ": truncated header");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint (" + kind + ") has no '" + key + "' entry");
  return it->second;
}

double Checkpoint::get_number(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(get(key), v)) {
    throw CheckpointError("checkpoint entry '" + key + "' is not a number: '" + get(key) + "'");
  }
  return v;
}

void Checkpoint::set_number(const std::string& key, double value) { meta[key] = format_double(value); }

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["kind"] = ckpt.kind;
  manifest["meta"] = nlohmann::json::object();
  for (const auto& [k, v] : ckpt.meta) manifest["meta"][k] = v;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& e : ckpt.tensors) {
    manifest["tensors"].push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}});
  }
  const std::string json = manifest.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, json.size());
  out += json;
  for (const auto& e : ckpt.tensors) {
    const auto data = e.value.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(source + ": not an ocan checkpoint (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos, source);
  if (version != kCheckpointVersion) {
    throw CheckpointError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto json_len = take<std::uint64_t>(bytes, pos, source);
  if (bytes.size() - pos < json_len) throw CheckpointError(source + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, json_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(source + ": malformed manifest: " + e.what());
  }
  pos += json_len;

  Checkpoint ckpt;
  try {
    ckpt.kind = manifest.at("kind").get<std::string>();
    for (const auto& [k, v] : manifest.at("meta").items()) ckpt.meta[k] = v.get<std::string>();
    for (const auto& t : manifest.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Index>();
      const auto cols = t.at("cols").get<Index>();
      if (rows < 0 || cols < 0) throw CheckpointError(source + ": tensor '" + name + "' has negative shape");
      const std::size_t n = static_cast<std::size_t>(rows * cols);
      if ((bytes.size() - pos) / sizeof(double) < n) {
        throw CheckpointError(source + ": truncated data for tensor '" + name + "'");
      }
      Tensor value(rows, cols);
      std::memcpy(value.data().data(), bytes.data() + pos, n * sizeof(double));
      pos += n * sizeof(double);
      try {
        ckpt.tensors.add(name, std::move(value));
      } catch (const Error& e) {
        throw CheckpointError(source + ": " + e.what());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(source + ": malformed manifest: " + e.what());
  }
  if (pos != bytes.size()) {
    throw CheckpointError(source + ": " + std::to_string(bytes.size() - pos) + " trailing bytes");
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

Checkpoint load_checkpoint(const std::string& path, std::string_view expected_kind) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != expected_kind) {
    throw CheckpointError(path + ": expected a '" + std::string(expected_kind) + "' checkpoint, found '" +
                          ckpt.kind + "'");
  }
  return ckpt;
}

}  // namespace ocan
