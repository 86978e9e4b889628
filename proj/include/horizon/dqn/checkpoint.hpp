#pragma once

// Q-network checkpoints: a JSON manifest plus a sibling binary payload of
// little-endian IEEE-754 doubles.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "horizon/dqn/features.hpp"
#include "horizon/dqn/mlp.hpp"
#include "horizon/error.hpp"
#include "horizon/io.hpp"

namespace horizon::dqn {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "horizon-qnet";

// Malformed or mismatched checkpoint; `field` names the offending entry.
class CheckpointError : public IoError {
 public:
  CheckpointError(const std::string& what, std::string field) : IoError(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct Checkpoint {
  Mlp net;
  nlohmann::json meta = nlohmann::json::object();
};

inline std::filesystem::path payload_path(const std::filesystem::path& manifest) {
  std::filesystem::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

inline std::string encode_doubles(const std::vector<double>& values) {
  std::string out(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int k = 0; k < 8; ++k) out[i * 8 + static_cast<std::size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xFF);
  }
  return out;
}

inline std::vector<double> decode_doubles(const std::string& bytes) {
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(k)])) << (8 * k);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

inline void save_checkpoint(const std::filesystem::path& manifest_path, const Mlp& net,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  const std::string payload = encode_doubles(net.params());
  const std::filesystem::path bin = payload_path(manifest_path);
  nlohmann::json m;
  m["format"] = kCheckpointFormat;
  m["version"] = kCheckpointVersion;
  m["layer_sizes"] = net.sizes();
  m["activation"] = "relu";
  m["num_params"] = net.num_params();
  m["feature_schema_hash"] = hex64(feature_schema_hash());
  m["payload"] = bin.filename().string();
  m["payload_bytes"] = payload.size();
  m["payload_fnv1a"] = hex64(fnv1a(payload));
  m["meta"] = meta;
  write_file_atomic(bin, payload);
  write_file_atomic(manifest_path, m.dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  const std::string text = read_file(manifest_path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint manifest is not valid JSON: " + std::string(e.what()), "manifest");
  }
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!m.is_object() || !m.contains(key)) throw CheckpointError(std::string("checkpoint manifest lacks '") + key + "'", key);
    return m.at(key);
  };
  try {
    if (require("format").get<std::string>() != kCheckpointFormat) {
      throw CheckpointError("unrecognized checkpoint format", "format");
    }
    if (require("version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version", "version");
    }
    if (require("feature_schema_hash").get<std::string>() != hex64(feature_schema_hash())) {
      throw CheckpointError("checkpoint was trained on a different feature schema", "feature_schema_hash");
    }
    const auto sizes = require("layer_sizes").get<std::vector<int>>();
    Mlp net;
    try {
      net = Mlp(sizes);
    } catch (const UsageError&) {
      throw CheckpointError("invalid layer sizes in checkpoint", "layer_sizes");
    }
    if (require("num_params").get<std::size_t>() != net.num_params()) {
      throw CheckpointError("parameter count does not match layer sizes", "num_params");
    }
    const std::filesystem::path bin = manifest_path.parent_path() / require("payload").get<std::string>();
    const std::string payload = read_file(bin);
    if (payload.size() != require("payload_bytes").get<std::size_t>() || payload.size() != net.num_params() * 8) {
      throw CheckpointError("checkpoint payload has the wrong size", "payload_bytes");
    }
    if (hex64(fnv1a(payload)) != require("payload_fnv1a").get<std::string>()) {
      throw CheckpointError("checkpoint payload checksum mismatch", "payload_fnv1a");
    }
    net.params() = decode_doubles(payload);
    Checkpoint cp{std::move(net), m.value("meta", nlohmann::json::object())};
    return cp;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest: " + std::string(e.what()), "manifest");
  }
}

}  // namespace horizon::dqn
