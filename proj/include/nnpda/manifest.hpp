#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nnpda {

inline constexpr const char* kToolVersion = "0.1.0";

// 64-bit FNV-1a of the bytes, as "fnv1a64:<16 hex digits>".
std::string digest_bytes(std::string_view bytes);

// Everything needed to replay one training run.
struct RunManifest {
  std::string config;  // TrainingConfig::to_text() snapshot
  std::uint64_t seed = 0;
  std::string dataset_path;
  std::string dataset_digest;
  std::string model_path;
  std::string metrics_path;
  std::string tool_version = kToolVersion;
  std::size_t epochs = 0;
  std::size_t augment_rounds = 0;
  bool converged = false;

  bool operator==(const RunManifest&) const = default;

  std::string to_json() const;
  static RunManifest parse(std::string_view json);
  static RunManifest load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace nnpda
