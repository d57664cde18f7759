// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-stage provenance: every output directory carries manifest.json with
// content hashes of what the stage read and wrote, plus its config snapshot.

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "author2vec/common.hpp"

namespace a2v {

inline constexpr int kManifestSchema = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_file(const std::filesystem::path& path);

struct Manifest {
  std::string stage;
  nlohmann::json config;
  /// Keys are artifact names (relative to the run root when inside it).
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;  ///< relative to the stage directory
  std::map<std::string, std::string> upstream;  ///< stage name -> hash of its manifest.json

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
};

/// Hashes every listed output file relative to `stage_dir` and writes
/// stage_dir/manifest.json. Output is byte-stable for identical inputs.
void write_manifest(Manifest manifest, const std::filesystem::path& stage_dir,
                    const std::vector<std::string>& output_files);
Manifest read_manifest(const std::filesystem::path& stage_dir);

/// Checks that `stage_dir/artifact` exists, is listed in the stage manifest,
/// and still has the recorded hash. Returns the hash.
/// Missing manifest or entry -> ConfigError; changed content -> DataError.
std::string verify_artifact(const std::filesystem::path& stage_dir, const std::string& artifact);

}  // namespace a2v
