// SPDX-License-Identifier: Apache-2.0
#include "author2vec/manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "author2vec/embedstore.hpp"
#include "author2vec/pretrain.hpp"

namespace a2v {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string() + " for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

nlohmann::json Manifest::to_json() const {
  return {{"schema_version", kManifestSchema},
          {"stage", stage},
          {"versions",
           {{"tool", kToolVersion},
            {"embedding_format", kEmbedVersion},
            {"checkpoint_format", kCheckpointVersion}}},
          {"config", config},
          {"inputs", inputs},
          {"upstream", upstream},
          {"outputs", outputs}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kManifestSchema) throw DataError("unsupported manifest schema");
    Manifest m;
    m.stage = j.at("stage").get<std::string>();
    m.config = j.at("config");
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.upstream = j.at("upstream").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(Manifest manifest, const std::filesystem::path& stage_dir,
                    const std::vector<std::string>& output_files) {
  manifest.outputs.clear();
  for (const auto& f : output_files) manifest.outputs[f] = sha256_file(stage_dir / f);
  const auto path = stage_dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Manifest read_manifest(const std::filesystem::path& stage_dir) {
  const auto path = stage_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw ConfigError("missing upstream manifest " + path.string() + " (run the producing command first)");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return Manifest::from_json(j);
}

std::string verify_artifact(const std::filesystem::path& stage_dir, const std::string& artifact) {
  const auto manifest = read_manifest(stage_dir);
  const auto it = manifest.outputs.find(artifact);
  if (it == manifest.outputs.end()) {
    throw ConfigError("manifest " + (stage_dir / "manifest.json").string() + " has no entry for '" + artifact + "'");
  }
  const auto path = stage_dir / artifact;
  if (!std::filesystem::exists(path)) {
    throw ConfigError("artifact '" + artifact + "' listed in " + (stage_dir / "manifest.json").string() +
                      " is missing");
  }
  const auto actual = sha256_file(path);
  if (actual != it->second) {
    throw DataError("stale artifact '" + artifact + "' in " + stage_dir.string() +
                    ": content hash no longer matches its manifest entry");
  }
  return actual;
}

}  // namespace a2v
