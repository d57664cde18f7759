// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary post-embedding store ("AV1EMBED") and a deterministic stub embedder.
//
// Layout, all integers little-endian:
//   magic "AV1EMBED" | u32 version | u32 dim | u64 author_count
//   author_count x { u16 id_len | id bytes | u64 offset | u32 rows }
//   payload: one contiguous row-major f32 block per author, at `offset`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "author2vec/common.hpp"
#include "author2vec/corpus.hpp"

namespace a2v {

inline constexpr std::string_view kEmbedMagic = "AV1EMBED";
inline constexpr std::uint32_t kEmbedVersion = 1;

struct PostEmbeddingMatrix {
  std::string author_id;
  RowMatrixF values;  ///< rows = posts (chronological), cols = dim

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

class BadMagicError : public DataError {
 public:
  using DataError::DataError;
};
class TruncatedFileError : public DataError {
 public:
  TruncatedFileError(const std::string& what, std::string author) : DataError(what), author_(std::move(author)) {}
  const std::string& author() const noexcept { return author_; }

 private:
  std::string author_;
};
class UnknownAuthorError : public DataError {
 public:
  using DataError::DataError;
};
class NonFiniteValueError : public DataError {
 public:
  using DataError::DataError;
};

void write_embeddings(std::span<const PostEmbeddingMatrix> records, const std::filesystem::path& path);

struct EmbeddingIndexEntry {
  std::string author_id;
  std::uint64_t offset = 0;
  std::uint32_t rows = 0;
};

/// Parses the header and index on open; author blocks are loaded on demand
/// with one seek each. Read-only after construction.
class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::filesystem::path& path);

  std::uint32_t dim() const noexcept { return dim_; }
  std::uint32_t version() const noexcept { return version_; }
  const std::vector<EmbeddingIndexEntry>& index() const noexcept { return index_; }
  bool contains(const std::string& author_id) const { return by_id_.count(author_id) != 0; }

  PostEmbeddingMatrix read(const std::string& author_id) const;
  std::vector<PostEmbeddingMatrix> read_all() const;

 private:
  PostEmbeddingMatrix read_entry(const EmbeddingIndexEntry& entry) const;

  std::filesystem::path path_;
  std::uint32_t version_ = 0;
  std::uint32_t dim_ = 0;
  std::uint64_t file_size_ = 0;
  std::vector<EmbeddingIndexEntry> index_;
  std::map<std::string, std::size_t> by_id_;
};

/// Reads every author, or only `authors` when given (in the order requested).
std::vector<PostEmbeddingMatrix> read_embeddings(const std::filesystem::path& path,
                                                 const std::optional<std::vector<std::string>>& authors = {});

/// Attribute planted into author signatures, for synthetic experiments with
/// known ground truth: authors whose label equals `positive_value` are shifted
/// by +strength along a fixed random axis, all others by -strength.
struct PlantedAttribute {
  std::string attribute;
  std::string positive_value = "1";
  double strength = 0.0;
};

struct StubEmbedderConfig {
  std::size_t dim = 3072;
  std::uint64_t seed = 0;
  double author_weight = 0.6;
  double content_weight = 0.8;
  std::optional<PlantedAttribute> plant;
};

/// Test double for the contextual post encoder. A post's vector mixes the
/// author's signature direction with a content direction built from the
/// hashed word multiset, then is normalized to unit length.
class StubEmbedder {
 public:
  explicit StubEmbedder(StubEmbedderConfig config);

  const StubEmbedderConfig& config() const noexcept { return config_; }

  /// `labels` only matters when a planted attribute is configured.
  Eigen::VectorXf embed(const Post& post, const std::map<std::string, std::string>& labels = {}) const;
  PostEmbeddingMatrix embed_author(const AuthorRecord& author) const;

  Eigen::VectorXd author_signature(const std::string& author_id,
                                   const std::map<std::string, std::string>& labels = {}) const;

 private:
  Eigen::VectorXd hashed_direction(std::uint64_t key) const;

  StubEmbedderConfig config_;
  Eigen::VectorXd plant_axis_;
};

/// Convenience wrapper over StubEmbedder for a single call.
Eigen::VectorXf stub_embed(const Post& post, std::size_t dim, std::uint64_t seed);

}  // namespace a2v
