// SPDX-License-Identifier: Apache-2.0
#include "author2vec/embedstore.hpp"

#include <cmath>
#include <random>
#include <set>

#include "author2vec/binary_io.hpp"

namespace a2v {

namespace {

constexpr std::uint64_t kHeaderFixedBytes = 8 + 4 + 4 + 8;

std::uint64_t index_bytes(std::span<const PostEmbeddingMatrix> records) {
  std::uint64_t n = 0;
  for (const auto& r : records) n += 2 + r.author_id.size() + 8 + 4;
  return n;
}

}  // namespace

void write_embeddings(std::span<const PostEmbeddingMatrix> records, const std::filesystem::path& path) {
  const std::size_t dim = records.empty() ? 0 : records.front().dim();
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.dim() != dim) {
      throw DataError("mixed embedding widths: " + std::to_string(dim) + " and " + std::to_string(r.dim()) +
                      " (author " + r.author_id + ")");
    }
    if (!seen.insert(r.author_id).second) throw DataError("duplicate author id in embedding set: " + r.author_id);
    if (r.rows() == 0) throw DataError("author " + r.author_id + " has no embedding rows");
    if (!r.values.allFinite()) throw NonFiniteValueError("non-finite embedding value for author " + r.author_id);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write embeddings " + path.string());
  binio::put_magic(out, kEmbedMagic);
  binio::put_u32(out, kEmbedVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(dim));
  binio::put_u64(out, records.size());

  std::uint64_t offset = kHeaderFixedBytes + index_bytes(records);
  for (const auto& r : records) {
    binio::put_string(out, r.author_id);
    binio::put_u64(out, offset);
    binio::put_u32(out, static_cast<std::uint32_t>(r.rows()));
    offset += static_cast<std::uint64_t>(r.rows()) * dim * sizeof(float);
  }
  for (const auto& r : records) {
    const float* data = r.values.data();
    for (Eigen::Index i = 0; i < r.values.size(); ++i) binio::put_f32(out, data[i]);
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

EmbeddingReader::EmbeddingReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings " + path.string());
  file_size_ = std::filesystem::file_size(path);
  if (!binio::check_magic(in, kEmbedMagic)) throw BadMagicError(path.string() + ": not an AV1EMBED file");
  try {
    version_ = binio::get_u32(in, "version");
    if (version_ != kEmbedVersion) {
      throw DataError(path.string() + ": unsupported embedding format version " + std::to_string(version_));
    }
    dim_ = binio::get_u32(in, "dim");
    const auto count = binio::get_u64(in, "author_count");
    if (count > 0 && dim_ == 0) throw DataError(path.string() + ": zero embedding width");
    index_.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t i = 0; i < count; ++i) {
      EmbeddingIndexEntry e;
      e.author_id = binio::get_string(in, "index author id");
      e.offset = binio::get_u64(in, "index offset");
      e.rows = binio::get_u32(in, "index row count");
      index_.push_back(std::move(e));
    }
  } catch (const binio::TruncatedStream& e) {
    throw TruncatedFileError(path.string() + ": truncated header: " + e.what(), "");
  }

  const auto payload_start = static_cast<std::uint64_t>(in.tellg());
  std::uint64_t expected = payload_start;
  for (std::size_t i = 0; i < index_.size(); ++i) {
    const auto& e = index_[i];
    if (!by_id_.emplace(e.author_id, i).second) throw DataError(path.string() + ": duplicate author " + e.author_id);
    if (e.rows == 0) throw DataError(path.string() + ": author " + e.author_id + " has zero rows");
    if (e.offset != expected) {
      throw DataError(path.string() + ": index offsets overlap or leave gaps at author " + e.author_id);
    }
    expected += static_cast<std::uint64_t>(e.rows) * dim_ * sizeof(float);
  }
}

PostEmbeddingMatrix EmbeddingReader::read_entry(const EmbeddingIndexEntry& entry) const {
  const std::uint64_t bytes = static_cast<std::uint64_t>(entry.rows) * dim_ * sizeof(float);
  if (entry.offset + bytes > file_size_) {
    throw TruncatedFileError(path_.string() + ": payload for author " + entry.author_id + " is truncated",
                             entry.author_id);
  }
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw IoError("cannot open embeddings " + path_.string());
  in.seekg(static_cast<std::streamoff>(entry.offset));

  std::vector<unsigned char> raw(static_cast<std::size_t>(bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != bytes) {
    throw TruncatedFileError(path_.string() + ": payload for author " + entry.author_id + " is truncated",
                             entry.author_id);
  }

  PostEmbeddingMatrix m{entry.author_id, RowMatrixF(entry.rows, dim_)};
  float* dst = m.values.data();
  for (std::size_t i = 0; i < static_cast<std::size_t>(m.values.size()); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
    dst[i] = std::bit_cast<float>(bits);
    if (!std::isfinite(dst[i])) {
      throw NonFiniteValueError(path_.string() + ": non-finite value in author " + entry.author_id + " at row " +
                                std::to_string(i / dim_));
    }
  }
  return m;
}

PostEmbeddingMatrix EmbeddingReader::read(const std::string& author_id) const {
  auto it = by_id_.find(author_id);
  if (it == by_id_.end()) throw UnknownAuthorError(path_.string() + ": unknown author id " + author_id);
  return read_entry(index_[it->second]);
}

std::vector<PostEmbeddingMatrix> EmbeddingReader::read_all() const {
  std::vector<PostEmbeddingMatrix> out;
  out.reserve(index_.size());
  for (const auto& e : index_) out.push_back(read_entry(e));
  return out;
}

std::vector<PostEmbeddingMatrix> read_embeddings(const std::filesystem::path& path,
                                                 const std::optional<std::vector<std::string>>& authors) {
  EmbeddingReader reader(path);
  if (!authors) return reader.read_all();
  std::vector<PostEmbeddingMatrix> out;
  out.reserve(authors->size());
  for (const auto& id : *authors) out.push_back(reader.read(id));
  return out;
}

StubEmbedder::StubEmbedder(StubEmbedderConfig config) : config_(std::move(config)) {
  if (config_.dim == 0) throw ConfigError("stub embedder dim must be > 0");
  if (config_.plant) plant_axis_ = hashed_direction(mix_seed(config_.seed, "planted:" + config_.plant->attribute));
}

Eigen::VectorXd StubEmbedder::hashed_direction(std::uint64_t key) const {
  std::mt19937_64 rng(key);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(static_cast<Eigen::Index>(config_.dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v.normalized();
}

Eigen::VectorXd StubEmbedder::author_signature(const std::string& author_id,
                                               const std::map<std::string, std::string>& labels) const {
  Eigen::VectorXd sig = hashed_direction(mix_seed(config_.seed, "author:" + author_id));
  if (config_.plant && config_.plant->strength != 0.0) {
    const auto it = labels.find(config_.plant->attribute);
    if (it != labels.end()) {
      const double sign = it->second == config_.plant->positive_value ? 1.0 : -1.0;
      sig = (sig + sign * config_.plant->strength * plant_axis_).normalized();
    }
  }
  return sig;
}

Eigen::VectorXf StubEmbedder::embed(const Post& post, const std::map<std::string, std::string>& labels) const {
  Eigen::VectorXd content = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config_.dim));
  const auto words = basic_split(post.text);
  for (const auto& w : words) content += hashed_direction(mix_seed(config_.seed, "word:" + w));
  if (words.empty() || content.norm() == 0.0) content = hashed_direction(mix_seed(config_.seed, "text:" + post.text));
  content.normalize();

  Eigen::VectorXd v = config_.author_weight * author_signature(post.author_id, labels) +
                      config_.content_weight * content;
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v.cast<float>();
}

PostEmbeddingMatrix StubEmbedder::embed_author(const AuthorRecord& author) const {
  PostEmbeddingMatrix m{author.author_id, RowMatrixF(author.posts.size(), config_.dim)};
  for (std::size_t i = 0; i < author.posts.size(); ++i) {
    m.values.row(static_cast<Eigen::Index>(i)) = embed(author.posts[i], author.labels).transpose();
  }
  return m;
}

Eigen::VectorXf stub_embed(const Post& post, std::size_t dim, std::uint64_t seed) {
  StubEmbedderConfig config;
  config.dim = dim;
  config.seed = seed;
  return StubEmbedder(config).embed(post);
}

}  // namespace a2v
