#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "author2vec/corpus.hpp"
#include "author2vec/embedstore.hpp"

namespace a2v::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "a2v");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::string& bytes);

/// Space-separated "w0 w1 ..." style text of `n` words.
std::string word_text(std::size_t n, const std::string& stem = "w");
Post make_post(const std::string& author, std::int64_t t, const std::string& text, const std::string& sub = "misc");

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);
PostEmbeddingMatrix random_author(const std::string& id, std::size_t rows, std::size_t dim, std::uint64_t seed);

/// Two isotropic Gaussian blobs, `per` points each, centers `gap` apart along axis 0.
struct Clusters {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};
Clusters two_clusters(std::size_t per, std::size_t dim, double gap, std::uint64_t seed);

}  // namespace a2v::test
