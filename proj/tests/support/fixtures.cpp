#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace a2v::test {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& content) { write_bytes(path, content); }

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string word_text(std::size_t n, const std::string& stem) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += stem + std::to_string(i % 10);
  }
  return s;
}

Post make_post(const std::string& author, std::int64_t t, const std::string& text, const std::string& sub) {
  return Post{author, t, sub, text};
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

PostEmbeddingMatrix random_author(const std::string& id, std::size_t rows, std::size_t dim, std::uint64_t seed) {
  PostEmbeddingMatrix m{id, RowMatrixF(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim))};
  m.values = gaussian_matrix(m.values.rows(), m.values.cols(), seed).cast<float>();
  return m;
}

Clusters two_clusters(std::size_t per, std::size_t dim, double gap, std::uint64_t seed) {
  Clusters c;
  c.points = gaussian_matrix(static_cast<Eigen::Index>(2 * per), static_cast<Eigen::Index>(dim), seed);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const int label = i < per ? 0 : 1;
    c.labels.push_back(label);
    if (label == 1) c.points(static_cast<Eigen::Index>(i), 0) += gap;
  }
  return c;
}

}  // namespace a2v::test
