// SPDX-License-Identifier: Apache-2.0
#include "author2vec/viz.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "author2vec/svd.hpp"

namespace a2v {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

Eigen::MatrixXd jitter_duplicates(Eigen::MatrixXd x, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, "tsne-jitter"));
  std::normal_distribution<double> gauss;
  for (Eigen::Index i = 1; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (x.row(i) == x.row(j)) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) += 1e-9 * gauss(rng);
        break;
      }
    }
  }
  return x;
}

Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& x, std::size_t dims, std::uint64_t seed) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  RandomizedSvdOptions opt;
  opt.seed = mix_seed(seed, "tsne-pca");
  const std::size_t rank = std::min({dims, static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols())});
  const auto svd = randomized_svd(centered, rank, opt);
  return svd.u * svd.singular_values.asDiagonal();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<std::string_view, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79"};
constexpr std::string_view kGray = "#9e9e9e";

}  // namespace

RowAffinity calibrate_row(const Eigen::VectorXd& d, std::size_t self, double perplexity, double tolerance) {
  const auto n = d.size();
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (static_cast<std::size_t>(j) != self) dmin = std::min(dmin, d[j]);
  }
  const double target = std::log(perplexity);
  RowAffinity r;
  r.p.resize(n);
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double beta = 1.0;
  double entropy = 0.0;
  for (int it = 0; it < 200; ++it) {
    double sum = 0.0;
    double weighted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (static_cast<std::size_t>(j) == self) {
        r.p[j] = 0.0;
        continue;
      }
      const double shifted = d[j] - dmin;
      r.p[j] = std::exp(-beta * shifted);
      sum += r.p[j];
      weighted += shifted * r.p[j];
    }
    // H = log(sum) + beta * E[d - dmin]   (nats)
    entropy = std::log(sum) + beta * weighted / sum;
    r.p /= sum;
    if (std::abs(std::exp(entropy) - perplexity) < tolerance) break;
    if (entropy > target) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  r.beta = beta;
  r.perplexity = std::exp(entropy);
  return r;
}

Affinities conditional_affinities(const Eigen::MatrixXd& x, double perplexity, double tolerance) {
  const Eigen::MatrixXd d = squared_distances(x);
  Affinities a;
  a.conditional.resize(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto r = calibrate_row(d.row(i).transpose(), static_cast<std::size_t>(i), perplexity, tolerance);
    a.conditional.row(i) = r.p.transpose();
    a.perplexities.push_back(r.perplexity);
  }
  return a;
}

TsneResult tsne_project(const Eigen::MatrixXd& vectors, const TsneConfig& config) {
  const auto n = vectors.rows();
  if (n < 10) throw DataError("t-SNE needs at least 10 points, got " + std::to_string(n));
  if (!(config.perplexity > 0) || config.perplexity >= static_cast<double>(n - 1) / 3.0) {
    throw ConfigError("t-SNE perplexity " + std::to_string(config.perplexity) + " must be in (0, (n-1)/3) for n = " +
                      std::to_string(n));
  }
  if (!vectors.allFinite()) throw DataError("t-SNE input contains non-finite values");

  Eigen::MatrixXd x = jitter_duplicates(vectors, config.seed);
  if (config.pca_dims > 0 && static_cast<std::size_t>(x.cols()) > config.pca_dims) {
    x = pca_reduce(x, config.pca_dims, config.seed);
  }

  TsneResult result;
  const auto aff = conditional_affinities(x, config.perplexity, config.perplexity_tolerance);
  result.perplexities = aff.perplexities;
  Eigen::MatrixXd p = (aff.conditional + aff.conditional.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  std::mt19937_64 rng(mix_seed(config.seed, "tsne-init"));
  std::normal_distribution<double> gauss(0.0, 1e-2);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = gauss(rng);
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double exag = it < config.exaggeration_iterations ? config.exaggeration : 1.0;
    const double momentum = it < config.exaggeration_iterations ? config.initial_momentum : config.final_momentum;

    Eigen::MatrixXd num = (1.0 + squared_distances(y).array()).inverse().matrix();
    num.diagonal().setZero();
    const double z = num.sum();

    double kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) kl += p(i, j) * std::log(p(i, j) / std::max(num(i, j) / z, 1e-300));
      }
    }
    result.kl.push_back(kl);

    const Eigen::MatrixXd stiffness = ((exag * p).array() - num.array() / z).matrix().cwiseProduct(num);
    Eigen::MatrixXd grad(n, 2);
    const Eigen::VectorXd row_sums = stiffness.rowwise().sum();
    grad = 4.0 * (row_sums.asDiagonal() * y - stiffness * y);

    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      const bool same_sign = (grad.data()[i] > 0) == (update.data()[i] > 0);
      gains.data()[i] = same_sign ? std::max(gains.data()[i] * 0.8, 0.01) : gains.data()[i] + 0.2;
    }
    update = momentum * update - config.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
  }
  y.rowwise() -= y.colwise().mean();
  result.coords = std::move(y);
  return result;
}

double silhouette_score(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const auto n = points.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw DataError("silhouette: label count mismatch");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw DataError("silhouette needs at least two clusters");
  const Eigen::MatrixXd d = squared_distances(points).cwiseSqrt();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::map<int, double> sum;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) sum[labels[static_cast<std::size_t>(j)]] += d(i, j);
    }
    const int own = labels[static_cast<std::size_t>(i)];
    if (sizes[own] == 1) continue;  // s(i) = 0
    const double a = sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sum) {
      if (l != own) b = std::min(b, s / static_cast<double>(sizes[l]));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

void export_scatter(std::span<const ScatterPoint> points, const std::filesystem::path& stem, const std::string& title) {
  auto with_ext = [&](const char* ext) {
    auto p = stem;
    p += ext;
    return p;
  };
  {
    std::ofstream csv(with_ext(".csv"));
    if (!csv) throw IoError("cannot write " + with_ext(".csv").string());
    csv << "author_id,x,y,label\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : points) csv << csv_field(p.author_id) << ',' << p.x << ',' << p.y << ',' << csv_field(p.label) << '\n';
    if (!csv) throw IoError("failed writing " + with_ext(".csv").string());
  }

  std::map<std::string, std::string> colors;
  for (const auto& p : points) {
    if (!p.label.empty()) colors.emplace(p.label, "");
  }
  std::size_t next = 0;
  for (auto& [_, c] : colors) c = kPalette[next++ % kPalette.size()];

  constexpr double width = 800, height = 600, margin = 40, legend = 160;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  const double sx = (width - legend - 2 * margin) / std::max(xmax - xmin, 1e-12);
  const double sy = (height - 2 * margin) / std::max(ymax - ymin, 1e-12);

  std::ofstream svg(with_ext(".svg"));
  if (!svg) throw IoError("cannot write " + with_ext(".svg").string());
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title)
        << "</text>\n";
  }
  svg << std::fixed << std::setprecision(2);
  for (const auto& p : points) {
    const std::string fill = p.label.empty() ? std::string(kGray) : colors.at(p.label);
    svg << "<circle cx=\"" << margin + (p.x - xmin) * sx << "\" cy=\"" << height - margin - (p.y - ymin) * sy
        << "\" r=\"3\" fill=\"" << fill << "\" fill-opacity=\"0.8\"/>\n";
  }
  double ly = margin;
  const double lx = width - legend + 10;
  auto legend_row = [&](std::string_view fill, const std::string& text) {
    svg << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << fill << "\"/>"
        << "<text x=\"" << lx + 16 << "\" y=\"" << ly << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << xml_escape(text) << "</text>\n";
    ly += 18;
  };
  for (const auto& [label, fill] : colors) legend_row(fill, label);
  if (std::any_of(points.begin(), points.end(), [](const ScatterPoint& p) { return p.label.empty(); })) {
    legend_row(kGray, "unlabeled");
  }
  svg << "</svg>\n";
  if (!svg) throw IoError("failed writing " + with_ext(".svg").string());
}

std::vector<ScatterPoint> read_scatter_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "author_id,x,y,label") {
    throw DataError(path.string() + ": expected header 'author_id,x,y,label'");
  }
  std::vector<ScatterPoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_csv(line);
    if (f.size() != 4) throw DataError(path.string() + ": line " + std::to_string(lineno) + " needs 4 fields");
    try {
      out.push_back({f[0], std::stod(f[1]), std::stod(f[2]), f[3]});
    } catch (const std::exception&) {
      throw DataError(path.string() + ": line " + std::to_string(lineno) + " has a malformed coordinate");
    }
  }
  return out;
}

}  // namespace a2v
