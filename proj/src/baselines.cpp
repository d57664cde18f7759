// SPDX-License-Identifier: Apache-2.0
#include "author2vec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "author2vec/binary_io.hpp"

namespace a2v {

namespace {

constexpr std::string_view kLsiMagic = "AV1LSI__";
constexpr std::string_view kLdaMagic = "AV1LDA__";
constexpr std::uint32_t kModelVersion = 1;

TokenList concat(std::span<const TokenList> posts) {
  TokenList all;
  for (const auto& p : posts) all.insert(all.end(), p.begin(), p.end());
  return all;
}

void put_dictionary(std::ostream& out, const BowDictionary& dict) {
  binio::put_u64(out, dict.num_docs());
  binio::put_u64(out, dict.min_df());
  binio::put_f64(out, dict.max_df_frac());
  binio::put_u64(out, dict.size());
  for (std::size_t i = 0; i < dict.size(); ++i) {
    binio::put_string(out, dict.tokens()[i]);
    binio::put_u64(out, dict.doc_freq()[i]);
  }
}

BowDictionary get_dictionary(std::istream& in) {
  const auto num_docs = binio::get_u64(in, "dictionary doc count");
  const auto min_df = binio::get_u64(in, "dictionary min_df");
  const auto max_df = binio::get_f64(in, "dictionary max_df");
  const auto n = binio::get_u64(in, "dictionary size");
  std::vector<std::string> tokens;
  std::vector<std::size_t> df;
  for (std::uint64_t i = 0; i < n; ++i) {
    tokens.push_back(binio::get_string(in, "dictionary token"));
    df.push_back(binio::get_u64(in, "dictionary df"));
  }
  return BowDictionary(std::move(tokens), std::move(df), num_docs, min_df, max_df);
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) binio::put_f64(out, v[i]);
}

Eigen::VectorXd get_vector(std::istream& in, std::size_t n, std::string_view what) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = binio::get_f64(in, what);
  return v;
}

std::ifstream open_model(const std::filesystem::path& path, std::string_view magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  if (!binio::check_magic(in, magic)) {
    throw DataError(path.string() + ": bad magic, expected " + std::string(magic));
  }
  const auto version = binio::get_u32(in, "version");
  if (version != kModelVersion) throw DataError(path.string() + ": unsupported version " + std::to_string(version));
  return in;
}

std::uint64_t hash_counts(const Eigen::SparseVector<double>& counts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::SparseVector<double>::InnerIterator it(counts); it; ++it) {
    h = mix_seed(h, static_cast<std::uint64_t>(it.index()));
    h = mix_seed(h, static_cast<std::uint64_t>(std::llround(it.value())));
  }
  return h;
}

// Draws an index from unnormalized non-negative weights.
std::size_t sample_discrete(const std::vector<double>& cumulative, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, cumulative.back());
  const double x = u(rng);
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

// ---------------------------------------------------------------- dictionary

BowDictionary::BowDictionary(std::vector<std::string> tokens, std::vector<std::size_t> doc_freq, std::size_t num_docs,
                             std::size_t min_df, double max_df_frac)
    : tokens_(std::move(tokens)),
      doc_freq_(std::move(doc_freq)),
      num_docs_(num_docs),
      min_df_(min_df),
      max_df_frac_(max_df_frac) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) columns_.emplace(tokens_[i], static_cast<int>(i));
}

int BowDictionary::column(const std::string& token) const {
  auto it = columns_.find(token);
  return it == columns_.end() ? -1 : it->second;
}

BowDictionary build_dictionary(std::span<const TokenList> docs, std::size_t min_df, double max_df_frac) {
  if (docs.empty()) throw DataError("cannot build a dictionary from zero documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    TokenList uniq(doc);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) ++df[t];
  }
  const double n = static_cast<double>(docs.size());
  std::vector<std::string> tokens;
  std::vector<std::size_t> freqs;
  for (const auto& [token, count] : df) {
    if (count < min_df || static_cast<double>(count) / n > max_df_frac) continue;
    tokens.push_back(token);
    freqs.push_back(count);
  }
  if (tokens.empty()) throw DataError("every token was removed by the document-frequency filter");
  return BowDictionary(std::move(tokens), std::move(freqs), docs.size(), min_df, max_df_frac);
}

Eigen::SparseVector<double> count_vector(const TokenList& doc, const BowDictionary& dict) {
  std::map<int, double> counts;
  for (const auto& t : doc) {
    if (const int c = dict.column(t); c >= 0) counts[c] += 1.0;
  }
  Eigen::SparseVector<double> v(static_cast<Eigen::Index>(dict.size()));
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  for (const auto& [c, n] : counts) v.insert(c) = n;
  return v;
}

Eigen::VectorXd idf_weights(const BowDictionary& dict) {
  Eigen::VectorXd idf(static_cast<Eigen::Index>(dict.size()));
  const double n = static_cast<double>(dict.num_docs());
  for (std::size_t i = 0; i < dict.size(); ++i) {
    idf[static_cast<Eigen::Index>(i)] = std::log(n / static_cast<double>(dict.doc_freq()[i]));
  }
  return idf;
}

Eigen::SparseVector<double> tfidf_vector(const TokenList& doc, const BowDictionary& dict) {
  auto v = count_vector(doc, dict);
  const auto idf = idf_weights(dict);
  for (Eigen::SparseVector<double>::InnerIterator it(v); it; ++it) it.valueRef() *= idf[it.index()];
  return v;
}

namespace {

SparseRows stack_rows(std::span<const TokenList> docs, const BowDictionary& dict, const Eigen::VectorXd* idf) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto v = count_vector(docs[r], dict);
    for (Eigen::SparseVector<double>::InnerIterator it(v); it; ++it) {
      const double w = idf ? it.value() * (*idf)[it.index()] : it.value();
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.index()), w);
    }
  }
  SparseRows m(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(dict.size()));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

}  // namespace

SparseRows tfidf_matrix(std::span<const TokenList> docs, const BowDictionary& dict) {
  const auto idf = idf_weights(dict);
  return stack_rows(docs, dict, &idf);
}

SparseRows count_matrix(std::span<const TokenList> docs, const BowDictionary& dict) {
  return stack_rows(docs, dict, nullptr);
}

// ---------------------------------------------------------------------- LSI

Eigen::VectorXd LsiModel::project(const Eigen::SparseVector<double>& weighted) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(projection.cols());
  for (Eigen::SparseVector<double>::InnerIterator it(weighted); it; ++it) {
    out += it.value() * projection.row(it.index()).transpose();
  }
  return out;
}

Eigen::VectorXd LsiModel::embed_post(const TokenList& post) const {
  auto v = count_vector(post, dictionary);
  for (Eigen::SparseVector<double>::InnerIterator it(v); it; ++it) it.valueRef() *= idf[it.index()];
  return project(v);
}

LsiModel fit_lsi(const SparseRows& tfidf, const BowDictionary& dict, std::size_t rank, std::uint64_t seed,
                 const RandomizedSvdOptions& options) {
  if (static_cast<std::size_t>(tfidf.cols()) != dict.size()) {
    throw DataError("TF-IDF matrix width does not match the dictionary");
  }
  auto opt = options;
  opt.seed = seed;
  const Eigen::SparseMatrix<double> a(tfidf);
  auto svd = randomized_svd(a, rank, opt);
  LsiModel model;
  model.dictionary = dict;
  model.idf = idf_weights(dict);
  model.projection = std::move(svd.v);
  model.singular_values = std::move(svd.singular_values);
  return model;
}

UserVector lsi_user_embedding(std::span<const TokenList> author_posts, const LsiModel& model, LsiUserMode mode) {
  UserVector out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.rank())), false};
  if (mode == LsiUserMode::concat_doc) {
    const auto doc = concat(author_posts);
    auto v = count_vector(doc, model.dictionary);
    if (v.nonZeros() == 0) {
      out.warning = true;
      return out;
    }
    for (Eigen::SparseVector<double>::InnerIterator it(v); it; ++it) it.valueRef() *= model.idf[it.index()];
    out.values = model.project(v);
    return out;
  }
  std::size_t used = 0;
  for (const auto& post : author_posts) {
    out.values += model.embed_post(post);
    ++used;
  }
  if (used == 0 || count_vector(concat(author_posts), model.dictionary).nonZeros() == 0) {
    out.values.setZero();
    out.warning = true;
    return out;
  }
  out.values /= static_cast<double>(used);
  return out;
}

void save_lsi(const LsiModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write LSI model " + path.string());
  binio::put_magic(out, kLsiMagic);
  binio::put_u32(out, kModelVersion);
  put_dictionary(out, model.dictionary);
  binio::put_u64(out, model.rank());
  put_vector(out, model.idf);
  put_vector(out, model.singular_values);
  for (Eigen::Index r = 0; r < model.projection.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.projection.cols(); ++c) binio::put_f64(out, model.projection(r, c));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

LsiModel load_lsi(const std::filesystem::path& path) {
  auto in = open_model(path, kLsiMagic);
  try {
    LsiModel model;
    model.dictionary = get_dictionary(in);
    const auto rank = binio::get_u64(in, "rank");
    const auto terms = model.dictionary.size();
    model.idf = get_vector(in, terms, "idf");
    model.singular_values = get_vector(in, rank, "singular values");
    model.projection.resize(static_cast<Eigen::Index>(terms), static_cast<Eigen::Index>(rank));
    for (Eigen::Index r = 0; r < model.projection.rows(); ++r) {
      for (Eigen::Index c = 0; c < model.projection.cols(); ++c) model.projection(r, c) = binio::get_f64(in, "projection");
    }
    return model;
  } catch (const binio::TruncatedStream& e) {
    throw DataError(path.string() + ": truncated LSI model: " + e.what());
  }
}

// ---------------------------------------------------------------------- LDA

Eigen::MatrixXd LdaModel::phi() const {
  Eigen::MatrixXd p = topic_word.array() + beta;
  for (Eigen::Index k = 0; k < p.rows(); ++k) p.row(k) /= p.row(k).sum();
  return p;
}

LdaModel fit_lda(const SparseRows& counts, const BowDictionary& dict, const LdaConfig& config, LdaTrace* trace) {
  if (config.topics < 1) throw ConfigError("LDA needs at least one topic");
  if (config.iterations < 1) throw ConfigError("LDA needs at least one sweep");
  if (counts.rows() == 0 || counts.nonZeros() == 0) throw DataError("LDA input matrix is empty");

  const auto K = static_cast<Eigen::Index>(config.topics);
  const auto V = counts.cols();
  const double alpha = config.alpha > 0.0 ? config.alpha : 50.0 / static_cast<double>(config.topics);
  const double beta = config.beta;
  const double vbeta = beta * static_cast<double>(V);

  // Token streams per document, in column order.
  std::vector<std::vector<int>> words(static_cast<std::size_t>(counts.rows()));
  for (Eigen::Index d = 0; d < counts.rows(); ++d) {
    for (SparseRows::InnerIterator it(counts, d); it; ++it) {
      const auto n = std::llround(it.value());
      for (long long i = 0; i < n; ++i) words[static_cast<std::size_t>(d)].push_back(static_cast<int>(it.col()));
    }
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick_topic(0, static_cast<int>(K) - 1);
  Eigen::MatrixXd nkw = Eigen::MatrixXd::Zero(K, V);
  Eigen::MatrixXd ndk = Eigen::MatrixXd::Zero(counts.rows(), K);
  Eigen::VectorXd nk = Eigen::VectorXd::Zero(K);
  std::vector<std::vector<int>> z(words.size());
  for (std::size_t d = 0; d < words.size(); ++d) {
    z[d].resize(words[d].size());
    for (std::size_t i = 0; i < words[d].size(); ++i) {
      const int k = pick_topic(rng);
      z[d][i] = k;
      nkw(k, words[d][i]) += 1;
      ndk(static_cast<Eigen::Index>(d), k) += 1;
      nk[k] += 1;
    }
  }

  std::vector<double> cumulative(static_cast<std::size_t>(K));
  for (std::size_t sweep = 0; sweep < config.iterations; ++sweep) {
    for (std::size_t d = 0; d < words.size(); ++d) {
      const auto di = static_cast<Eigen::Index>(d);
      for (std::size_t i = 0; i < words[d].size(); ++i) {
        const int w = words[d][i];
        const int old = z[d][i];
        nkw(old, w) -= 1;
        ndk(di, old) -= 1;
        nk[old] -= 1;
        double acc = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
          acc += (ndk(di, k) + alpha) * (nkw(k, w) + beta) / (nk[k] + vbeta);
          cumulative[static_cast<std::size_t>(k)] = acc;
        }
        const auto k = static_cast<int>(sample_discrete(cumulative, rng));
        z[d][i] = k;
        nkw(k, w) += 1;
        ndk(di, k) += 1;
        nk[k] += 1;
      }
    }
    if (trace) trace->token_counts.push_back(nkw.sum());
  }
  if (trace) {
    trace->final_assignments = z;
    trace->doc_topic = ndk;
  }

  LdaModel model;
  model.topic_word = std::move(nkw);
  model.topic_totals = std::move(nk);
  model.alpha = alpha;
  model.beta = beta;
  model.inference_sweeps = config.inference_sweeps;
  model.seed = config.seed;
  model.dictionary = dict;
  return model;
}

UserVector lda_infer(const Eigen::SparseVector<double>& counts, const LdaModel& model, std::uint64_t doc_seed) {
  const auto K = static_cast<Eigen::Index>(model.topics());
  UserVector out{Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K)), false};
  std::vector<int> words;
  for (Eigen::SparseVector<double>::InnerIterator it(counts); it; ++it) {
    const auto n = std::llround(it.value());
    for (long long i = 0; i < n; ++i) words.push_back(static_cast<int>(it.index()));
  }
  if (words.empty()) {
    out.warning = true;
    return out;
  }

  const Eigen::MatrixXd phi = model.phi();
  std::mt19937_64 rng(doc_seed);
  std::uniform_int_distribution<int> pick_topic(0, static_cast<int>(K) - 1);
  Eigen::VectorXd ndk = Eigen::VectorXd::Zero(K);
  std::vector<int> z(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = pick_topic(rng);
    ndk[z[i]] += 1;
  }
  const std::size_t sweeps = std::max<std::size_t>(model.inference_sweeps, 1);
  const std::size_t burn_in = sweeps / 2;
  Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(K);
  std::size_t samples = 0;
  std::vector<double> cumulative(static_cast<std::size_t>(K));
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      ndk[z[i]] -= 1;
      double acc = 0.0;
      for (Eigen::Index k = 0; k < K; ++k) {
        acc += (ndk[k] + model.alpha) * phi(k, words[i]);
        cumulative[static_cast<std::size_t>(k)] = acc;
      }
      z[i] = static_cast<int>(sample_discrete(cumulative, rng));
      ndk[z[i]] += 1;
    }
    if (sweep >= burn_in) {
      accumulated += ndk;
      ++samples;
    }
  }
  const double n = static_cast<double>(words.size());
  const Eigen::VectorXd mean_counts = accumulated / static_cast<double>(samples);
  out.values = (mean_counts.array() + model.alpha) / (n + static_cast<double>(K) * model.alpha);
  out.values /= out.values.sum();
  return out;
}

UserVector lda_user_embedding(std::span<const TokenList> author_posts, const LdaModel& model) {
  const auto counts = count_vector(concat(author_posts), model.dictionary);
  return lda_infer(counts, model, mix_seed(model.seed, hash_counts(counts)));
}

void save_lda(const LdaModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write LDA model " + path.string());
  binio::put_magic(out, kLdaMagic);
  binio::put_u32(out, kModelVersion);
  put_dictionary(out, model.dictionary);
  binio::put_u64(out, model.topics());
  binio::put_u64(out, model.vocab_size());
  binio::put_f64(out, model.alpha);
  binio::put_f64(out, model.beta);
  binio::put_u64(out, model.inference_sweeps);
  binio::put_u64(out, model.seed);
  for (Eigen::Index k = 0; k < model.topic_word.rows(); ++k) {
    for (Eigen::Index w = 0; w < model.topic_word.cols(); ++w) binio::put_f64(out, model.topic_word(k, w));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

LdaModel load_lda(const std::filesystem::path& path) {
  auto in = open_model(path, kLdaMagic);
  try {
    LdaModel model;
    model.dictionary = get_dictionary(in);
    const auto K = static_cast<Eigen::Index>(binio::get_u64(in, "topics"));
    const auto V = static_cast<Eigen::Index>(binio::get_u64(in, "vocab size"));
    model.alpha = binio::get_f64(in, "alpha");
    model.beta = binio::get_f64(in, "beta");
    model.inference_sweeps = binio::get_u64(in, "inference sweeps");
    model.seed = binio::get_u64(in, "seed");
    model.topic_word.resize(K, V);
    for (Eigen::Index k = 0; k < K; ++k) {
      for (Eigen::Index w = 0; w < V; ++w) model.topic_word(k, w) = binio::get_f64(in, "topic-word counts");
    }
    model.topic_totals = model.topic_word.rowwise().sum();
    return model;
  } catch (const binio::TruncatedStream& e) {
    throw DataError(path.string() + ": truncated LDA model: " + e.what());
  }
}

// -------------------------------------------------------------- word vectors

WordVectorTable WordVectorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word-vector table " + path.string());
  std::size_t count = 0;
  std::size_t width = 0;
  std::string header;
  if (!std::getline(in, header)) throw DataError(path.string() + ": empty word-vector file");
  {
    std::istringstream hs(header);
    if (!(hs >> count >> width) || width == 0) throw DataError(path.string() + ": header must be 'count dim'");
  }
  WordVectorTable table(width);
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    Eigen::VectorXd v(static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < width; ++i) {
      if (!(ls >> v[static_cast<Eigen::Index>(i)])) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                        " values");
      }
    }
    table.add(token, std::move(v));
  }
  if (table.size() != count) {
    throw DataError(path.string() + ": header announces " + std::to_string(count) + " vectors, found " +
                    std::to_string(table.size()));
  }
  return table;
}

void WordVectorTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write word-vector table " + path.string());
  out << tokens_.size() << ' ' << width_ << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i];
    for (Eigen::Index j = 0; j < vectors_[i].size(); ++j) out << ' ' << vectors_[i][j];
    out << '\n';
  }
}

void WordVectorTable::add(const std::string& token, Eigen::VectorXd vec) {
  if (static_cast<std::size_t>(vec.size()) != width_) {
    throw DataError("word vector for '" + token + "' has width " + std::to_string(vec.size()) + ", table width is " +
                    std::to_string(width_));
  }
  if (auto it = index_.find(token); it != index_.end()) {
    vectors_[it->second] = std::move(vec);
    return;
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  vectors_.push_back(std::move(vec));
}

const Eigen::VectorXd* WordVectorTable::find(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

UserVector wordvec_user_embedding(std::span<const TokenList> author_posts, const WordVectorTable& table) {
  UserVector out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.width())), false};
  std::size_t hits = 0;
  for (const auto& post : author_posts) {
    for (const auto& token : post) {
      if (const auto* v = table.find(token)) {
        out.values += *v;
        ++hits;
      }
    }
  }
  if (hits == 0) {
    out.warning = true;
    return out;
  }
  out.values /= static_cast<double>(hits);
  return out;
}

}  // namespace a2v
