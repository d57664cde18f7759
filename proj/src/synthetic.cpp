// SPDX-License-Identifier: Apache-2.0
#include "author2vec/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

namespace a2v {

namespace {

constexpr std::array<std::string_view, 24> kSyllables{"ka", "lo", "mi", "ne", "ru", "ta", "vo", "shi", "pe", "du", "ga", "zo",
                                                      "bri", "fen", "hol", "jax", "qui", "wen", "sta", "mor", "lin", "tek", "yar", "cus"};

std::vector<std::string> make_words(std::size_t n, std::mt19937_64& rng) {
  std::set<std::string> seen;
  std::vector<std::string> words;
  std::uniform_int_distribution<std::size_t> syl(0, kSyllables.size() - 1);
  std::uniform_int_distribution<int> len(2, 4);
  while (words.size() < n) {
    std::string w;
    const int parts = len(rng);
    for (int i = 0; i < parts; ++i) w += kSyllables[syl(rng)];
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& c) {
  if (c.authors < 2 || c.posts_per_author == 0) throw ConfigError("synthetic corpus needs >= 2 authors with posts");
  if (c.topic_words + c.marker_words > c.vocabulary || c.topics == 0 || c.topics_per_author == 0 ||
      c.topics_per_author > c.topics) {
    throw ConfigError("synthetic corpus: inconsistent vocabulary / topic sizes");
  }
  if (c.min_words == 0 || c.max_words < c.min_words) throw ConfigError("synthetic corpus: bad post length range");

  std::mt19937_64 rng(mix_seed(c.seed, "synthetic"));
  SyntheticCorpus out;
  out.words = make_words(c.vocabulary, rng);
  const std::vector<std::string> markers(out.words.end() - static_cast<std::ptrdiff_t>(c.marker_words), out.words.end());
  const std::size_t content_words = c.vocabulary - c.marker_words;

  std::vector<std::vector<std::size_t>> topic_vocab(c.topics);
  std::vector<std::size_t> ids(content_words);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (auto& t : topic_vocab) {
    std::shuffle(ids.begin(), ids.end(), rng);
    t.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(c.topic_words));
  }

  std::vector<std::size_t> positive(c.authors);
  std::iota(positive.begin(), positive.end(), std::size_t{0});
  std::shuffle(positive.begin(), positive.end(), rng);
  std::vector<bool> has_attr(c.authors, false);
  for (std::size_t i = 0; i < c.authors / 2; ++i) has_attr[positive[i]] = true;

  static constexpr std::array<std::string_view, 6> kSubreddits{"AskReddit", "gaming", "books", "science", "movies", "music"};
  const std::string types = "IESNTFJP";
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> length(c.min_words, c.max_words);
  std::uniform_int_distribution<std::size_t> any_word(0, content_words - 1);
  std::uniform_int_distribution<std::size_t> any_marker(0, c.marker_words - 1);
  std::uniform_int_distribution<std::size_t> any_topic_word(0, c.topic_words - 1);
  std::uniform_int_distribution<std::size_t> any_sub(0, kSubreddits.size() - 1);

  const auto width = std::to_string(c.authors - 1).size();
  for (std::size_t a = 0; a < c.authors; ++a) {
    std::string id = std::to_string(a);
    id = "user_" + std::string(width - id.size(), '0') + id;

    std::vector<std::size_t> topics(c.topics);
    std::iota(topics.begin(), topics.end(), std::size_t{0});
    std::shuffle(topics.begin(), topics.end(), rng);
    topics.resize(c.topics_per_author);
    std::uniform_int_distribution<std::size_t> pick_topic(0, topics.size() - 1);
    const double marker_rate = has_attr[a] ? c.marker_rate_positive : c.marker_rate_negative;
    const std::string_view home = kSubreddits[any_sub(rng)];

    std::int64_t t = 1500000000 + static_cast<std::int64_t>(a) * 7919;
    auto next_time = [&] {
      t += 3600 + static_cast<std::int64_t>(unit(rng) * 86400.0);
      return t;
    };
    for (std::size_t p = 0; p < c.posts_per_author; ++p) {
      const auto& vocab = topic_vocab[topics[pick_topic(rng)]];
      const std::size_t n = length(rng);
      std::string text;
      for (std::size_t w = 0; w < n; ++w) {
        std::string_view word;
        const double u = unit(rng);
        if (u < marker_rate) {
          word = markers[any_marker(rng)];
        } else if (unit(rng) < c.topic_share) {
          word = out.words[vocab[any_topic_word(rng)]];
        } else {
          word = out.words[any_word(rng)];
        }
        if (!text.empty()) text += ' ';
        text += word;
        if (w + 1 == n) text += '.';
      }
      const std::string_view sub = unit(rng) < 0.7 ? home : kSubreddits[any_sub(rng)];
      out.posts.push_back(Post{id, next_time(), std::string(sub), std::move(text)});
    }
    for (std::size_t j = 0; j < c.junk_posts_per_author; ++j) {
      std::string text;
      switch (j % 3) {
        case 0: text = "https://example.com/" + id + "/" + std::to_string(j); break;
        case 1: text = std::string(40, "xyzw"[j % 4]) + " " + out.words[any_word(rng)]; break;
        default: text = out.words[any_word(rng)] + " " + out.words[any_word(rng)] + "!"; break;
      }
      out.posts.push_back(Post{id, next_time(), std::string(home), std::move(text)});
    }

    std::string mbti;
    for (std::size_t axis = 0; axis < 4; ++axis) mbti += types[2 * axis + (unit(rng) < 0.5 ? 0 : 1)];
    out.labels[id][c.attribute] = has_attr[a] ? "1" : "0";
    out.labels[id]["mbti"] = mbti;
  }

  out.wordvec = WordVectorTable(c.wordvec_dim);
  std::normal_distribution<double> gauss;
  for (const auto& w : out.words) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(c.wordvec_dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = gauss(rng);
    out.wordvec.add(w, v / v.norm());
  }
  return out;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "posts.jsonl");
    if (!out) throw IoError("cannot write " + (dir / "posts.jsonl").string());
    for (const auto& p : corpus.posts) {
      out << nlohmann::json{{"author", p.author_id}, {"created_utc", p.created_at}, {"subreddit", p.subreddit},
                            {"body", p.text}}
                 .dump()
          << '\n';
    }
  }
  save_labels(corpus.labels, dir / "labels.csv");

  std::vector<std::string> vocab{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (char ch : std::string_view("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")) vocab.emplace_back(1, ch);
  for (char ch = '0'; ch <= '9'; ++ch) vocab.emplace_back(1, ch);
  for (char ch = 'a'; ch <= 'z'; ++ch) vocab.emplace_back(1, ch);
  for (char ch = 'a'; ch <= 'z'; ++ch) vocab.push_back(std::string(TokenizerVocab::kContinuation) + ch);
  std::set<std::string> present(vocab.begin(), vocab.end());
  for (const auto& w : corpus.words) {
    if (present.insert(w).second) vocab.push_back(w);
  }
  TokenizerVocab(vocab).save(dir / "vocab.txt");
  corpus.wordvec.save(dir / "wordvec.txt");
}

}  // namespace a2v
