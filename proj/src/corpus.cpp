// SPDX-License-Identifier: Apache-2.0
#include "author2vec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace a2v {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

void wordpiece(const std::string& word, const TokenizerVocab& vocab, std::vector<std::string>& out) {
  if (word.size() > kMaxCharsPerWord) {
    out.push_back(vocab.unk_token());
    return;
  }
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    std::string match;
    while (start < end) {
      std::string candidate = word.substr(start, end - start);
      if (start > 0) candidate.insert(0, TokenizerVocab::kContinuation);
      if (vocab.contains(candidate)) {
        match = std::move(candidate);
        break;
      }
      --end;
    }
    if (match.empty()) {
      out.push_back(vocab.unk_token());
      return;
    }
    pieces.push_back(std::move(match));
    start = end;
  }
  out.insert(out.end(), std::make_move_iterator(pieces.begin()), std::make_move_iterator(pieces.end()));
}

std::int64_t parse_created(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) return static_cast<std::int64_t>(v.get<double>());
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    std::size_t used = 0;
    const auto parsed = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("created_utc is not an integer");
    return parsed;
  }
  throw std::invalid_argument("created_utc must be a number");
}

}  // namespace

TokenizerVocab::TokenizerVocab(std::vector<std::string> tokens, std::string unk_token)
    : tokens_(std::move(tokens)), unk_(std::move(unk_token)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "' at line " + std::to_string(i + 1));
    }
  }
  if (!ids_.count(unk_)) throw DataError("vocabulary lacks the unk token '" + unk_ + "'");
}

TokenizerVocab TokenizerVocab::load(const std::filesystem::path& path, std::string unk_token) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return TokenizerVocab(std::move(tokens), std::move(unk_token));
}

void TokenizerVocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

int TokenizerVocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? ids_.at(unk_) : it->second;
}

std::vector<std::string> basic_split(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(to_lower(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return words;
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerVocab& vocab) {
  std::vector<std::string> out;
  for (const auto& word : basic_split(text)) wordpiece(word, vocab, out);
  return out;
}

void FilterPolicy::validate() const {
  if (min_posts_per_author < 1) throw ConfigError("min_posts_per_author must be >= 1");
  if (max_posts_per_author < min_posts_per_author) {
    throw ConfigError("max_posts_per_author must be >= min_posts_per_author");
  }
  if (!(max_char_run_ratio > 0.0 && max_char_run_ratio <= 1.0)) {
    throw ConfigError("max_char_run_ratio must lie in (0, 1]");
  }
}

bool is_repetitive(std::string_view text, double max_run_ratio) {
  const auto t = trim(text);
  if (t.empty()) return true;
  std::size_t best = 1;
  std::size_t run = 1;
  for (std::size_t i = 1; i < t.size(); ++i) {
    run = (t[i] == t[i - 1]) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return static_cast<double>(best) / static_cast<double>(t.size()) > max_run_ratio;
}

bool is_url_only(std::string_view text) {
  std::istringstream words{std::string(text)};
  std::string w;
  bool any = false;
  while (words >> w) {
    const auto lw = to_lower(w);
    const bool url = lw.rfind("http://", 0) == 0 || lw.rfind("https://", 0) == 0 || lw.rfind("www.", 0) == 0;
    if (!url) return false;
    any = true;
  }
  return any;
}

std::vector<AuthorRecord> group_posts(std::vector<Post> posts, LoadStats* stats) {
  std::map<std::string, std::vector<Post>> by_author;
  for (auto& p : posts) by_author[p.author_id].push_back(std::move(p));

  std::vector<AuthorRecord> corpus;
  corpus.reserve(by_author.size());
  std::size_t duplicates = 0;
  for (auto& [id, list] : by_author) {
    std::sort(list.begin(), list.end(), [](const Post& a, const Post& b) {
      return std::tie(a.created_at, a.text, a.subreddit) < std::tie(b.created_at, b.text, b.subreddit);
    });
    // Dedup key is (author, created_at, text); the first occurrence in sorted order wins.
    auto last = std::unique(list.begin(), list.end(), [](const Post& a, const Post& b) {
      return a.created_at == b.created_at && a.text == b.text;
    });
    duplicates += static_cast<std::size_t>(std::distance(last, list.end()));
    list.erase(last, list.end());
    corpus.push_back(AuthorRecord{id, std::move(list), {}});
  }
  if (stats) stats->duplicates += duplicates;
  return corpus;
}

std::vector<AuthorRecord> load_corpus(const std::filesystem::path& path, LoadStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path.string());

  LoadStats local;
  std::vector<Post> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++local.lines;
    Post post;
    try {
      const auto j = nlohmann::json::parse(line);
      post.author_id = j.at("author").get<std::string>();
      post.created_at = parse_created(j.at("created_utc"));
      if (j.contains("subreddit") && j["subreddit"].is_string()) post.subreddit = j["subreddit"].get<std::string>();
      post.text = j.at("body").get<std::string>();
    } catch (const std::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed post record: " + e.what());
    }
    if (post.author_id.empty()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": empty author");
    }
    if (post.created_at < 0) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": negative created_utc");
    }
    if (trim(post.text).empty()) {
      ++local.empty_bodies;
      continue;
    }
    posts.push_back(std::move(post));
  }
  auto corpus = group_posts(std::move(posts), &local);
  if (stats) *stats = local;
  return corpus;
}

void save_corpus(const std::vector<AuthorRecord>& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus " + path.string());
  for (const auto& author : corpus) {
    for (const auto& p : author.posts) {
      nlohmann::json j{{"author", p.author_id}, {"created_utc", p.created_at}, {"subreddit", p.subreddit},
                       {"body", p.text}};
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

LabelTable load_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open label file " + path.string());
  LabelTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "author_id,attribute,value") {
        throw DataError(path.string() + ": expected header 'author_id,attribute,value'");
      }
      continue;
    }
    if (trim(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected three fields");
    }
    table[line.substr(0, c1)][line.substr(c1 + 1, c2 - c1 - 1)] = line.substr(c2 + 1);
  }
  return table;
}

void save_labels(const LabelTable& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write label file " + path.string());
  out << "author_id,attribute,value\n";
  for (const auto& [author, attrs] : labels) {
    for (const auto& [attr, value] : attrs) out << author << ',' << attr << ',' << value << '\n';
  }
}

void attach_labels(std::vector<AuthorRecord>& corpus, const LabelTable& labels) {
  for (auto& author : corpus) {
    if (auto it = labels.find(author.author_id); it != labels.end()) author.labels = it->second;
  }
}

AuthorRecord filter_posts(const AuthorRecord& author, const TokenizerVocab& vocab, const FilterPolicy& policy,
                          DropCounts* drops) {
  policy.validate();
  DropCounts local;
  const bool check_rep = std::find(policy.junk_rules.begin(), policy.junk_rules.end(), JunkRule::char_repetition) !=
                         policy.junk_rules.end();
  const bool check_url =
      std::find(policy.junk_rules.begin(), policy.junk_rules.end(), JunkRule::url_only) != policy.junk_rules.end();

  std::set<std::string> keywords;
  for (const auto& k : policy.excluded_keywords) keywords.insert(to_lower(k));
  std::set<std::string> subreddits;
  for (const auto& s : policy.excluded_subreddits) subreddits.insert(to_lower(s));

  AuthorRecord out{author.author_id, {}, author.labels};
  for (const auto& post : author.posts) {
    if (check_url && is_url_only(post.text)) {
      ++local.url_only;
      continue;
    }
    if (check_rep && is_repetitive(post.text, policy.max_char_run_ratio)) {
      ++local.repetitive;
      continue;
    }
    if (!subreddits.empty() && subreddits.count(to_lower(post.subreddit))) {
      ++local.excluded;
      continue;
    }
    if (!keywords.empty()) {
      const auto words = basic_split(post.text);
      if (std::any_of(words.begin(), words.end(), [&](const auto& w) { return keywords.count(w) != 0; })) {
        ++local.excluded;
        continue;
      }
    }
    if (tokenize(post.text, vocab).size() < policy.min_tokens_per_post) {
      ++local.too_short;
      continue;
    }
    out.posts.push_back(post);
  }
  if (out.posts.size() > policy.max_posts_per_author) {
    const auto excess = out.posts.size() - policy.max_posts_per_author;
    local.over_cap += excess;
    out.posts.erase(out.posts.begin(), out.posts.begin() + static_cast<std::ptrdiff_t>(excess));
  }
  if (drops) {
    drops->too_short += local.too_short;
    drops->repetitive += local.repetitive;
    drops->url_only += local.url_only;
    drops->excluded += local.excluded;
    drops->over_cap += local.over_cap;
  }
  return out;
}

std::vector<AuthorRecord> filter_authors(std::vector<AuthorRecord> corpus, const FilterPolicy& policy,
                                         DropCounts* drops) {
  policy.validate();
  const auto before = corpus.size();
  std::erase_if(corpus, [&](const AuthorRecord& a) { return a.posts.size() <= policy.min_posts_per_author; });
  if (drops) drops->authors_too_few_posts += before - corpus.size();
  return corpus;
}

std::vector<std::size_t> choose_heldout_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) throw DataError("cannot hold out " + std::to_string(count) + " of " + std::to_string(n) + " posts");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

AuthorshipSplit split_authorship_eval(const std::vector<AuthorRecord>& corpus, std::size_t min_valid_posts,
                                      std::size_t test_posts_per_author, std::uint64_t seed) {
  if (min_valid_posts <= test_posts_per_author) {
    throw ConfigError("min_valid_posts must exceed test_posts_per_author");
  }
  AuthorshipSplit split;
  for (const auto& author : corpus) {
    if (author.posts.size() <= min_valid_posts) continue;
    const auto held = choose_heldout_indices(author.posts.size(), test_posts_per_author,
                                             mix_seed(seed, author.author_id));
    AuthorRecord train{author.author_id, {}, author.labels};
    AuthorRecord test{author.author_id, {}, author.labels};
    std::size_t h = 0;
    for (std::size_t i = 0; i < author.posts.size(); ++i) {
      if (h < held.size() && held[h] == i) {
        test.posts.push_back(author.posts[i]);
        ++h;
      } else {
        train.posts.push_back(author.posts[i]);
      }
    }
    split.train.push_back(std::move(train));
    split.test.push_back(std::move(test));
  }
  if (split.train.empty()) {
    throw DataError("no author has more than " + std::to_string(min_valid_posts) + " valid posts");
  }
  return split;
}

std::string_view mbti_axis_name(MbtiAxis axis) {
  switch (axis) {
    case MbtiAxis::ei: return "E/I";
    case MbtiAxis::sn: return "S/N";
    case MbtiAxis::tf: return "T/F";
    case MbtiAxis::jp: return "J/P";
  }
  return "?";
}

std::array<char, 4> mbti_axis_labels(std::string_view type_code) {
  static constexpr std::array<std::array<char, 2>, 4> kLetters{{{'I', 'E'}, {'N', 'S'}, {'T', 'F'}, {'J', 'P'}}};
  if (type_code.size() != 4) throw DataError("MBTI code must have 4 letters: '" + std::string(type_code) + "'");
  std::array<char, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(type_code[i])));
    if (c != kLetters[i][0] && c != kLetters[i][1]) {
      throw DataError("invalid MBTI code '" + std::string(type_code) + "'");
    }
    out[i] = c;
  }
  return out;
}

}  // namespace a2v
