#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rccf {

/// Splits on whitespace/punctuation and lowercases. Tokens are maximal runs
/// of alphanumeric characters.
inline std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

/// Token table with two reserved ids: PAD = 0 and UNK = 1. Stored on disk as
/// one token per line; line number == id - 2.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kReserved = 2;

  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) throw std::invalid_argument("vocabulary: empty token");
      if (!index_.emplace(tokens_[i], static_cast<int>(i) + kReserved).second)
        throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }

  int size() const { return static_cast<int>(tokens_.size()) + kReserved; }

  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token_of(int id) const {
    if (id < kReserved || id >= size()) throw std::out_of_range("vocabulary: id out of range");
    return tokens_[id - kReserved];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string to_text() const {
    std::string s;
    for (const auto& t : tokens_) {
      s += t;
      s += '\n';
    }
    return s;
  }

  static Vocabulary from_text(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
      if (ch == '\n') {
        if (!cur.empty()) tokens.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return Vocabulary(std::move(tokens));
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("vocabulary: cannot write " + path);
    os << to_text();
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("vocabulary: cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_text(text);
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;
  int length() const { return static_cast<int>(ids.size()); }
};

inline TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
  const std::vector<std::string> words = split_tokens(text);
  if (words.empty()) throw std::invalid_argument("tokenize: empty expression");
  TokenSequence seq;
  seq.ids.reserve(words.size());
  for (const std::string& w : words) seq.ids.push_back(vocab.id_of(w));
  return seq;
}

/// Builds a vocabulary from a corpus of expressions; tokens are sorted so the
/// id assignment is independent of corpus order.
template <typename StringRange>
Vocabulary build_vocabulary(const StringRange& expressions) {
  std::set<std::string> uniq;
  for (const auto& text : expressions)
    for (const std::string& w : split_tokens(text)) uniq.insert(w);
  return Vocabulary(std::vector<std::string>(uniq.begin(), uniq.end()));
}

}  // namespace rccf
