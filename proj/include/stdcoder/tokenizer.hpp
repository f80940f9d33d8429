#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stdcoder/corpus.hpp"

namespace stdcoder {

const std::vector<std::string>& default_separators(Language lang);
const std::vector<std::string>& default_keywords(Language lang);

// Frequent-word slots that make the Java dictionary 111 wide (116 model inputs).
std::size_t default_top_n(Language lang);

// Index layout: separators, then keywords, then frequent words.
class TokenDictionary {
 public:
  TokenDictionary() = default;
  TokenDictionary(Language lang, std::vector<std::string> separators, std::vector<std::string> keywords,
                  std::vector<std::string> frequent_words);

  Language language() const { return language_; }
  const std::vector<std::string>& separators() const { return separators_; }
  const std::vector<std::string>& keywords() const { return keywords_; }
  const std::vector<std::string>& frequent_words() const { return frequent_words_; }

  std::size_t size() const { return separators_.size() + keywords_.size() + frequent_words_.size(); }
  // -1 when the token is not in the dictionary.
  std::ptrdiff_t index_of(std::string_view token) const;
  const std::string& token_at(std::size_t index) const;

  // Separators sorted by decreasing length for longest-match scanning.
  const std::vector<std::string>& separators_by_length() const { return by_length_; }

  nlohmann::json to_json() const;
  static TokenDictionary from_json(const nlohmann::json& j);
  std::uint64_t hash() const;

 private:
  void rebuild_index();

  Language language_ = Language::other;
  std::vector<std::string> separators_;
  std::vector<std::string> keywords_;
  std::vector<std::string> frequent_words_;
  std::vector<std::string> by_length_;
  std::unordered_map<std::string, std::size_t> index_;
};

TokenDictionary build_dictionary(const CommitCorpus& corpus, Language lang, std::size_t top_n);

enum class TokenKind { separator, word, other };

struct TokenStream {
  std::vector<std::string> tokens;
  std::vector<TokenKind> kinds;
  std::size_t whitespace_count = 0;
};

// Words are maximal runs of [A-Za-z0-9_$]; separators match greedily by
// longest length; whitespace is tallied, not emitted. Bytes matching neither
// become single-byte `other` tokens.
TokenStream tokenize(std::string_view text, const TokenDictionary& dict);

inline constexpr std::size_t kSurfaceFeatures = 5;

struct ChangeFeatures {
  std::vector<std::uint32_t> token_counts;
  std::uint64_t files_touched = 0;
  std::uint64_t lines_added = 0;
  std::uint64_t lines_deleted = 0;
  std::uint64_t whitespace_count = 0;
  std::uint64_t total_tokens = 0;

  std::size_t width() const { return token_counts.size() + kSurfaceFeatures; }
  // Counts followed by files_touched, lines_added, lines_deleted, whitespace, total_tokens.
  std::vector<double> raw() const;
  // log(1 + raw), the model input before standardization.
  std::vector<double> transformed() const;
};

// Uses the diffs whose language matches the dictionary.
ChangeFeatures featurize(const Commit& commit, const TokenDictionary& dict);

nlohmann::json features_to_json(const std::string& commit_id, const ChangeFeatures& f);
ChangeFeatures features_from_json(const nlohmann::json& j);

}  // namespace stdcoder
