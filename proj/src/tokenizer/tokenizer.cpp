#include "stdcoder/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace stdcoder {

using nlohmann::json;

namespace {

const std::vector<std::string> kJavaSeparators = {
    "(", ")", "{", "}", "[", "]", ";", ",", ".", "@", "=", ">", "<", "!",
    "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%", "\"", "'",
    "==", "<=", ">=", "!=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "&=",
    "|=", "^=", "%=", "<<", ">>", ">>>", "<<=", ">>=", ">>>=", "->", "::", "...",
};

const std::vector<std::string> kGenericSeparators = [] {
  auto v = kJavaSeparators;
  for (const char* s : {"#", "\\", "`", "**", "//", ":=", "=>"}) v.emplace_back(s);
  return v;
}();

const std::vector<std::string> kJavaKeywords = {
    "abstract", "assert",     "boolean",   "break",     "byte",      "case",         "catch",
    "char",     "class",      "const",     "continue",  "default",   "do",           "double",
    "else",     "enum",       "extends",   "final",     "finally",   "float",        "for",
    "goto",     "if",         "implements", "import",   "instanceof", "int",         "interface",
    "long",     "native",     "new",       "package",   "private",   "protected",    "public",
    "return",   "short",      "static",    "strictfp",  "super",     "switch",       "synchronized",
    "this",     "throw",      "throws",    "transient", "try",       "void",         "volatile",
    "while",
};

const std::vector<std::string> kPythonKeywords = {
    "False", "None",   "True",  "and",   "as",     "assert", "async", "await",    "break",
    "class", "continue", "def", "del",   "elif",   "else",   "except", "finally", "for",
    "from",  "global", "if",    "import", "in",    "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise", "return", "try",   "while",  "with",  "yield",
};

const std::vector<std::string> kCKeywords = {
    "auto",   "break",  "case",     "char",   "const",    "continue", "default",  "do",
    "double", "else",   "enum",     "extern", "float",    "for",      "goto",     "if",
    "inline", "int",    "long",     "register", "restrict", "return", "short",    "signed",
    "sizeof", "static", "struct",   "switch", "typedef",  "union",    "unsigned", "void",
    "volatile", "while",
};

const std::vector<std::string> kCppKeywords = [] {
  auto v = kCKeywords;
  for (const char* s : {"bool", "catch", "class", "constexpr", "const_cast", "decltype", "delete",
                        "dynamic_cast", "explicit", "false", "friend", "mutable", "namespace", "new",
                        "noexcept", "nullptr", "operator", "private", "protected", "public",
                        "reinterpret_cast", "static_assert", "static_cast", "template", "this",
                        "throw", "true", "try", "typename", "using", "virtual"})
    v.emplace_back(s);
  return v;
}();

const std::vector<std::string> kJavaScriptKeywords = {
    "async",  "await",   "break",  "case",   "catch",  "class",      "const",  "continue",
    "debugger", "default", "delete", "do",   "else",   "export",     "extends", "finally",
    "for",    "function", "if",    "import", "in",     "instanceof", "let",    "new",
    "return", "super",   "switch", "this",   "throw",  "try",        "typeof", "var",
    "void",   "while",   "with",   "yield",
};

const std::vector<std::string> kGoKeywords = {
    "break",  "case",   "chan",      "const", "continue", "default", "defer",  "else",  "fallthrough",
    "for",    "func",   "go",        "goto",  "if",       "import",  "interface", "map", "package",
    "range",  "return", "select",    "struct", "switch",  "type",    "var",
};

const std::vector<std::string> kNoKeywords;

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '$';
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

const std::vector<std::string>& default_separators(Language lang) {
  return lang == Language::java ? kJavaSeparators : kGenericSeparators;
}

const std::vector<std::string>& default_keywords(Language lang) {
  switch (lang) {
    case Language::java: return kJavaKeywords;
    case Language::python: return kPythonKeywords;
    case Language::c: return kCKeywords;
    case Language::cpp: return kCppKeywords;
    case Language::javascript:
    case Language::typescript: return kJavaScriptKeywords;
    case Language::go: return kGoKeywords;
    default: return kNoKeywords;
  }
}

std::size_t default_top_n(Language lang) {
  if (lang == Language::java) return 111 - kJavaSeparators.size() - kJavaKeywords.size();
  return 100;
}

TokenDictionary::TokenDictionary(Language lang, std::vector<std::string> separators,
                                 std::vector<std::string> keywords, std::vector<std::string> frequent_words)
    : language_(lang),
      separators_(std::move(separators)),
      keywords_(std::move(keywords)),
      frequent_words_(std::move(frequent_words)) {
  rebuild_index();
}

void TokenDictionary::rebuild_index() {
  index_.clear();
  std::size_t i = 0;
  for (const auto* list : {&separators_, &keywords_, &frequent_words_})
    for (const auto& tok : *list) {
      if (!index_.emplace(tok, i).second) throw DataError("duplicate dictionary token: " + tok);
      ++i;
    }
  by_length_ = separators_;
  std::stable_sort(by_length_.begin(), by_length_.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
}

std::ptrdiff_t TokenDictionary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

const std::string& TokenDictionary::token_at(std::size_t index) const {
  if (index < separators_.size()) return separators_[index];
  index -= separators_.size();
  if (index < keywords_.size()) return keywords_[index];
  index -= keywords_.size();
  return frequent_words_.at(index);
}

json TokenDictionary::to_json() const {
  auto listing = [](const std::vector<std::string>& list, std::size_t base) {
    json arr = json::array();
    for (std::size_t i = 0; i < list.size(); ++i) arr.push_back({{"token", list[i]}, {"index", base + i}});
    return arr;
  };
  return {{"language", std::string(language_name(language_))},
          {"separators", listing(separators_, 0)},
          {"keywords", listing(keywords_, separators_.size())},
          {"frequent_words", listing(frequent_words_, separators_.size() + keywords_.size())},
          {"size", size()},
          {"hash", hex64(hash())}};
}

TokenDictionary TokenDictionary::from_json(const json& j) {
  auto read = [&](const char* key, std::size_t base) {
    std::vector<std::string> out;
    for (const auto& e : j.at(key)) {
      if (e.at("index").get<std::size_t>() != base + out.size())
        throw DataError(std::string("dictionary indices out of order in ") + key);
      out.push_back(e.at("token").get<std::string>());
    }
    return out;
  };
  auto seps = read("separators", 0);
  auto kws = read("keywords", seps.size());
  auto words = read("frequent_words", seps.size() + kws.size());
  return TokenDictionary(language_from_name(j.at("language").get<std::string>()), std::move(seps),
                         std::move(kws), std::move(words));
}

std::uint64_t TokenDictionary::hash() const {
  std::string blob(language_name(language_));
  for (const auto* list : {&separators_, &keywords_, &frequent_words_}) {
    blob += '\x1e';
    for (const auto& t : *list) {
      blob += t;
      blob += '\x1f';
    }
  }
  return fnv1a64(blob);
}

TokenStream tokenize(std::string_view text, const TokenDictionary& dict) {
  TokenStream out;
  const auto& seps = dict.separators_by_length();
  std::size_t i = 0;
  while (i < text.size()) {
    auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++out.whitespace_count;
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      out.tokens.emplace_back(text.substr(i, j - i));
      out.kinds.push_back(TokenKind::word);
      i = j;
      continue;
    }
    bool matched = false;
    for (const auto& sep : seps) {
      if (text.compare(i, sep.size(), sep) == 0) {
        out.tokens.push_back(sep);
        out.kinds.push_back(TokenKind::separator);
        i += sep.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.tokens.emplace_back(text.substr(i, 1));
      out.kinds.push_back(TokenKind::other);
      ++i;
    }
  }
  return out;
}

TokenDictionary build_dictionary(const CommitCorpus& corpus, Language lang, std::size_t top_n) {
  const auto& seps = default_separators(lang);
  const auto& kws = default_keywords(lang);
  TokenDictionary scanner(lang, seps, kws, {});

  std::map<std::string, std::uint64_t> counts;
  bool any = false;
  for (const auto& c : corpus.commits)
    for (const auto& d : c.diffs) {
      if (d.language != lang) continue;
      any = true;
      for (const auto* lines : {&d.added, &d.deleted})
        for (const auto& line : *lines) {
          auto ts = tokenize(line, scanner);
          for (std::size_t k = 0; k < ts.tokens.size(); ++k)
            if (ts.kinds[k] == TokenKind::word && scanner.index_of(ts.tokens[k]) < 0) ++counts[ts.tokens[k]];
        }
    }
  if (!any) throw DataError("corpus has no " + std::string(language_name(lang)) + " diffs");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  // counts is lexicographically ordered, so a stable sort keeps ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  for (std::size_t i = 0; i < ranked.size() && i < top_n; ++i) words.push_back(ranked[i].first);
  return TokenDictionary(lang, seps, kws, std::move(words));
}

std::vector<double> ChangeFeatures::raw() const {
  std::vector<double> v(token_counts.begin(), token_counts.end());
  for (auto x : {files_touched, lines_added, lines_deleted, whitespace_count, total_tokens})
    v.push_back(static_cast<double>(x));
  return v;
}

std::vector<double> ChangeFeatures::transformed() const {
  auto v = raw();
  for (auto& x : v) x = std::log1p(x);
  return v;
}

ChangeFeatures featurize(const Commit& commit, const TokenDictionary& dict) {
  ChangeFeatures f;
  f.token_counts.assign(dict.size(), 0);
  for (const auto& d : commit.diffs) {
    if (d.language != dict.language()) continue;
    ++f.files_touched;
    f.lines_added += d.added.size();
    f.lines_deleted += d.deleted.size();
    for (const auto* lines : {&d.added, &d.deleted})
      for (const auto& line : *lines) {
        auto ts = tokenize(line, dict);
        f.whitespace_count += ts.whitespace_count;
        f.total_tokens += ts.tokens.size();
        for (const auto& tok : ts.tokens) {
          auto idx = dict.index_of(tok);
          if (idx >= 0) ++f.token_counts[static_cast<std::size_t>(idx)];
        }
      }
  }
  return f;
}

json features_to_json(const std::string& commit_id, const ChangeFeatures& f) {
  return {{"commit", commit_id},
          {"token_counts", f.token_counts},
          {"files_touched", f.files_touched},
          {"lines_added", f.lines_added},
          {"lines_deleted", f.lines_deleted},
          {"whitespace_count", f.whitespace_count},
          {"total_tokens", f.total_tokens}};
}

ChangeFeatures features_from_json(const json& j) {
  ChangeFeatures f;
  f.token_counts = j.at("token_counts").get<std::vector<std::uint32_t>>();
  f.files_touched = j.at("files_touched").get<std::uint64_t>();
  f.lines_added = j.at("lines_added").get<std::uint64_t>();
  f.lines_deleted = j.at("lines_deleted").get<std::uint64_t>();
  f.whitespace_count = j.at("whitespace_count").get<std::uint64_t>();
  f.total_tokens = j.at("total_tokens").get<std::uint64_t>();
  return f;
}

}  // namespace stdcoder
