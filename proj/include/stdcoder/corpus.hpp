#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stdcoder/common.hpp"

namespace stdcoder {

enum class Language { java, python, cpp, c, javascript, typescript, go, csharp, other };

std::string_view language_name(Language lang);
Language language_from_name(std::string_view name);

// A modified line is represented as one deleted plus one added line.
struct FileDiff {
  std::string path;
  Language language = Language::other;
  std::vector<std::string> added;
  std::vector<std::string> deleted;
};

struct Commit {
  std::string commit_id;
  std::string author_id;
  std::string project_id;
  std::int64_t author_time = 0;  // UTC epoch minutes
  std::vector<FileDiff> diffs;
};

struct FilterRules {
  std::map<Language, std::vector<std::string>> extension_allowlist;
  std::vector<std::string> excluded_fragments;
  double minified_mean_line_length = 200.0;
  std::vector<std::string> generated_markers;
  int generated_scan_lines = 5;

  static FilterRules defaults();
  static FilterRules from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // True when the extension is allowlisted and no path component is excluded;
  // lang receives the language of the extension.
  bool path_allowed(std::string_view path, Language& lang) const;
  bool content_allowed(std::span<const std::string> lines) const;
};

struct IngestStats {
  std::size_t files_kept = 0;
  std::size_t files_filtered = 0;
  std::size_t files_undecodable = 0;
};

struct CommitCorpus {
  std::vector<Commit> commits;
  IngestStats stats;
};

struct LineDiff {
  std::vector<std::string> added;
  std::vector<std::string> deleted;
};

std::vector<std::string> split_lines(std::string_view text);

// Minimal line-level edit script (shortest edit script == LCS).
LineDiff compute_diff(std::string_view parent_text, std::string_view child_text);
LineDiff compute_diff(std::span<const std::string> parent, std::span<const std::string> child);

// Reads a git repository (first-parent diffs) or an NDJSON commit export.
CommitCorpus ingest_git_log(const std::filesystem::path& path, const FilterRules& rules);

// Merges maximal runs whose successive gaps are below threshold_minutes.
// Input must be one stream sorted by author_time.
std::vector<Commit> squash_commits(std::span<const Commit> commits, int threshold_minutes = 2);

enum class StreamKey { author, author_project };

std::string stream_of(const Commit& c, StreamKey key);

// Groups by stream, sorts each stream by time and squashes it. Output is
// ordered by (author_time, commit_id).
CommitCorpus squash_corpus(const CommitCorpus& corpus, int threshold_minutes, StreamKey key);

// Parses a unified diff (git diff / format-patch output) into one commit,
// applying the path and content filters. Hunk headers drive line counts, so
// added lines that begin with "++" are not mistaken for file headers.
Commit parse_patch(std::string_view patch, const FilterRules& rules);

nlohmann::json commit_to_json(const Commit& c);
Commit commit_from_json(const nlohmann::json& j);
std::string corpus_to_ndjson(const CommitCorpus& corpus);
CommitCorpus read_corpus_ndjson(const std::filesystem::path& path);

}  // namespace stdcoder
