#include "stdcoder/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace stdcoder {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Language, std::string_view>, 9> kLanguageNames{{
    {Language::java, "java"},
    {Language::python, "python"},
    {Language::cpp, "cpp"},
    {Language::c, "c"},
    {Language::javascript, "javascript"},
    {Language::typescript, "typescript"},
    {Language::go, "go"},
    {Language::csharp, "csharp"},
    {Language::other, "other"},
}};

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

// Runs a command and returns its standard output; throws on non-zero exit.
std::string run_capture(const std::string& cmd) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen((cmd + " 2>/dev/null").c_str(), "r"), pclose);
  if (!pipe) throw DataError("failed to run: " + cmd);
  std::string out;
  std::array<char, 65536> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), n);
  int status = pclose(pipe.release());
  if (status != 0) throw DataError("command failed: " + cmd);
  return out;
}

bool valid_utf8_text(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c == 0) return false;
    int extra;
    if (c < 0x80)
      extra = 0;
    else if ((c >> 5) == 0x6)
      extra = 1;
    else if ((c >> 4) == 0xe)
      extra = 2;
    else if ((c >> 3) == 0x1e)
      extra = 3;
    else
      return false;
    if (i + static_cast<std::size_t>(extra) >= s.size()) return false;
    for (int k = 1; k <= extra; ++k)
      if ((static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) >> 6) != 0x2) return false;
    i += static_cast<std::size_t>(extra) + 1;
  }
  return true;
}

std::vector<std::string_view> path_components(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    auto slash = path.find('/', start);
    if (slash == std::string_view::npos) slash = path.size();
    if (slash > start) parts.push_back(path.substr(start, slash - start));
    start = slash + 1;
  }
  return parts;
}

struct RawChange {
  std::string old_blob;
  std::string new_blob;
  std::string path;
};

constexpr std::string_view kNullSha = "0000000000000000000000000000000000000000";

// Parses `git diff-tree -r -z --raw --no-abbrev` output.
std::vector<RawChange> parse_raw_diff(std::string_view out) {
  std::vector<RawChange> changes;
  std::size_t pos = 0;
  while (pos < out.size()) {
    auto meta_end = out.find('\0', pos);
    if (meta_end == std::string_view::npos) break;
    std::string_view meta = out.substr(pos, meta_end - pos);
    pos = meta_end + 1;
    auto path_end = out.find('\0', pos);
    if (path_end == std::string_view::npos) path_end = out.size();
    std::string_view path = out.substr(pos, path_end - pos);
    pos = path_end + 1;
    if (meta.empty() || meta.front() != ':') continue;
    std::istringstream fields{std::string(meta.substr(1))};
    std::string old_mode, new_mode, old_sha, new_sha, status;
    fields >> old_mode >> new_mode >> old_sha >> new_sha >> status;
    // Submodules (mode 160000) carry no text.
    if (old_mode == "160000" || new_mode == "160000") continue;
    changes.push_back({old_sha, new_sha, std::string(path)});
  }
  return changes;
}

CommitCorpus ingest_ndjson(const std::filesystem::path& path, const FilterRules& rules) {
  CommitCorpus raw = read_corpus_ndjson(path);
  CommitCorpus out;
  for (auto& c : raw.commits) {
    std::vector<FileDiff> kept;
    for (auto& d : c.diffs) {
      Language lang;
      if (!rules.path_allowed(d.path, lang)) {
        ++out.stats.files_filtered;
        continue;
      }
      // Only the changed lines are available in an export.
      std::vector<std::string> lines = d.added;
      lines.insert(lines.end(), d.deleted.begin(), d.deleted.end());
      if (!rules.content_allowed(lines)) {
        ++out.stats.files_filtered;
        continue;
      }
      d.language = lang;
      kept.push_back(std::move(d));
      ++out.stats.files_kept;
    }
    c.diffs = std::move(kept);
    out.commits.push_back(std::move(c));
  }
  return out;
}

CommitCorpus ingest_repository(const std::filesystem::path& repo, const FilterRules& rules) {
  const std::string git = "git -C " + shell_quote(repo.string()) + " ";
  std::string project = std::filesystem::weakly_canonical(repo).filename().string();

  std::string log = run_capture(git + "log --topo-order --reverse --format='%H%x09%P%x09%ae%x09%at' HEAD");

  struct Header {
    std::string id;
    std::string first_parent;
    std::string author;
    std::int64_t minute;
  };
  std::vector<Header> headers;
  std::istringstream lines(log);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 4) throw DataError("unexpected git log line: " + line);
    std::string parent = f[1].substr(0, f[1].find(' '));
    std::int64_t seconds = std::stoll(f[3]);
    std::int64_t minute = seconds >= 0 ? seconds / 60 : -((-seconds + 59) / 60);
    headers.push_back({f[0], parent, f[2], minute});
  }

  CommitCorpus corpus;
  corpus.commits.resize(headers.size());
  std::vector<IngestStats> stats(headers.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < headers.size(); ++i) {
    const auto& h = headers[i];
    Commit c;
    c.commit_id = h.id;
    c.author_id = h.author;
    c.project_id = project;
    c.author_time = h.minute;
    std::string cmd = git + "diff-tree -r -z --raw --no-abbrev --no-renames --no-commit-id ";
    cmd += h.first_parent.empty() ? "--root " + h.id : h.first_parent + " " + h.id;
    auto changes = parse_raw_diff(run_capture(cmd));
    for (const auto& ch : changes) {
      Language lang;
      if (!rules.path_allowed(ch.path, lang)) {
        ++stats[i].files_filtered;
        continue;
      }
      auto blob = [&](const std::string& sha) -> std::string {
        if (sha == kNullSha) return {};
        return run_capture(git + "cat-file blob " + sha);
      };
      std::string before = blob(ch.old_blob);
      std::string after = blob(ch.new_blob);
      if (!valid_utf8_text(before) || !valid_utf8_text(after)) {
        ++stats[i].files_undecodable;
        continue;
      }
      auto after_lines = split_lines(after);
      auto before_lines = split_lines(before);
      const auto& judged = ch.new_blob == kNullSha ? before_lines : after_lines;
      if (!rules.content_allowed(judged)) {
        ++stats[i].files_filtered;
        continue;
      }
      LineDiff d = compute_diff(before_lines, after_lines);
      c.diffs.push_back({ch.path, lang, std::move(d.added), std::move(d.deleted)});
      ++stats[i].files_kept;
    }
    corpus.commits[i] = std::move(c);
  }
  for (const auto& s : stats) {
    corpus.stats.files_kept += s.files_kept;
    corpus.stats.files_filtered += s.files_filtered;
    corpus.stats.files_undecodable += s.files_undecodable;
  }
  if (corpus.stats.files_undecodable > 0)
    std::cerr << "warning: skipped " << corpus.stats.files_undecodable << " undecodable file(s)\n";
  return corpus;
}

}  // namespace

std::string_view language_name(Language lang) {
  for (auto [l, name] : kLanguageNames)
    if (l == lang) return name;
  return "other";
}

Language language_from_name(std::string_view name) {
  for (auto [l, n] : kLanguageNames)
    if (n == name) return l;
  throw DataError("unknown language: " + std::string(name));
}

FilterRules FilterRules::defaults() {
  FilterRules r;
  r.extension_allowlist = {
      {Language::java, {".java"}},
      {Language::python, {".py"}},
      {Language::cpp, {".cpp", ".cc", ".cxx", ".hpp", ".hh", ".hxx"}},
      {Language::c, {".c", ".h"}},
      {Language::javascript, {".js", ".jsx", ".mjs"}},
      {Language::typescript, {".ts", ".tsx"}},
      {Language::go, {".go"}},
      {Language::csharp, {".cs"}},
  };
  r.excluded_fragments = {"vendor", "third_party", "generated", "dist", "build"};
  r.minified_mean_line_length = 200.0;
  r.generated_markers = {"DO NOT EDIT", "@generated"};
  r.generated_scan_lines = 5;
  return r;
}

FilterRules FilterRules::from_json(const json& j) {
  FilterRules r = defaults();
  if (j.contains("extensions")) {
    r.extension_allowlist.clear();
    for (auto& [lang, exts] : j.at("extensions").items())
      r.extension_allowlist[language_from_name(lang)] = exts.get<std::vector<std::string>>();
  }
  if (j.contains("exclude_fragments"))
    r.excluded_fragments = j.at("exclude_fragments").get<std::vector<std::string>>();
  if (j.contains("minified_mean_line_length"))
    r.minified_mean_line_length = j.at("minified_mean_line_length").get<double>();
  if (j.contains("generated_markers"))
    r.generated_markers = j.at("generated_markers").get<std::vector<std::string>>();
  if (j.contains("generated_scan_lines")) r.generated_scan_lines = j.at("generated_scan_lines").get<int>();
  return r;
}

json FilterRules::to_json() const {
  json exts = json::object();
  for (const auto& [lang, list] : extension_allowlist) exts[std::string(language_name(lang))] = list;
  return {{"extensions", exts},
          {"exclude_fragments", excluded_fragments},
          {"minified_mean_line_length", minified_mean_line_length},
          {"generated_markers", generated_markers},
          {"generated_scan_lines", generated_scan_lines}};
}

bool FilterRules::path_allowed(std::string_view path, Language& lang) const {
  auto parts = path_components(path);
  if (parts.empty()) return false;
  for (auto part : parts)
    for (const auto& frag : excluded_fragments)
      if (part == frag) return false;
  auto name = parts.back();
  auto dot = name.rfind('.');
  if (dot == std::string_view::npos) return false;
  auto ext = name.substr(dot);
  for (const auto& [l, exts] : extension_allowlist) {
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) {
      lang = l;
      return true;
    }
  }
  return false;
}

bool FilterRules::content_allowed(std::span<const std::string> lines) const {
  if (!lines.empty()) {
    double total = 0;
    for (const auto& l : lines) total += static_cast<double>(l.size());
    if (total / static_cast<double>(lines.size()) > minified_mean_line_length) return false;
  }
  auto scan = std::min<std::size_t>(lines.size(), static_cast<std::size_t>(std::max(generated_scan_lines, 0)));
  for (std::size_t i = 0; i < scan; ++i)
    for (const auto& marker : generated_markers)
      if (lines[i].find(marker) != std::string::npos) return false;
  return true;
}

CommitCorpus ingest_git_log(const std::filesystem::path& path, const FilterRules& rules) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(path, ec)) return ingest_ndjson(path, rules);
  if (!std::filesystem::is_directory(path, ec)) throw DataError("unreadable repository: " + path.string());
  try {
    run_capture("git -C " + shell_quote(path.string()) + " rev-parse --git-dir");
  } catch (const DataError&) {
    throw DataError("not a git repository: " + path.string());
  }
  return ingest_repository(path, rules);
}

std::vector<Commit> squash_commits(std::span<const Commit> commits, int threshold_minutes) {
  std::vector<Commit> out;
  for (const auto& c : commits) {
    if (!out.empty() && c.author_time - out.back().author_time < threshold_minutes) {
      Commit& run = out.back();
      run.commit_id = c.commit_id;
      run.project_id = c.project_id;
      run.author_time = c.author_time;
      run.diffs.insert(run.diffs.end(), c.diffs.begin(), c.diffs.end());
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string stream_of(const Commit& c, StreamKey key) {
  if (key == StreamKey::author) return c.author_id;
  return c.author_id + '\x1f' + c.project_id;
}

CommitCorpus squash_corpus(const CommitCorpus& corpus, int threshold_minutes, StreamKey key) {
  std::map<std::string, std::vector<Commit>> streams;
  for (const auto& c : corpus.commits) streams[stream_of(c, key)].push_back(c);
  CommitCorpus out;
  out.stats = corpus.stats;
  for (auto& [_, list] : streams) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Commit& a, const Commit& b) { return a.author_time < b.author_time; });
    auto squashed = threshold_minutes > 0 ? squash_commits(list, threshold_minutes) : list;
    for (auto& c : squashed) out.commits.push_back(std::move(c));
  }
  std::stable_sort(out.commits.begin(), out.commits.end(), [](const Commit& a, const Commit& b) {
    return std::tie(a.author_time, a.commit_id) < std::tie(b.author_time, b.commit_id);
  });
  return out;
}

namespace {

std::string strip_patch_path(std::string_view p) {
  while (!p.empty() && (p.back() == '\r' || p.back() == '\t' || p.back() == ' ')) p.remove_suffix(1);
  if (const auto tab = p.find('\t'); tab != std::string_view::npos) p = p.substr(0, tab);
  if (p.starts_with("a/") || p.starts_with("b/")) p.remove_prefix(2);
  return std::string(p);
}

// Count after the comma in "-a,b" / "+c,d"; 1 when omitted.
std::size_t hunk_count(std::string_view range) {
  const auto comma = range.find(',');
  if (comma == std::string_view::npos) return 1;
  return static_cast<std::size_t>(std::stoul(std::string(range.substr(comma + 1))));
}

}  // namespace

Commit parse_patch(std::string_view patch, const FilterRules& rules) {
  Commit c;
  c.commit_id = "patch";
  auto lines = split_lines(patch);
  std::vector<FileDiff> files;
  std::string old_path, new_path;
  auto finish = [&](FileDiff& d) {
    if (d.added.empty() && d.deleted.empty()) return;
    files.push_back(std::move(d));
  };
  FileDiff current;
  bool have_file = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.starts_with("diff --git ")) {
      if (have_file) finish(current);
      current = FileDiff{};
      have_file = false;
      old_path.clear();
      new_path.clear();
    } else if (line.starts_with("--- ")) {
      old_path = strip_patch_path(std::string_view(line).substr(4));
    } else if (line.starts_with("+++ ")) {
      if (have_file) finish(current);
      new_path = strip_patch_path(std::string_view(line).substr(4));
      current = FileDiff{};
      current.path = new_path == "/dev/null" ? old_path : new_path;
      have_file = true;
    } else if (line.starts_with("@@ ")) {
      if (!have_file) throw DataError("patch hunk appears before a file header");
      const auto minus = line.find(" -");
      const auto plus = line.find(" +", minus == std::string::npos ? 0 : minus + 2);
      if (minus == std::string::npos || plus == std::string::npos) throw DataError("malformed hunk header: " + line);
      const auto end = line.find(' ', plus + 2);
      std::size_t old_left = hunk_count(std::string_view(line).substr(minus + 2, plus - minus - 2));
      std::size_t new_left = hunk_count(std::string_view(line).substr(plus + 2, end - plus - 2));
      while ((old_left > 0 || new_left > 0) && i + 1 < lines.size()) {
        const std::string& body = lines[++i];
        if (body.starts_with("\\")) continue;  // "\ No newline at end of file"
        const char tag = body.empty() ? ' ' : body[0];
        const std::string text = body.empty() ? std::string() : body.substr(1);
        if (tag == '+') {
          current.added.push_back(text);
          if (new_left) --new_left;
        } else if (tag == '-') {
          current.deleted.push_back(text);
          if (old_left) --old_left;
        } else {
          if (old_left) --old_left;
          if (new_left) --new_left;
        }
      }
    }
  }
  if (have_file) finish(current);
  for (auto& d : files) {
    Language lang;
    if (!rules.path_allowed(d.path, lang)) continue;
    const auto& judged = d.added.empty() ? d.deleted : d.added;
    if (!rules.content_allowed(judged)) continue;
    d.language = lang;
    c.diffs.push_back(std::move(d));
  }
  return c;
}

json commit_to_json(const Commit& c) {
  json diffs = json::array();
  for (const auto& d : c.diffs)
    diffs.push_back({{"path", d.path},
                     {"lang", std::string(language_name(d.language))},
                     {"added", d.added},
                     {"deleted", d.deleted}});
  return {{"commit", c.commit_id},
          {"author", c.author_id},
          {"project", c.project_id},
          {"author_time_utc_min", c.author_time},
          {"diffs", diffs}};
}

Commit commit_from_json(const json& j) {
  Commit c;
  c.commit_id = j.at("commit").get<std::string>();
  c.author_id = j.at("author").get<std::string>();
  c.project_id = j.value("project", std::string{});
  c.author_time = j.at("author_time_utc_min").get<std::int64_t>();
  for (const auto& d : j.value("diffs", json::array())) {
    FileDiff fd;
    fd.path = d.at("path").get<std::string>();
    fd.language = language_from_name(d.value("lang", std::string("other")));
    fd.added = d.value("added", std::vector<std::string>{});
    fd.deleted = d.value("deleted", std::vector<std::string>{});
    c.diffs.push_back(std::move(fd));
  }
  return c;
}

std::string corpus_to_ndjson(const CommitCorpus& corpus) {
  std::string out;
  for (const auto& c : corpus.commits) {
    out += commit_to_json(c).dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

CommitCorpus read_corpus_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  CommitCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.commits.push_back(commit_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace stdcoder
