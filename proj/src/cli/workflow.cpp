#include "workflow.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "stdcoder/analysis.hpp"
#include "stdcoder/stats.hpp"

namespace stdcoder::cli {

using nlohmann::json;

namespace {

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string line;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) line += ',';
    first = false;
    line += c;
  }
  line += '\n';
  return line;
}

// Quotes a text cell when it holds a separator or quote.
std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) { return format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }

// Empty unless repo is the top of a git work tree.
std::string git_head(const fs::path& repo) {
  if (!fs::exists(repo / ".git")) return {};
  std::string quoted = "'";
  for (char c : repo.string()) quoted += c == '\'' ? std::string("'\\''") : std::string(1, c);
  std::string cmd = "git -C " + quoted + "' rev-parse HEAD 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) return {};
  std::array<char, 128> buf{};
  std::string out;
  while (std::fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
  if (pclose(pipe.release()) != 0) return {};
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out;
}

struct Joined {
  std::vector<ChangeFeatures> changes;
  std::vector<const IntervalRecord*> intervals;
};

// Interval records that have a feature row, in interval order.
Joined join(const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals) {
  std::unordered_map<std::string, const ChangeFeatures*> by_commit;
  for (const auto& f : features) by_commit.emplace(f.commit, &f.features);
  Joined j;
  for (const auto& r : intervals) {
    auto it = by_commit.find(r.commit);
    if (it == by_commit.end()) continue;
    j.changes.push_back(*it->second);
    j.intervals.push_back(&r);
  }
  if (j.changes.empty()) throw DataError("no coding-time record matches a featurized commit");
  return j;
}

std::vector<ChangeFeatures> changes_of(const std::vector<FeatureRecord>& features) {
  std::vector<ChangeFeatures> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.features);
  return out;
}

}  // namespace

json read_json_file(const fs::path& path) {
  std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<json> read_ndjson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_ndjson_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n"; }

std::vector<IntervalRecord> read_intervals(const fs::path& path) {
  std::vector<IntervalRecord> out;
  for (const auto& j : read_ndjson(path)) {
    try {
      IntervalRecord r;
      r.commit = j.at("commit").get<std::string>();
      r.author = j.value("author", "");
      r.interval_minutes = j.at("interval_minutes").get<std::int64_t>();
      r.expected_hours = j.at("expected_hours").get<double>();
      r.samples = j.value("samples", std::vector<double>{});
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": bad coding-time record: " + e.what());
    }
  }
  return out;
}

std::string intervals_to_ndjson(const std::vector<IntervalRecord>& records) {
  std::string out;
  for (const auto& r : records)
    out += to_ndjson_line({{"commit", r.commit},
                           {"author", r.author},
                           {"interval_minutes", r.interval_minutes},
                           {"expected_hours", r.expected_hours},
                           {"samples", r.samples}});
  return out;
}

std::vector<FeatureRecord> read_features(const fs::path& path) {
  std::vector<FeatureRecord> out;
  for (const auto& j : read_ndjson(path)) {
    try {
      out.push_back({j.at("commit").get<std::string>(), features_from_json(j)});
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": bad feature record: " + e.what());
    }
  }
  return out;
}

TokenDictionary read_dictionary(const fs::path& path) {
  json j = read_json_file(path);
  try {
    return TokenDictionary::from_json(j);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

FilterRules read_rules(const fs::path& path) {
  json j = read_json_file(path);
  try {
    return FilterRules::from_json(j);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

AuthorModel read_author_model(const fs::path& path) {
  json j = read_json_file(path);
  try {
    AuthorModel m;
    m.author = j.at("author").get<std::string>();
    m.params = hmm::HmmParams::from_json(j.at("params"));
    m.window_start = j.at("window").at("start_utc_min").get<std::int64_t>();
    m.length = j.at("window").at("length_min").get<std::int64_t>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<AuthorModel> read_models_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("model directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json" &&
        !e.path().filename().string().ends_with(".manifest.json"))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<AuthorModel> models;
  for (const auto& f : files) models.push_back(read_author_model(f));
  std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) { return a.author < b.author; });
  for (std::size_t i = 1; i < models.size(); ++i)
    if (models[i].author == models[i - 1].author)
      throw DataError("two models in " + dir.string() + " belong to " + models[i].author);
  return models;
}

std::string model_file_name(const std::string& author) {
  std::string safe;
  for (unsigned char c : author) safe += std::isalnum(c) || c == '.' || c == '_' || c == '-' ? char(c) : '_';
  if (safe.empty() || safe.front() == '.') safe.insert(safe.begin(), '_');
  if (safe != author) safe += "-" + hex64(fnv1a64(author)).substr(0, 8);
  return safe + ".json";
}

bool is_git_repository(const fs::path& path) { return fs::is_directory(path) && !git_head(path).empty(); }

std::string hash_path(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::string head = git_head(path);
    if (!head.empty()) return hex64(fnv1a64("git:" + head));
    std::vector<fs::path> entries;
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file()) entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    std::string acc;
    for (const auto& e : entries) acc += fs::relative(e, path).generic_string() + '\0' + hash_path(e) + '\n';
    return hex64(fnv1a64(acc));
  }
  return hex64(fnv1a64(read_file(path)));
}

CommitCorpus ingest_source(const fs::path& source, const FilterRules& rules, int squash_minutes, StreamKey key) {
  if (!fs::exists(source)) throw DataError("input " + source.string() + " does not exist");
  CommitCorpus corpus = ingest_git_log(source, rules);
  if (squash_minutes > 0) return squash_corpus(corpus, squash_minutes, key);
  return corpus;
}

std::vector<Commit> author_commits(const CommitCorpus& corpus, const std::string& author) {
  std::vector<Commit> out;
  for (const auto& c : corpus.commits)
    if (c.author_id == author) out.push_back(c);
  return out;
}

std::vector<std::pair<std::string, std::size_t>> author_counts(const CommitCorpus& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : corpus.commits) ++counts[c.author_id];
  return {counts.begin(), counts.end()};
}

json train_author(const CommitCorpus& corpus, const std::string& author, const hmm::TrainConfig& config) {
  auto commits = author_commits(corpus, author);
  if (commits.empty()) throw DataError("author " + author + " has no commits in the corpus");
  auto timeline = hmm::timeline_from_commits(author, commits);
  auto result = hmm::train_hmm(timeline, config);
  return hmm::model_to_json(result.params, timeline, &result, &config);
}

std::vector<IntervalRecord> coding_times(const CommitCorpus& corpus, const std::vector<AuthorModel>& models,
                                         std::size_t samples, std::uint64_t root_seed) {
  std::vector<IntervalRecord> out;
  for (const auto& m : models) {
    auto commits = author_commits(corpus, m.author);
    if (commits.empty()) throw DataError("author " + m.author + " has a model but no commits in the corpus");
    auto timeline = hmm::timeline_from_commits(m.author, commits);
    if (timeline.window_start != m.window_start || timeline.length != m.length)
      throw DataError("model of " + m.author + " was trained on a different commit window; retrain it");
    for (auto& e : hmm::estimate_intervals(timeline, m.params, samples, interval_seed(root_seed, m.author))) {
      IntervalRecord r;
      r.commit = e.commit_id;
      r.author = m.author;
      r.interval_minutes = e.end - e.start;
      r.expected_hours = e.expected_hours;
      r.samples = std::move(e.samples);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string featurize_ndjson(const CommitCorpus& corpus, const TokenDictionary& dict) {
  std::vector<std::string> lines(corpus.commits.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < corpus.commits.size(); ++i) {
    auto f = featurize(corpus.commits[i], dict);
    if (f.files_touched > 0) lines[i] = to_ndjson_line(features_to_json(corpus.commits[i].commit_id, f));
  }
  std::string out;
  for (const auto& l : lines) out += l;
  return out;
}

mdn::MdnDataset mdn_dataset(const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals) {
  auto joined = join(features, intervals);
  mdn::MdnDataset data;
  data.width = static_cast<int>(joined.changes.front().width());
  for (std::size_t i = 0; i < joined.changes.size(); ++i) {
    const auto& r = *joined.intervals[i];
    if (joined.changes[i].width() != static_cast<std::size_t>(data.width))
      throw DataError("feature rows have different widths");
    auto row = joined.changes[i].transformed();
    if (r.samples.empty()) throw DataError("coding-time record for " + r.commit + " has no samples");
    for (double s : r.samples) data.add(row, s, r.commit);
  }
  return data;
}

std::string train_mdn_artifact(const std::vector<FeatureRecord>& features,
                               const std::vector<IntervalRecord>& intervals, const mdn::MdnTrainConfig& config,
                               const TokenDictionary* dict, std::ostream& log) {
  auto data = mdn_dataset(features, intervals);
  if (dict && static_cast<std::size_t>(data.width) != dict->size() + kSurfaceFeatures)
    throw DataError("feature width does not match the dictionary");
  auto result = mdn::train_mdn(data, config);
  if (dict) result.model.dictionary_hash = dict->hash();
  for (std::size_t e = 0; e < result.train_loss.size(); ++e)
    log << "epoch " << e + 1 << " train " << result.train_loss[e] << " holdout " << result.holdout_loss[e] << "\n";
  json extra = {{"config", config.to_json()},
                {"training", {{"train_loss", result.train_loss},
                              {"holdout_loss", result.holdout_loss},
                              {"train_rows", result.train_rows.size()},
                              {"holdout_rows", result.holdout_rows.size()}}},
                {"holdout", {{"fraction", config.holdout_fraction},
                             {"split_seed", mdn::split_seed(config.seed)},
                             {"group", "commit"}}}};
  return mdn::serialize_model(result.model, extra);
}

std::string predictions_ndjson(const mdn::MdnModel& model, const std::vector<FeatureRecord>& features) {
  auto changes = changes_of(features);
  auto sch = analysis::predict_sch_batch(model, changes);
  std::string out;
  for (std::size_t i = 0; i < features.size(); ++i)
    out += to_ndjson_line(
        {{"commit", features[i].commit}, {"sch_hours", sch[i]}, {"sch_minutes", mdn::sch_minutes(sch[i])}});
  return out;
}

json predict_patch(const mdn::MdnModel& model, const TokenDictionary& dict, std::string_view patch) {
  if (model.dictionary_hash != 0 && model.dictionary_hash != dict.hash())
    throw DataError("dictionary does not match the one the model was trained with");
  Commit c = parse_patch(patch, FilterRules::defaults());
  auto f = featurize(c, dict);
  auto pred = mdn::mdn_forward(model, f);
  double sch = mdn::truncated_mixture_mean(pred, 0.0, 1.0);
  return {{"sch_hours", sch}, {"sch_minutes", mdn::sch_minutes(sch)}, {"mixture", pred.to_json()},
          {"files_touched", f.files_touched}};
}

Report analyze_yy(const mdn::MdnModel& model, const json& model_header, const std::vector<FeatureRecord>& features,
                  const std::vector<IntervalRecord>& intervals, std::size_t bins) {
  auto joined = join(features, intervals);
  bool have_split = model_header.contains("holdout");
  double fraction = have_split ? model_header["holdout"].value("fraction", 0.0) : 0.0;
  std::uint64_t split = have_split ? model_header["holdout"].value("split_seed", std::uint64_t{0}) : 0;
  std::vector<ChangeFeatures> held;
  std::vector<double> actual;
  for (std::size_t i = 0; i < joined.changes.size(); ++i) {
    const auto& r = *joined.intervals[i];
    if (have_split && !mdn::in_holdout(r.commit, fraction, split)) continue;
    // Short intervals stand in for coding time directly.
    if (r.interval_minutes >= 60) continue;
    held.push_back(joined.changes[i]);
    actual.push_back(static_cast<double>(r.interval_minutes) / 60.0);
  }
  if (held.size() < 2) throw DataError("fewer than two holdout commits with intervals under one hour");
  auto rep = analysis::yy_binning_validation(model, held, actual, bins);
  Report out;
  out.report = rep.to_json();
  out.report["holdout_commits"] = held.size();
  out.report["holdout_rule"] = have_split ? "model holdout, interval < 60 min" : "all commits, interval < 60 min";
  out.plot_csv = csv_line({"bin", "count", "mean_predicted_hours", "mean_actual_hours"});
  for (std::size_t b = 0; b < rep.bins.size(); ++b)
    out.plot_csv += csv_line({num(b), num(rep.bins[b].count), num(rep.bins[b].mean_predicted),
                              num(rep.bins[b].mean_actual)});
  return out;
}

Report analyze_correction(const CommitCorpus& corpus, const std::vector<AuthorModel>& models,
                          std::size_t min_commits) {
  Report out;
  out.plot_csv = csv_line({"author", "part", "decile", "count", "mean_correction"});
  json authors = json::array();
  std::size_t flagged = 0, available = 0, part_flagged = 0, part_available = 0;
  double rate = 0.0;
  for (const auto& m : models) {
    auto commits = author_commits(corpus, m.author);
    if (commits.size() < min_commits) continue;
    auto timeline = hmm::timeline_from_commits(m.author, commits);
    auto rep = analysis::probability_correction_test(m.params, timeline, {}, min_commits);
    rate = rep.false_positive_rate_by_decile;
    flagged += rep.flagged(rep.by_decile);
    available += rep.available(rep.by_decile);
    part_flagged += rep.flagged(rep.by_part);
    part_available += rep.available(rep.by_part);
    authors.push_back({{"author", m.author}, {"report", rep.to_json()}});
    for (std::size_t p = 0; p < rep.cells.size(); ++p)
      for (std::size_t d = 0; d < rep.cells[p].size(); ++d)
        out.plot_csv += csv_line({csv_text(m.author), num(p), num(d), num(rep.cells[p][d].count),
                                  num(rep.cells[p][d].mean)});
  }
  if (authors.empty()) throw DataError("no modelled author has at least " + std::to_string(min_commits) + " commits");
  auto compat = [&](std::size_t k, std::size_t n) -> json {
    if (n == 0) return nullptr;
    return stats::binomial_sign_test(k, n, rate);
  };
  out.report = {{"authors", authors},
                {"min_commits", min_commits},
                {"by_decile", {{"flagged", flagged}, {"available", available},
                               {"binomial_p_vs_expected", compat(flagged, available)}}},
                {"by_part", {{"flagged", part_flagged}, {"available", part_available},
                             {"binomial_p_vs_expected", compat(part_flagged, part_available)}}},
                {"expected_false_positive_rate", rate},
                {"reference_false_positive_rate", 0.0552}};
  return out;
}

Report analyze_project_corr(const CommitCorpus& corpus, const mdn::MdnModel& model,
                            const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals,
                            std::size_t min_commits, double coverage) {
  auto joined = join(features, intervals);
  auto sch = analysis::predict_sch_batch(model, joined.changes);
  std::unordered_map<std::string, const Commit*> by_id;
  for (const auto& c : corpus.commits) by_id.emplace(c.commit_id, &c);
  std::vector<analysis::CommitEffort> records;
  for (std::size_t i = 0; i < joined.changes.size(); ++i) {
    const auto& r = *joined.intervals[i];
    auto it = by_id.find(r.commit);
    if (it == by_id.end()) continue;
    const auto& f = joined.changes[i];
    records.push_back({r.commit, r.author, it->second->project_id, r.expected_hours, sch[i],
                       static_cast<double>(f.lines_added), static_cast<double>(f.lines_added + f.lines_deleted)});
  }
  auto rep = analysis::project_correlation_study(corpus.commits, records, min_commits, coverage);
  Report out;
  out.report = rep.to_json();
  out.plot_csv = csv_line({"project", "commits", "main_authors", "mean_coding_hours", "mean_sch_hours",
                           "mean_lines_added", "mean_churn"});
  for (const auto& row : rep.rows)
    out.plot_csv += csv_line({csv_text(row.project), num(row.commits), num(row.main_authors),
                              num(row.mean_coding_hours), num(row.mean_sch), num(row.mean_lines_added),
                              num(row.mean_churn)});
  return out;
}

Report analyze_table1(const mdn::MdnModel& model, const std::vector<FeatureRecord>& features,
                      const std::vector<IntervalRecord>& intervals) {
  auto joined = join(features, intervals);
  auto sch = analysis::predict_sch_batch(model, joined.changes);
  std::vector<double> coding;
  for (const auto* r : joined.intervals) coding.push_back(r->expected_hours);
  auto rows = analysis::table1_report(joined.changes, sch, coding);
  Report out;
  out.report = analysis::table1_to_json(rows);
  out.plot_csv = csv_line({"predictor", "pearson_vs_coding_time", "pearson_vs_prediction",
                           "reference_vs_coding_time", "reference_vs_prediction"});
  for (const auto& r : rows)
    out.plot_csv += csv_line({r.predictor, num(r.vs_coding_time.coefficient), num(r.vs_prediction.coefficient),
                              num(r.reference_vs_coding_time), num(r.reference_vs_prediction)});
  return out;
}

Report analyze_beta(const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals,
                    double lo, double hi, double step) {
  auto joined = join(features, intervals);
  std::vector<double> added, deleted, coding;
  for (std::size_t i = 0; i < joined.changes.size(); ++i) {
    added.push_back(static_cast<double>(joined.changes[i].lines_added));
    deleted.push_back(static_cast<double>(joined.changes[i].lines_deleted));
    coding.push_back(joined.intervals[i]->expected_hours);
  }
  auto search = analysis::beta_grid_search(added, deleted, coding, lo, hi, step);
  Report out;
  out.report = search.to_json();
  out.plot_csv = csv_line({"beta", "spearman", "skipped"});
  for (const auto& p : search.grid)
    out.plot_csv += csv_line({num(p.beta), p.skipped ? "" : num(p.spearman), p.skipped ? "1" : "0"});
  return out;
}

Report analyze_file_spread(const mdn::MdnModel& model, const std::vector<FeatureRecord>& features, int max_files) {
  auto rep = analysis::file_spread_counterfactual(model, changes_of(features), max_files);
  Report out;
  out.report = rep.to_json();
  out.plot_csv = csv_line({"files", "mean_sch_hours", "mean_delta_vs_factual_seconds"});
  for (std::size_t k = 0; k < rep.mean_sch_by_files.size(); ++k)
    out.plot_csv += csv_line({num(k + 1), num(rep.mean_sch_by_files[k]), num(rep.mean_delta_vs_factual_seconds[k])});
  return out;
}

Report analyze_token_swap(const mdn::MdnModel& model, const TokenDictionary& dict,
                          const std::vector<FeatureRecord>& features, const std::string& token_a,
                          const std::string& token_b, std::size_t resamples, std::uint64_t seed) {
  auto [ab, ba] = analysis::token_swap_cost(model, dict, changes_of(features), token_a, token_b, resamples, seed);
  Report out;
  out.report = {{"costs", {ab.to_json(), ba.to_json()}}, {"resamples", resamples}};
  out.plot_csv = csv_line({"from", "to", "n", "mean_delta_seconds", "p_value", "reference_seconds"});
  for (const auto* r : {&ab, &ba})
    out.plot_csv += csv_line({csv_text(r->token_from), csv_text(r->token_to), num(r->n), num(r->mean_delta_seconds),
                              num(r->p_value), r->reference_seconds ? num(*r->reference_seconds) : ""});
  return out;
}

fs::path plot_path(const fs::path& report_path) {
  auto p = report_path;
  p.replace_extension(".plot.csv");
  return p;
}

}  // namespace stdcoder::cli
