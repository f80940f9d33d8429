#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdcoder/corpus.hpp"
#include "stdcoder/hmm.hpp"
#include "stdcoder/mdn.hpp"
#include "stdcoder/tokenizer.hpp"

// Artifact formats and the computation behind each stage, shared by the
// subcommands and the pipeline so both produce the same bytes.
namespace stdcoder::cli {

namespace fs = std::filesystem;

struct IntervalRecord {
  std::string commit;
  std::string author;
  std::int64_t interval_minutes = 0;
  double expected_hours = 0.0;
  std::vector<double> samples;
};

struct FeatureRecord {
  std::string commit;
  ChangeFeatures features;
};

struct AuthorModel {
  std::string author;
  hmm::HmmParams params;
  std::int64_t window_start = 0;
  std::int64_t length = 0;
};

struct Report {
  nlohmann::json report;
  std::string plot_csv;
};

nlohmann::json read_json_file(const fs::path& path);
std::vector<nlohmann::json> read_ndjson(const fs::path& path);
std::string to_ndjson_line(const nlohmann::json& j);

std::vector<IntervalRecord> read_intervals(const fs::path& path);
std::string intervals_to_ndjson(const std::vector<IntervalRecord>& records);
std::vector<FeatureRecord> read_features(const fs::path& path);
TokenDictionary read_dictionary(const fs::path& path);
FilterRules read_rules(const fs::path& path);
AuthorModel read_author_model(const fs::path& path);
// Every *.json in the directory, ordered by author.
std::vector<AuthorModel> read_models_dir(const fs::path& dir);

// File name for an author's model; unsafe characters are replaced and a hash
// suffix keeps distinct authors apart.
std::string model_file_name(const std::string& author);

// Hex content hash. Directories hash their sorted (name, content) pairs; git
// repositories hash HEAD, which is all that ingestion reads.
std::string hash_path(const fs::path& path);
bool is_git_repository(const fs::path& path);

inline std::uint64_t hmm_seed(std::uint64_t root, const std::string& author) {
  return derive_seed(root, "train-hmm/" + author);
}
inline std::uint64_t interval_seed(std::uint64_t root, const std::string& author) {
  return derive_seed(root, "coding-times/" + author);
}
inline std::uint64_t mdn_seed(std::uint64_t root) { return derive_seed(root, "train-mdn"); }
inline std::uint64_t swap_seed(std::uint64_t root) { return derive_seed(root, "token-swap"); }

CommitCorpus ingest_source(const fs::path& source, const FilterRules& rules, int squash_minutes, StreamKey key);
std::vector<Commit> author_commits(const CommitCorpus& corpus, const std::string& author);
// Authors ordered by id with their commit counts.
std::vector<std::pair<std::string, std::size_t>> author_counts(const CommitCorpus& corpus);

nlohmann::json train_author(const CommitCorpus& corpus, const std::string& author, const hmm::TrainConfig& config);
std::vector<IntervalRecord> coding_times(const CommitCorpus& corpus, const std::vector<AuthorModel>& models,
                                         std::size_t samples, std::uint64_t root_seed);
// Commits touching at least one file of the dictionary language.
std::string featurize_ndjson(const CommitCorpus& corpus, const TokenDictionary& dict);

// One row per posterior sample, grouped by commit for the holdout split.
mdn::MdnDataset mdn_dataset(const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals);
// Serialized model with the training log, config and holdout rule in its header.
std::string train_mdn_artifact(const std::vector<FeatureRecord>& features,
                               const std::vector<IntervalRecord>& intervals, const mdn::MdnTrainConfig& config,
                               const TokenDictionary* dict, std::ostream& log);
std::string predictions_ndjson(const mdn::MdnModel& model, const std::vector<FeatureRecord>& features);
nlohmann::json predict_patch(const mdn::MdnModel& model, const TokenDictionary& dict, std::string_view patch);

Report analyze_yy(const mdn::MdnModel& model, const nlohmann::json& model_header,
                  const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals,
                  std::size_t bins);
Report analyze_correction(const CommitCorpus& corpus, const std::vector<AuthorModel>& models,
                          std::size_t min_commits);
Report analyze_project_corr(const CommitCorpus& corpus, const mdn::MdnModel& model,
                            const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals,
                            std::size_t min_commits, double coverage);
Report analyze_table1(const mdn::MdnModel& model, const std::vector<FeatureRecord>& features,
                      const std::vector<IntervalRecord>& intervals);
Report analyze_beta(const std::vector<FeatureRecord>& features, const std::vector<IntervalRecord>& intervals,
                    double lo, double hi, double step);
Report analyze_file_spread(const mdn::MdnModel& model, const std::vector<FeatureRecord>& features, int max_files);
Report analyze_token_swap(const mdn::MdnModel& model, const TokenDictionary& dict,
                          const std::vector<FeatureRecord>& features, const std::string& token_a,
                          const std::string& token_b, std::size_t resamples, std::uint64_t seed);

// report.json -> report.plot.csv
fs::path plot_path(const fs::path& report_path);

}  // namespace stdcoder::cli
