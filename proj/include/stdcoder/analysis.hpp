#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdcoder/hmm.hpp"
#include "stdcoder/mdn.hpp"
#include "stdcoder/stats.hpp"
#include "stdcoder/tokenizer.hpp"

// Validation and counterfactual studies over trained models. Magnitudes
// observed on the original large Java corpus are carried as `reference_*`
// fields for comparison; nothing here asserts them.
namespace stdcoder::analysis {

std::vector<double> predict_sch_batch(const mdn::MdnModel& model, std::span<const ChangeFeatures> changes,
                                      mdn::SchBounds bounds = {});

// --- prediction vs truth binning --------------------------------------------

struct YyBin {
  std::size_t count = 0;
  double mean_predicted = 0.0;
  double mean_actual = 0.0;
};

struct YyReport {
  std::vector<YyBin> bins;
  std::size_t requested_bins = 0;
  bool bins_reduced = false;  // fewer points than requested bins
  double r_squared = 0.0;
  double reference_r_squared = 0.99;

  nlohmann::json to_json() const;
};

// Sorts by prediction, cuts equal-count bins and squares the Pearson
// correlation of the bin means.
YyReport yy_binning(std::span<const double> predicted, std::span<const double> actual, std::size_t bins = 250);
YyReport yy_binning_validation(const mdn::MdnModel& model, std::span<const ChangeFeatures> holdout,
                               std::span<const double> actual_hours, std::size_t bins = 250,
                               mdn::SchBounds bounds = {});

// --- live vs hindsight probability correction -------------------------------

struct CorrectionConfig {
  int parts = 10;
  int deciles = 10;
  std::vector<std::size_t> flag_statistics{0, 1, 9, 10};
};

struct CorrectionCell {
  std::size_t count = 0;
  double mean = 0.0;  // mean of smoothed - filtered; meaningless when count == 0
};

// Statistic of one test unit: how many of its cells have a positive mean.
struct CorrectionTest {
  int index = 0;
  int positive = 0;
  int valid = 0;  // cells with data
  bool available = false;
  bool flagged = false;
};

struct CorrectionReport {
  CorrectionConfig config;
  std::vector<std::vector<CorrectionCell>> cells;  // [part][decile]
  std::vector<CorrectionCell> decile_totals;       // pooled over parts
  std::vector<CorrectionTest> by_decile;           // statistic over parts
  std::vector<CorrectionTest> by_part;             // statistic over deciles
  double false_positive_rate_by_decile = 0.0;      // exact, under a fair coin per cell
  double false_positive_rate_by_part = 0.0;
  double reference_false_positive_rate = 0.0552;

  int flagged(const std::vector<CorrectionTest>& tests) const;
  int available(const std::vector<CorrectionTest>& tests) const;
  nlohmann::json to_json() const;
};

CorrectionReport probability_correction(std::span<const double> filtered, std::span<const double> smoothed,
                                        const CorrectionConfig& config = {});
CorrectionReport probability_correction_test(const hmm::HmmParams& params, const hmm::DeveloperTimeline& timeline,
                                             const CorrectionConfig& config = {}, std::size_t min_commits = 50);

// --- daily commit-rate curves --------------------------------------------------

// P(coding) of the chain with no observations, minute by minute.
std::vector<double> prior_coding_probability(const hmm::TransitionSeries& series);

// Average of a per-minute series by minute of day over window minutes
// [from, to) that fall on the selected weekdays (bit 0 = Monday).
std::vector<double> daily_profile(std::span<const double> per_minute, std::int64_t window_start, std::int64_t from,
                                  std::int64_t to, std::uint8_t weekdays = 0x1f);

// Predicted per-minute commit probability, prior P(coding) times C, by minute of day.
std::vector<double> commit_rate_profile(const hmm::HmmParams& params, const hmm::DeveloperTimeline& timeline,
                                        std::int64_t from, std::int64_t to, std::uint8_t weekdays = 0x1f);

// --- project-level effort vs coding time ------------------------------------

struct CommitEffort {
  std::string commit_id;
  std::string author;
  std::string project;
  double coding_hours = 0.0;  // expected coding time of the commit interval
  double sch = 0.0;
  double lines_added = 0.0;
  double churn = 0.0;
};

// Smallest set of authors, by descending commit count, covering at least
// `coverage` of the commits. Ties break by author id.
std::vector<std::string> main_contributors(std::span<const Commit> project_commits, double coverage = 0.8);

struct ProjectRow {
  std::string project;
  std::size_t commits = 0;
  std::size_t main_authors = 0;
  double mean_coding_hours = 0.0;
  double mean_sch = 0.0;
  double mean_lines_added = 0.0;
  double mean_churn = 0.0;
};

struct ProjectCorrelation {
  std::vector<ProjectRow> rows;
  stats::CorrelationReport standard_coder;
  stats::CorrelationReport lines_added;
  stats::CorrelationReport churn;
  double reference_standard_coder = 0.80;
  double reference_standard_coder_slope = 0.98;
  double reference_lines_added = 0.25;
  double reference_churn = 0.21;

  nlohmann::json to_json() const;
};

ProjectCorrelation project_correlation_study(std::span<const Commit> corpus, std::span<const CommitEffort> records,
                                             std::size_t min_commits = 500, double coverage = 0.8);

// --- surface predictors -----------------------------------------------------------

struct Table1Row {
  std::string predictor;
  stats::CorrelationReport vs_coding_time;
  stats::CorrelationReport vs_prediction;
  double reference_vs_coding_time = 0.0;
  double reference_vs_prediction = 0.0;
};

std::vector<Table1Row> table1_report(std::span<const ChangeFeatures> changes, std::span<const double> sch,
                                     std::span<const double> coding_hours);
nlohmann::json table1_to_json(const std::vector<Table1Row>& rows);

struct BetaPoint {
  double beta = 0.0;
  double spearman = 0.0;
  bool skipped = false;  // composite was constant
};

struct BetaSearch {
  double best_beta = 0.0;
  double best_spearman = 0.0;
  std::vector<BetaPoint> grid;
  double reference_beta = -0.005;

  nlohmann::json to_json() const;
};

// Maximizes Spearman(coding_time, added + beta * deleted) over an inclusive
// grid; ties go to the smallest |beta|.
BetaSearch beta_grid_search(std::span<const double> added, std::span<const double> deleted,
                            std::span<const double> coding_time, double lo = -1.0, double hi = 1.0,
                            double step = 0.005);

// --- counterfactual edits --------------------------------------------------------

struct FileSpreadStep {
  int from_files = 0;
  int to_files = 0;
  std::size_t n = 0;
  double mean_delta_seconds = 0.0;
  double q25_seconds = 0.0;
  double q75_seconds = 0.0;
  std::optional<double> wilcoxon_p;  // empty when every delta is zero or too few
};

struct FileSpreadReport {
  int max_files = 0;
  std::size_t eligible = 0;
  std::vector<double> mean_sch_by_files;                // hours, index k-1
  std::vector<double> mean_delta_vs_factual_seconds;    // index k-1
  std::vector<FileSpreadStep> steps;
  double mean_per_file_delta_seconds = 0.0;  // per change: (SCH(max) - SCH(1)) / (max - 1)
  double q25_per_file_seconds = 0.0;
  double q75_per_file_seconds = 0.0;
  std::optional<stats::WilcoxonResult> wilcoxon;
  double reference_per_file_seconds = 32.0;

  nlohmann::json to_json() const;
};

// Changes with churn below max_files are excluded.
FileSpreadReport file_spread_counterfactual(const mdn::MdnModel& model, std::span<const ChangeFeatures> changes,
                                            int max_files, mdn::SchBounds bounds = {});

struct CostReport {
  std::string token_from;
  std::string token_to;
  std::size_t n = 0;
  double mean_delta_seconds = 0.0;
  double p_value = 1.0;
  std::optional<double> reference_seconds;

  nlohmann::json to_json() const;
};

// First report: changes containing A but not B with the two counts swapped
// (the cost of B versus A). Second: the mirror selection.
std::pair<CostReport, CostReport> token_swap_cost(const mdn::MdnModel& model, const TokenDictionary& dict,
                                                  std::span<const ChangeFeatures> changes, const std::string& token_a,
                                                  const std::string& token_b, std::size_t resamples = 100000,
                                                  std::uint64_t seed = 0, mdn::SchBounds bounds = {});

std::optional<double> reference_swap_cost(const std::string& from, const std::string& to);

}  // namespace stdcoder::analysis
