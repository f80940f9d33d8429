#include "stdcoder/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace stdcoder::analysis {

using nlohmann::json;

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<double> sch_of_rows(const mdn::MdnModel& model, std::span<const double> rows, mdn::SchBounds bounds) {
  auto preds = mdn::mdn_forward_batch(model, rows);
  std::vector<double> out(preds.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < preds.size(); ++i)
    out[i] = mdn::truncated_mixture_mean(preds[i], bounds.lower, bounds.upper);
  return out;
}

void append_row(std::vector<double>& rows, const ChangeFeatures& f) {
  auto t = f.transformed();
  rows.insert(rows.end(), t.begin(), t.end());
}

}  // namespace

std::vector<double> predict_sch_batch(const mdn::MdnModel& model, std::span<const ChangeFeatures> changes,
                                      mdn::SchBounds bounds) {
  std::vector<double> rows;
  rows.reserve(changes.size() * static_cast<std::size_t>(model.input_width));
  for (const auto& c : changes) {
    if (c.width() != static_cast<std::size_t>(model.input_width))
      throw DataError("feature width " + std::to_string(c.width()) + " does not match model input width " +
                      std::to_string(model.input_width));
    append_row(rows, c);
  }
  return sch_of_rows(model, rows, bounds);
}

// --- yy ------------------------------------------------------------------------------

json YyReport::to_json() const {
  json b = json::array();
  for (const auto& bin : bins)
    b.push_back({{"count", bin.count}, {"mean_predicted", bin.mean_predicted}, {"mean_actual", bin.mean_actual}});
  return {{"bins", b},
          {"requested_bins", requested_bins},
          {"bins_reduced", bins_reduced},
          {"r_squared", r_squared},
          {"reference_r_squared", reference_r_squared}};
}

YyReport yy_binning(std::span<const double> predicted, std::span<const double> actual, std::size_t bins) {
  if (predicted.size() != actual.size()) throw DataError("predictions and targets differ in length");
  if (predicted.empty()) throw DataError("yy binning needs at least one point");
  if (bins == 0) throw DataError("yy binning needs at least one bin");
  YyReport rep;
  rep.requested_bins = bins;
  const std::size_t n = predicted.size();
  if (n < bins) {
    bins = n;
    rep.bins_reduced = true;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return predicted[a] < predicted[b]; });
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < bins; ++k) {
    const std::size_t lo = n * k / bins;
    const std::size_t hi = n * (k + 1) / bins;
    YyBin bin;
    bin.count = hi - lo;
    for (std::size_t i = lo; i < hi; ++i) {
      bin.mean_predicted += predicted[order[i]];
      bin.mean_actual += actual[order[i]];
    }
    bin.mean_predicted /= static_cast<double>(bin.count);
    bin.mean_actual /= static_cast<double>(bin.count);
    xs.push_back(bin.mean_predicted);
    ys.push_back(bin.mean_actual);
    rep.bins.push_back(bin);
  }
  const double r = stats::pearson(xs, ys).coefficient;
  rep.r_squared = r * r;
  return rep;
}

YyReport yy_binning_validation(const mdn::MdnModel& model, std::span<const ChangeFeatures> holdout,
                               std::span<const double> actual_hours, std::size_t bins, mdn::SchBounds bounds) {
  return yy_binning(predict_sch_batch(model, holdout, bounds), actual_hours, bins);
}

// --- probability correction ------------------------------------------------------------

int CorrectionReport::flagged(const std::vector<CorrectionTest>& tests) const {
  return static_cast<int>(std::count_if(tests.begin(), tests.end(), [](const auto& t) { return t.flagged; }));
}

int CorrectionReport::available(const std::vector<CorrectionTest>& tests) const {
  return static_cast<int>(std::count_if(tests.begin(), tests.end(), [](const auto& t) { return t.available; }));
}

json CorrectionReport::to_json() const {
  auto tests_json = [](const std::vector<CorrectionTest>& tests) {
    json a = json::array();
    for (const auto& t : tests)
      a.push_back({{"index", t.index},
                   {"positive", t.positive},
                   {"valid", t.valid},
                   {"available", t.available},
                   {"flagged", t.flagged}});
    return a;
  };
  json cells_json = json::array();
  for (const auto& part : cells) {
    json row = json::array();
    for (const auto& c : part)
      row.push_back({{"count", c.count}, {"mean", c.count ? json(c.mean) : json(nullptr)}});
    cells_json.push_back(row);
  }
  json totals = json::array();
  for (const auto& c : decile_totals)
    totals.push_back({{"count", c.count}, {"mean", c.count ? json(c.mean) : json(nullptr)}});
  return {{"parts", config.parts},
          {"deciles", config.deciles},
          {"flag_statistics", config.flag_statistics},
          {"cells", cells_json},
          {"decile_totals", totals},
          {"by_decile", tests_json(by_decile)},
          {"by_part", tests_json(by_part)},
          {"flagged_by_decile", flagged(by_decile)},
          {"available_by_decile", available(by_decile)},
          {"flagged_by_part", flagged(by_part)},
          {"available_by_part", available(by_part)},
          {"false_positive_rate_by_decile", false_positive_rate_by_decile},
          {"false_positive_rate_by_part", false_positive_rate_by_part},
          {"reference_false_positive_rate", reference_false_positive_rate}};
}

CorrectionReport probability_correction(std::span<const double> filtered, std::span<const double> smoothed,
                                        const CorrectionConfig& config) {
  if (filtered.size() != smoothed.size()) throw DataError("filtered and smoothed series differ in length");
  if (config.parts < 1 || config.deciles < 1) throw DataError("correction test needs parts and deciles >= 1");
  const auto parts = static_cast<std::size_t>(config.parts);
  const auto deciles = static_cast<std::size_t>(config.deciles);
  CorrectionReport rep;
  rep.config = config;
  rep.cells.assign(parts, std::vector<CorrectionCell>(deciles));
  rep.decile_totals.assign(deciles, CorrectionCell{});
  std::vector<std::vector<double>> sums(parts, std::vector<double>(deciles, 0.0));
  std::vector<double> total_sums(deciles, 0.0);
  const std::size_t n = filtered.size();
  for (std::size_t p = 0; p < parts; ++p) {
    for (std::size_t t = n * p / parts; t < n * (p + 1) / parts; ++t) {
      const auto d = std::min(deciles - 1, static_cast<std::size_t>(filtered[t] * static_cast<double>(deciles)));
      const double corr = smoothed[t] - filtered[t];
      sums[p][d] += corr;
      ++rep.cells[p][d].count;
      total_sums[d] += corr;
      ++rep.decile_totals[d].count;
    }
  }
  for (std::size_t p = 0; p < parts; ++p)
    for (std::size_t d = 0; d < deciles; ++d)
      if (rep.cells[p][d].count) rep.cells[p][d].mean = sums[p][d] / static_cast<double>(rep.cells[p][d].count);
  for (std::size_t d = 0; d < deciles; ++d)
    if (rep.decile_totals[d].count)
      rep.decile_totals[d].mean = total_sums[d] / static_cast<double>(rep.decile_totals[d].count);

  const std::set<std::size_t> flags(config.flag_statistics.begin(), config.flag_statistics.end());
  // A cell whose mean is exactly zero carries no sign and counts as missing.
  auto informative = [](const CorrectionCell& c) { return c.count > 0 && c.mean != 0.0; };
  for (std::size_t d = 0; d < deciles; ++d) {
    CorrectionTest t;
    t.index = static_cast<int>(d);
    for (std::size_t p = 0; p < parts; ++p) {
      if (!informative(rep.cells[p][d])) continue;
      ++t.valid;
      if (rep.cells[p][d].mean > 0) ++t.positive;
    }
    t.available = t.valid == config.parts;
    t.flagged = t.available && flags.count(static_cast<std::size_t>(t.positive));
    rep.by_decile.push_back(t);
  }
  for (std::size_t p = 0; p < parts; ++p) {
    CorrectionTest t;
    t.index = static_cast<int>(p);
    for (std::size_t d = 0; d < deciles; ++d) {
      if (!informative(rep.cells[p][d])) continue;
      ++t.valid;
      if (rep.cells[p][d].mean > 0) ++t.positive;
    }
    t.available = t.valid == config.deciles;
    t.flagged = t.available && flags.count(static_cast<std::size_t>(t.positive));
    rep.by_part.push_back(t);
  }
  rep.false_positive_rate_by_decile = stats::binomial_set_probability(parts, 0.5, config.flag_statistics);
  rep.false_positive_rate_by_part = stats::binomial_set_probability(deciles, 0.5, config.flag_statistics);
  return rep;
}

CorrectionReport probability_correction_test(const hmm::HmmParams& params, const hmm::DeveloperTimeline& timeline,
                                             const CorrectionConfig& config, std::size_t min_commits) {
  if (timeline.commit_count() < min_commits)
    throw DataError("author " + timeline.author_id + " has " + std::to_string(timeline.commit_count()) +
                    " commits; the correction test needs " + std::to_string(min_commits));
  auto post = hmm::forward_backward(timeline, params);
  return probability_correction(post.filtered, post.smoothed, config);
}

// --- daily curves ---------------------------------------------------------------------

std::vector<double> prior_coding_probability(const hmm::TransitionSeries& series) {
  std::vector<double> p(series.start.size());
  if (p.empty()) return p;
  p[0] = series.start[0] / (series.start[0] + series.end[0]);
  for (std::size_t t = 1; t < p.size(); ++t)
    p[t] = p[t - 1] * (1.0 - series.end[t]) + (1.0 - p[t - 1]) * series.start[t];
  return p;
}

std::vector<double> daily_profile(std::span<const double> per_minute, std::int64_t window_start, std::int64_t from,
                                  std::int64_t to, std::uint8_t weekdays) {
  from = std::max<std::int64_t>(from, 0);
  to = std::min<std::int64_t>(to, static_cast<std::int64_t>(per_minute.size()));
  std::vector<double> sum(kMinutesPerDay, 0.0);
  std::vector<std::size_t> count(kMinutesPerDay, 0);
  for (std::int64_t m = from; m < to; ++m) {
    const std::int64_t epoch = window_start + m;
    if (!((weekdays >> weekday_of_minute(epoch)) & 1u)) continue;
    const auto of_day = static_cast<std::size_t>(((epoch % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay);
    sum[of_day] += per_minute[static_cast<std::size_t>(m)];
    ++count[of_day];
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] == 0) throw DataError("daily profile range does not cover every minute of the day");
    sum[i] /= static_cast<double>(count[i]);
  }
  return sum;
}

std::vector<double> commit_rate_profile(const hmm::HmmParams& params, const hmm::DeveloperTimeline& timeline,
                                        std::int64_t from, std::int64_t to, std::uint8_t weekdays) {
  auto series = hmm::transition_series(params, timeline);
  auto prior = prior_coding_probability(series);
  for (auto& p : prior) p *= series.commit_prob;
  return daily_profile(prior, timeline.window_start, from, to, weekdays);
}

// --- projects ---------------------------------------------------------------------------

std::vector<std::string> main_contributors(std::span<const Commit> project_commits, double coverage) {
  std::map<std::string, std::size_t> counts;
  for (const auto& c : project_commits) ++counts[c.author_id];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  std::size_t covered = 0;
  const double need = coverage * static_cast<double>(project_commits.size());
  for (const auto& [author, n] : ranked) {
    if (static_cast<double>(covered) >= need && !out.empty()) break;
    out.push_back(author);
    covered += n;
  }
  return out;
}

json ProjectCorrelation::to_json() const {
  json r = json::array();
  for (const auto& row : rows)
    r.push_back({{"project", row.project},
                 {"commits", row.commits},
                 {"main_authors", row.main_authors},
                 {"mean_coding_hours", row.mean_coding_hours},
                 {"mean_sch", row.mean_sch},
                 {"mean_lines_added", row.mean_lines_added},
                 {"mean_churn", row.mean_churn}});
  return {{"projects", r},
          {"standard_coder", standard_coder.to_json()},
          {"lines_added", lines_added.to_json()},
          {"churn", churn.to_json()},
          {"reference",
           {{"standard_coder", reference_standard_coder},
            {"standard_coder_slope", reference_standard_coder_slope},
            {"lines_added", reference_lines_added},
            {"churn", reference_churn}}}};
}

ProjectCorrelation project_correlation_study(std::span<const Commit> corpus, std::span<const CommitEffort> records,
                                             std::size_t min_commits, double coverage) {
  std::map<std::string, std::vector<Commit>> by_project;
  for (const auto& c : corpus) by_project[c.project_id].push_back(c);
  std::map<std::string, std::set<std::string>> mains;
  for (const auto& [project, commits] : by_project) {
    auto m = main_contributors(commits, coverage);
    mains[project] = std::set<std::string>(m.begin(), m.end());
  }
  std::map<std::string, std::vector<const CommitEffort*>> kept;
  for (const auto& r : records) {
    auto it = mains.find(r.project);
    if (it != mains.end() && it->second.count(r.author)) kept[r.project].push_back(&r);
  }
  ProjectCorrelation out;
  for (const auto& [project, recs] : kept) {
    if (recs.size() < min_commits) continue;
    ProjectRow row;
    row.project = project;
    row.commits = recs.size();
    row.main_authors = mains[project].size();
    for (const auto* r : recs) {
      row.mean_coding_hours += r->coding_hours;
      row.mean_sch += r->sch;
      row.mean_lines_added += r->lines_added;
      row.mean_churn += r->churn;
    }
    const double n = static_cast<double>(recs.size());
    row.mean_coding_hours /= n;
    row.mean_sch /= n;
    row.mean_lines_added /= n;
    row.mean_churn /= n;
    out.rows.push_back(row);
  }
  if (out.rows.empty())
    throw DataError("no project has " + std::to_string(min_commits) + " commits from main contributors");
  if (out.rows.size() < 2) throw DataError("project correlation needs at least two eligible projects");
  std::vector<double> coding, sch, added, churn;
  for (const auto& row : out.rows) {
    coding.push_back(row.mean_coding_hours);
    sch.push_back(row.mean_sch);
    added.push_back(row.mean_lines_added);
    churn.push_back(row.mean_churn);
  }
  out.standard_coder = stats::pearson(sch, coding);
  out.lines_added = stats::pearson(added, coding);
  out.churn = stats::pearson(churn, coding);
  return out;
}

// --- surface predictors ------------------------------------------------------------------

std::vector<Table1Row> table1_report(std::span<const ChangeFeatures> changes, std::span<const double> sch,
                                     std::span<const double> coding_hours) {
  if (changes.size() != sch.size() || changes.size() != coding_hours.size())
    throw DataError("table inputs differ in length");
  struct Predictor {
    const char* name;
    double ref_time;
    double ref_pred;
    double (*get)(const ChangeFeatures&);
  };
  const Predictor predictors[] = {
      {"files touched", 0.136, 0.325, [](const ChangeFeatures& f) { return double(f.files_touched); }},
      {"spaces", 0.146, 0.409, [](const ChangeFeatures& f) { return double(f.whitespace_count); }},
      {"tokens", 0.157, 0.428, [](const ChangeFeatures& f) { return double(f.total_tokens); }},
      {"lines added + deleted", 0.175, 0.457,
       [](const ChangeFeatures& f) { return double(f.lines_added + f.lines_deleted); }},
      {"lines added", 0.192, 0.496, [](const ChangeFeatures& f) { return double(f.lines_added); }},
  };
  std::vector<Table1Row> rows;
  for (const auto& p : predictors) {
    std::vector<double> x;
    for (const auto& f : changes) x.push_back(p.get(f));
    rows.push_back({p.name, stats::spearman(x, coding_hours), stats::spearman(x, sch), p.ref_time, p.ref_pred});
  }
  rows.push_back({"standard coder prediction", stats::spearman(sch, coding_hours), stats::spearman(sch, sch), 0.390,
                  1.000});
  return rows;
}

json table1_to_json(const std::vector<Table1Row>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"predictor", r.predictor},
                   {"vs_coding_time", r.vs_coding_time.to_json()},
                   {"vs_prediction", r.vs_prediction.to_json()},
                   {"reference_vs_coding_time", r.reference_vs_coding_time},
                   {"reference_vs_prediction", r.reference_vs_prediction}});
  return out;
}

json BetaSearch::to_json() const {
  json g = json::array();
  for (const auto& p : grid)
    g.push_back({{"beta", p.beta}, {"spearman", p.skipped ? json(nullptr) : json(p.spearman)}, {"skipped", p.skipped}});
  return {{"best_beta", best_beta}, {"best_spearman", best_spearman}, {"reference_beta", reference_beta}, {"grid", g}};
}

BetaSearch beta_grid_search(std::span<const double> added, std::span<const double> deleted,
                            std::span<const double> coding_time, double lo, double hi, double step) {
  if (added.size() != deleted.size() || added.size() != coding_time.size())
    throw DataError("beta search inputs differ in length");
  if (added.empty()) throw DataError("beta search needs a nonempty dataset");
  if (!(hi > lo) || !(step > 0)) throw DataError("beta grid needs lo < hi and a positive step");
  if (std::all_of(coding_time.begin(), coding_time.end(), [&](double v) { return v == coding_time[0]; }))
    throw DataError("coding times are constant; correlation is undefined");
  const auto count = static_cast<std::int64_t>(std::llround((hi - lo) / step)) + 1;
  BetaSearch out;
  out.grid.resize(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < count; ++i) {
    auto& pt = out.grid[static_cast<std::size_t>(i)];
    pt.beta = i == count - 1 ? hi : lo + static_cast<double>(i) * step;
    std::vector<double> composite(added.size());
    for (std::size_t k = 0; k < added.size(); ++k) composite[k] = added[k] + pt.beta * deleted[k];
    if (std::all_of(composite.begin(), composite.end(), [&](double v) { return v == composite[0]; })) {
      pt.skipped = true;
      continue;
    }
    pt.spearman = stats::spearman(composite, coding_time).coefficient;
  }
  bool found = false;
  for (const auto& pt : out.grid) {
    if (pt.skipped) continue;
    const bool better = !found || pt.spearman > out.best_spearman + 1e-12 ||
                        (std::abs(pt.spearman - out.best_spearman) <= 1e-12 &&
                         (std::abs(pt.beta) < std::abs(out.best_beta) ||
                          (std::abs(pt.beta) == std::abs(out.best_beta) && pt.beta < out.best_beta)));
    if (better) {
      out.best_beta = pt.beta;
      out.best_spearman = pt.spearman;
      found = true;
    }
  }
  if (!found) throw DataError("every composite on the beta grid is constant");
  return out;
}

// --- file spread -----------------------------------------------------------------------------

json FileSpreadReport::to_json() const {
  json s = json::array();
  for (const auto& st : steps)
    s.push_back({{"from_files", st.from_files},
                 {"to_files", st.to_files},
                 {"n", st.n},
                 {"mean_delta_seconds", st.mean_delta_seconds},
                 {"q25_seconds", st.q25_seconds},
                 {"q75_seconds", st.q75_seconds},
                 {"wilcoxon_p", opt_json(st.wilcoxon_p)}});
  json w = nullptr;
  if (wilcoxon)
    w = {{"n_nonzero", wilcoxon->n_nonzero}, {"w_plus", wilcoxon->w_plus}, {"w_minus", wilcoxon->w_minus},
         {"z", wilcoxon->z}, {"p_value", wilcoxon->p_value}};
  return {{"max_files", max_files},
          {"eligible", eligible},
          {"mean_sch_by_files", mean_sch_by_files},
          {"mean_delta_vs_factual_seconds", mean_delta_vs_factual_seconds},
          {"steps", s},
          {"mean_per_file_delta_seconds", mean_per_file_delta_seconds},
          {"q25_per_file_seconds", q25_per_file_seconds},
          {"q75_per_file_seconds", q75_per_file_seconds},
          {"wilcoxon", w},
          {"reference_per_file_seconds", reference_per_file_seconds}};
}

namespace {
std::optional<stats::WilcoxonResult> try_wilcoxon(std::span<const double> deltas) {
  try {
    return stats::wilcoxon_signed_rank(deltas);
  } catch (const DataError&) {
    return std::nullopt;
  }
}
}  // namespace

FileSpreadReport file_spread_counterfactual(const mdn::MdnModel& model, std::span<const ChangeFeatures> changes,
                                            int max_files, mdn::SchBounds bounds) {
  if (max_files < 2) throw DataError("file spread needs max_files >= 2");
  const auto kmax = static_cast<std::size_t>(max_files);
  std::vector<const ChangeFeatures*> eligible;
  for (const auto& c : changes)
    if (c.lines_added + c.lines_deleted >= kmax) eligible.push_back(&c);
  if (eligible.empty())
    throw DataError("no change has churn of at least " + std::to_string(max_files) + " lines");

  // Per change: SCH at k = 1..max, then the factual row when it lies outside that range.
  std::vector<double> rows;
  std::vector<std::size_t> factual_slot(eligible.size());
  std::size_t slot = 0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    ChangeFeatures f = *eligible[i];
    for (std::size_t k = 1; k <= kmax; ++k) {
      f.files_touched = k;
      append_row(rows, f);
    }
    const std::uint64_t actual = eligible[i]->files_touched;
    if (actual >= 1 && actual <= kmax) {
      factual_slot[i] = slot + actual - 1;
      slot += kmax;
    } else {
      append_row(rows, *eligible[i]);
      factual_slot[i] = slot + kmax;
      slot += kmax + 1;
    }
  }
  const auto sch = sch_of_rows(model, rows, bounds);

  FileSpreadReport rep;
  rep.max_files = max_files;
  rep.eligible = eligible.size();
  rep.mean_sch_by_files.assign(kmax, 0.0);
  rep.mean_delta_vs_factual_seconds.assign(kmax, 0.0);
  std::vector<std::vector<double>> step_deltas(kmax - 1);
  std::vector<double> per_file;
  std::size_t base = 0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const double factual = sch[factual_slot[i]];
    for (std::size_t k = 0; k < kmax; ++k) {
      rep.mean_sch_by_files[k] += sch[base + k];
      rep.mean_delta_vs_factual_seconds[k] += (sch[base + k] - factual) * 3600.0;
      if (k + 1 < kmax) step_deltas[k].push_back((sch[base + k + 1] - sch[base + k]) * 3600.0);
    }
    per_file.push_back((sch[base + kmax - 1] - sch[base]) * 3600.0 / static_cast<double>(kmax - 1));
    const std::uint64_t actual = eligible[i]->files_touched;
    base += (actual >= 1 && actual <= kmax) ? kmax : kmax + 1;
  }
  const double n = static_cast<double>(eligible.size());
  for (std::size_t k = 0; k < kmax; ++k) {
    rep.mean_sch_by_files[k] /= n;
    rep.mean_delta_vs_factual_seconds[k] /= n;
  }
  for (std::size_t k = 0; k + 1 < kmax; ++k) {
    FileSpreadStep st;
    st.from_files = static_cast<int>(k + 1);
    st.to_files = static_cast<int>(k + 2);
    st.n = step_deltas[k].size();
    st.mean_delta_seconds = stats::mean(step_deltas[k]);
    st.q25_seconds = stats::quantile(step_deltas[k], 0.25);
    st.q75_seconds = stats::quantile(step_deltas[k], 0.75);
    if (auto w = try_wilcoxon(step_deltas[k])) st.wilcoxon_p = w->p_value;
    rep.steps.push_back(st);
  }
  rep.mean_per_file_delta_seconds = stats::mean(per_file);
  rep.q25_per_file_seconds = stats::quantile(per_file, 0.25);
  rep.q75_per_file_seconds = stats::quantile(per_file, 0.75);
  rep.wilcoxon = try_wilcoxon(per_file);
  return rep;
}

// --- token swap ------------------------------------------------------------------------------

json CostReport::to_json() const {
  return {{"token_from", token_from},
          {"token_to", token_to},
          {"n", n},
          {"mean_delta_seconds", mean_delta_seconds},
          {"p_value", p_value},
          {"reference_seconds", opt_json(reference_seconds)}};
}

std::optional<double> reference_swap_cost(const std::string& from, const std::string& to) {
  static const std::map<std::pair<std::string, std::string>, double> table = {
      {{"private", "public"}, 83},     {{"public", "private"}, -54},   {{"private", "protected"}, 22},
      {{"protected", "private"}, -33}, {{"protected", "public"}, 24},  {{"public", "protected"}, -50},
      {{"<=", "<"}, 34},               {{"<", "<="}, -125},            {{">=", ">"}, 80},
      {{">", ">="}, -216},             {{"==", "!="}, 20},             {{"!=", "=="}, -10},
      {{"interface", "class"}, -38},   {{"class", "interface"}, -8},   {{"implements", "extends"}, -4},
      {{"extends", "implements"}, 8}};
  auto it = table.find({from, to});
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::pair<CostReport, CostReport> token_swap_cost(const mdn::MdnModel& model, const TokenDictionary& dict,
                                                  std::span<const ChangeFeatures> changes, const std::string& token_a,
                                                  const std::string& token_b, std::size_t resamples,
                                                  std::uint64_t seed, mdn::SchBounds bounds) {
  const auto ia = dict.index_of(token_a);
  const auto ib = dict.index_of(token_b);
  if (ia < 0) throw DataError("token '" + token_a + "' is not in the dictionary");
  if (ib < 0) throw DataError("token '" + token_b + "' is not in the dictionary");
  const auto a = static_cast<std::size_t>(ia);
  const auto b = static_cast<std::size_t>(ib);

  // Deltas for changes that contain `from` but not `to`, with the two counts exchanged.
  auto run = [&](std::size_t from, std::size_t to) {
    std::vector<double> rows;
    std::size_t n = 0;
    for (const auto& c : changes) {
      if (c.token_counts.size() != dict.size()) throw DataError("feature width does not match the dictionary");
      if (c.token_counts[from] == 0 || (from != to && c.token_counts[to] != 0)) continue;
      ChangeFeatures swapped = c;
      std::swap(swapped.token_counts[from], swapped.token_counts[to]);
      append_row(rows, c);
      append_row(rows, swapped);
      ++n;
    }
    std::vector<double> deltas;
    if (n == 0) return deltas;
    auto sch = sch_of_rows(model, rows, bounds);
    for (std::size_t i = 0; i < n; ++i) deltas.push_back((sch[2 * i + 1] - sch[2 * i]) * 3600.0);
    return deltas;
  };
  auto ab = run(a, b);
  auto ba = run(b, a);
  if (ab.empty())
    throw DataError("no change contains '" + token_a + "' without '" + token_b + "'");
  if (ba.empty())
    throw DataError("no change contains '" + token_b + "' without '" + token_a + "'");
  const double p = stats::bootstrap_mean_difference(ab, ba, resamples, seed);
  CostReport r1{token_a, token_b, ab.size(), stats::mean(ab), p, reference_swap_cost(token_a, token_b)};
  CostReport r2{token_b, token_a, ba.size(), stats::mean(ba), p, reference_swap_cost(token_b, token_a)};
  return {r1, r2};
}

}  // namespace stdcoder::analysis
