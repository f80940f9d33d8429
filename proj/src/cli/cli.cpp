#include "stdcoder/cli.hpp"

#include <algorithm>
#include <chrono>
#include <functional>

#include <omp.h>

#include <CLI11.hpp>

#include "stdcoder/simulator.hpp"
#include "workflow.hpp"

namespace stdcoder::cli {

using nlohmann::json;

json RunManifest::to_json() const {
  return {{"command", command},     {"arguments", arguments}, {"config", config},
          {"inputs", inputs},       {"outputs", outputs},     {"seed", seed},
          {"wall_time_seconds", wall_time_seconds},           {"version", version}};
}

fs::path manifest_path(const fs::path& primary_output) {
  auto p = primary_output;
  p += ".manifest.json";
  return p;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Session {
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  Clock::time_point started = Clock::now();
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  void write(const fs::path& path, std::string_view content) const { write_file_atomic(path, content); }

  void manifest(const std::string& command, json config, const std::vector<fs::path>& inputs,
                const std::vector<fs::path>& outputs) const {
    RunManifest m;
    m.command = command;
    m.arguments = args;
    m.config = std::move(config);
    m.seed = seed;
    for (const auto& p : inputs) m.inputs[p.string()] = hash_path(p);
    for (const auto& p : outputs) m.outputs[p.string()] = hash_path(p);
    m.wall_time_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    write_file_atomic(manifest_path(outputs.front()), m.to_json().dump(2) + "\n");
  }
};

struct Options {
  // ingest
  std::string source, rules, stream = "author";
  int squash_minutes = 2;
  // simulate
  std::string scenario = "default", corpus_out, sim_author = "simulated";
  int weeks = 8;
  // shared inputs
  std::string corpus, models_dir, features, coding_times, dict, model, patch, out, config;
  // train-hmm
  std::string author;
  hmm::TrainConfig hmm_config;
  // coding-times
  std::size_t samples = 200;
  // build-dict
  std::string lang = "java";
  std::size_t top_n = 0;
  // train-mdn
  mdn::MdnTrainConfig mdn_config;
  // analyze
  std::size_t bins = 250;
  std::size_t min_commits = 0;
  double coverage = 0.8;
  double beta_lo = -1.0, beta_hi = 1.0, beta_step = 0.005;
  int max_files = 10;
  std::string token_from, token_to;
  std::size_t resamples = 100000;
};

CommitCorpus load_corpus(const std::string& path) { return read_corpus_ndjson(path); }

void cmd_ingest(const Options& o, const Session& s) {
  FilterRules rules = o.rules.empty() ? FilterRules::defaults() : read_rules(o.rules);
  StreamKey key = o.stream == "author" ? StreamKey::author : StreamKey::author_project;
  CommitCorpus corpus = ingest_source(o.source, rules, o.squash_minutes, key);
  s.write(o.out, corpus_to_ndjson(corpus));
  *s.out << "ingested " << corpus.commits.size() << " commits (" << corpus.stats.files_kept << " files kept, "
         << corpus.stats.files_filtered << " filtered)\n";
  std::vector<fs::path> inputs{o.source};
  if (!o.rules.empty()) inputs.push_back(o.rules);
  s.manifest("ingest",
             {{"rules", rules.to_json()}, {"squash_minutes", o.squash_minutes}, {"stream", o.stream}}, inputs,
             {o.out});
}

void cmd_simulate(const Options& o, const Session& s) {
  if (o.weeks < 1) throw UsageError("--weeks must be at least 1");
  sim::SimScenario scenario =
      o.scenario == "regime" ? sim::regime_change_scenario(o.weeks) : sim::default_scenario(o.weeks);
  auto simulation = sim::simulate_developer(scenario, s.seed);
  auto& tl = simulation.timeline;
  tl.author_id = o.sim_author;

  json runs = json::array();
  std::size_t coding_minutes = 0;
  for (std::size_t t = 0; t < simulation.coding.size();) {
    if (!simulation.coding[t]) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e < simulation.coding.size() && simulation.coding[e]) ++e;
    runs.push_back({t, e});
    coding_minutes += e - t;
    t = e;
  }
  std::string text = to_ndjson_line({{"type", "timeline"},
                                     {"author", tl.author_id},
                                     {"window_start_utc_min", tl.window_start},
                                     {"length_min", tl.length},
                                     {"commit_minutes", tl.commit_minutes},
                                     {"scenario", scenario.to_json()},
                                     {"seed", s.seed}});
  // Coding minutes as half-open [start, end) runs of window-relative minutes.
  text += to_ndjson_line({{"type", "ground_truth"}, {"encoding", "coding_runs"}, {"coding_minutes", coding_minutes},
                          {"runs", runs}});
  s.write(o.out, text);
  std::vector<fs::path> outputs{o.out};
  if (!o.corpus_out.empty()) {
    CommitCorpus corpus;
    for (auto m : tl.commit_minutes) {
      Commit c;
      c.commit_id = "sim-" + std::to_string(m);
      c.author_id = tl.author_id;
      c.project_id = "simulated";
      c.author_time = tl.window_start + m;
      corpus.commits.push_back(std::move(c));
    }
    s.write(o.corpus_out, corpus_to_ndjson(corpus));
    outputs.push_back(o.corpus_out);
  }
  *s.out << "simulated " << tl.commit_count() << " commits over " << tl.length << " minutes\n";
  s.manifest("simulate", {{"scenario", scenario.to_json()}}, {}, outputs);
}

void cmd_train_hmm(const Options& o, const Session& s) {
  auto corpus = load_corpus(o.corpus);
  auto config = o.hmm_config;
  config.seed = hmm_seed(s.seed, o.author);
  json model = train_author(corpus, o.author, config);
  s.write(o.out, model.dump(2) + "\n");
  *s.out << "trained " << o.author << " in " << model["training"]["epochs"].get<int>() << " epochs\n";
  s.manifest("train-hmm", {{"author", o.author}, {"hmm", config.to_json()}}, {o.corpus}, {o.out});
}

void cmd_coding_times(const Options& o, const Session& s) {
  auto corpus = load_corpus(o.corpus);
  auto models = read_models_dir(o.models_dir);
  if (models.empty()) throw DataError("no model files in " + o.models_dir);
  auto records = coding_times(corpus, models, o.samples, s.seed);
  s.write(o.out, intervals_to_ndjson(records));
  *s.out << "estimated " << records.size() << " intervals for " << models.size() << " authors\n";
  s.manifest("coding-times", {{"samples", o.samples}}, {o.corpus, o.models_dir}, {o.out});
}

void cmd_build_dict(const Options& o, const Session& s) {
  auto corpus = load_corpus(o.corpus);
  Language lang = language_from_name(o.lang);
  if (lang == Language::other) throw UsageError("--lang: unsupported language " + o.lang);
  std::size_t top_n = o.top_n > 0 ? o.top_n : default_top_n(lang);
  auto dict = build_dictionary(corpus, lang, top_n);
  s.write(o.out, dict.to_json().dump(2) + "\n");
  *s.out << "dictionary of " << dict.size() << " tokens\n";
  s.manifest("build-dict", {{"lang", o.lang}, {"top_n", top_n}}, {o.corpus}, {o.out});
}

void cmd_featurize(const Options& o, const Session& s) {
  auto corpus = load_corpus(o.corpus);
  auto dict = read_dictionary(o.dict);
  std::string text = featurize_ndjson(corpus, dict);
  s.write(o.out, text);
  *s.out << "featurized " << std::count(text.begin(), text.end(), '\n') << " commits\n";
  s.manifest("featurize", json::object(), {o.corpus, o.dict}, {o.out});
}

void cmd_train_mdn(const Options& o, const Session& s) {
  auto features = read_features(o.features);
  auto intervals = read_intervals(o.coding_times);
  auto config = o.mdn_config;
  config.seed = mdn_seed(s.seed);
  std::optional<TokenDictionary> dict;
  if (!o.dict.empty()) dict = read_dictionary(o.dict);
  std::string bytes = train_mdn_artifact(features, intervals, config, dict ? &*dict : nullptr, *s.err);
  s.write(o.out, bytes);
  std::vector<fs::path> inputs{o.features, o.coding_times};
  if (dict) inputs.push_back(o.dict);
  s.manifest("train-mdn", {{"mdn", config.to_json()}}, inputs, {o.out});
}

void cmd_predict(const Options& o, const Session& s) {
  auto model = mdn::load_model(o.model);
  auto dict = read_dictionary(o.dict);
  std::string patch = read_file(o.patch);
  *s.out << predict_patch(model, dict, patch).dump() << "\n";
}

void write_report(const std::string& kind, const Report& r, const Options& o, const Session& s,
                  const std::vector<fs::path>& inputs, json config) {
  fs::path plot = plot_path(o.out);
  s.write(o.out, r.report.dump(2) + "\n");
  s.write(plot, r.plot_csv);
  *s.out << kind << " report written to " << o.out << "\n";
  config["analysis"] = kind;
  s.manifest("analyze " + kind, config, inputs, {o.out, plot});
}

using Handler = std::function<void(const Options&, const Session&)>;

void add_analysis(CLI::App& analyze, Options& o, std::map<std::string, Handler>& handlers) {
  auto req = [](CLI::Option* opt) { return opt->required(); };
  auto out_opt = [&](CLI::App* sub) { req(sub->add_option("--out", o.out, "Report JSON; plot data goes beside it")); };

  auto* yy = analyze.add_subcommand("yy", "Binned prediction vs short-interval truth on the model holdout");
  req(yy->add_option("--model", o.model, "MDN model file"));
  req(yy->add_option("--features", o.features, "Features NDJSON"));
  req(yy->add_option("--coding-times", o.coding_times, "Coding-time NDJSON"));
  yy->add_option("--bins", o.bins, "Number of equal-count bins")->capture_default_str()->check(CLI::PositiveNumber);
  out_opt(yy);
  handlers["yy"] = [](const Options& o, const Session& s) {
    auto model = mdn::load_model(o.model);
    auto header = mdn::read_model_header(o.model);
    auto r = analyze_yy(model, header, read_features(o.features), read_intervals(o.coding_times), o.bins);
    write_report("yy", r, o, s, {o.model, o.features, o.coding_times}, {{"bins", o.bins}});
  };

  auto* corr = analyze.add_subcommand("correction", "Live vs hindsight probability correction per author");
  req(corr->add_option("--corpus", o.corpus, "Corpus NDJSON"));
  req(corr->add_option("--models-dir", o.models_dir, "Directory of per-author HMM models"));
  corr->add_option("--min-commits", o.min_commits, "Authors need this many commits (default 1000)");
  out_opt(corr);
  handlers["correction"] = [](const Options& o, const Session& s) {
    std::size_t min_commits = o.min_commits > 0 ? o.min_commits : 1000;
    auto r = analyze_correction(load_corpus(o.corpus), read_models_dir(o.models_dir), min_commits);
    write_report("correction", r, o, s, {o.corpus, o.models_dir}, {{"min_commits", min_commits}});
  };

  auto* proj = analyze.add_subcommand("project-corr", "Per-project mean SCH vs mean coding time");
  req(proj->add_option("--corpus", o.corpus, "Corpus NDJSON"));
  req(proj->add_option("--model", o.model, "MDN model file"));
  req(proj->add_option("--features", o.features, "Features NDJSON"));
  req(proj->add_option("--coding-times", o.coding_times, "Coding-time NDJSON"));
  proj->add_option("--min-commits", o.min_commits, "Main-contributor commits per project (default 500)");
  proj->add_option("--coverage", o.coverage, "Commit share covered by main contributors")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  out_opt(proj);
  handlers["project-corr"] = [](const Options& o, const Session& s) {
    std::size_t min_commits = o.min_commits > 0 ? o.min_commits : 500;
    auto r = analyze_project_corr(load_corpus(o.corpus), mdn::load_model(o.model), read_features(o.features),
                                  read_intervals(o.coding_times), min_commits, o.coverage);
    write_report("project-corr", r, o, s, {o.corpus, o.model, o.features, o.coding_times},
                 {{"min_commits", min_commits}, {"coverage", o.coverage}});
  };

  auto* t1 = analyze.add_subcommand("table1", "Surface predictors vs coding time and vs SCH");
  req(t1->add_option("--model", o.model, "MDN model file"));
  req(t1->add_option("--features", o.features, "Features NDJSON"));
  req(t1->add_option("--coding-times", o.coding_times, "Coding-time NDJSON"));
  out_opt(t1);
  handlers["table1"] = [](const Options& o, const Session& s) {
    auto r = analyze_table1(mdn::load_model(o.model), read_features(o.features), read_intervals(o.coding_times));
    write_report("table1", r, o, s, {o.model, o.features, o.coding_times}, json::object());
  };

  auto* beta = analyze.add_subcommand("beta", "Grid search for added + beta * deleted");
  req(beta->add_option("--features", o.features, "Features NDJSON"));
  req(beta->add_option("--coding-times", o.coding_times, "Coding-time NDJSON"));
  beta->add_option("--lo", o.beta_lo, "Grid start")->capture_default_str();
  beta->add_option("--hi", o.beta_hi, "Grid end")->capture_default_str();
  beta->add_option("--step", o.beta_step, "Grid step")->capture_default_str()->check(CLI::PositiveNumber);
  out_opt(beta);
  handlers["beta"] = [](const Options& o, const Session& s) {
    auto r = analyze_beta(read_features(o.features), read_intervals(o.coding_times), o.beta_lo, o.beta_hi,
                          o.beta_step);
    write_report("beta", r, o, s, {o.features, o.coding_times},
                 {{"lo", o.beta_lo}, {"hi", o.beta_hi}, {"step", o.beta_step}});
  };

  auto* spread = analyze.add_subcommand("file-spread", "Spread each change over 1..k files");
  req(spread->add_option("--model", o.model, "MDN model file"));
  req(spread->add_option("--features", o.features, "Features NDJSON"));
  spread->add_option("--max-files", o.max_files, "Largest file count")->capture_default_str()->check(CLI::Range(2, 1000));
  out_opt(spread);
  handlers["file-spread"] = [](const Options& o, const Session& s) {
    auto r = analyze_file_spread(mdn::load_model(o.model), read_features(o.features), o.max_files);
    write_report("file-spread", r, o, s, {o.model, o.features}, {{"max_files", o.max_files}});
  };

  auto* swap = analyze.add_subcommand("token-swap", "Cost of using one token instead of another");
  req(swap->add_option("--model", o.model, "MDN model file"));
  req(swap->add_option("--dict", o.dict, "Dictionary JSON"));
  req(swap->add_option("--features", o.features, "Features NDJSON"));
  req(swap->add_option("--from", o.token_from, "Token A"));
  req(swap->add_option("--to", o.token_to, "Token B"));
  swap->add_option("--resamples", o.resamples, "Bootstrap resamples")->capture_default_str()->check(CLI::PositiveNumber);
  out_opt(swap);
  handlers["token-swap"] = [](const Options& o, const Session& s) {
    auto model = mdn::load_model(o.model);
    auto dict = read_dictionary(o.dict);
    if (model.dictionary_hash != 0 && model.dictionary_hash != dict.hash())
      throw DataError("dictionary " + o.dict + " does not match the one the model was trained with");
    auto r = analyze_token_swap(model, dict, read_features(o.features), o.token_from, o.token_to, o.resamples,
                                swap_seed(s.seed));
    write_report("token-swap", r, o, s, {o.model, o.dict, o.features},
                 {{"from", o.token_from}, {"to", o.token_to}, {"resamples", o.resamples}});
  };
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coding-time models from commit histories", "stdcoder"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", kVersion);

  Options o;
  Session session;
  session.args = args;
  session.out = &out;
  session.err = &err;
  int jobs = 0;
  auto* seed_opt = app.add_option("--seed", session.seed, "Root seed; every stage derives its own from it");
  app.add_option("--jobs", jobs, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);

  std::map<std::string, Handler> handlers;
  auto req = [](CLI::Option* opt) { return opt->required(); };

  auto* ingest = app.add_subcommand("ingest", "Read a git repository or commit export into a corpus");
  req(ingest->add_option("source", o.source, "Repository directory or NDJSON export"));
  ingest->add_option("--rules", o.rules, "Filter rules JSON (defaults when absent)");
  req(ingest->add_option("--out", o.out, "Corpus NDJSON"));
  ingest->add_option("--squash-minutes", o.squash_minutes, "Merge runs with gaps below this; 0 disables")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  ingest->add_option("--stream", o.stream, "Squash stream key")
      ->capture_default_str()
      ->check(CLI::IsMember({"author", "author-project"}));
  handlers["ingest"] = cmd_ingest;

  auto* simulate = app.add_subcommand("simulate", "Simulate a developer with known coding time");
  simulate->add_option("--scenario", o.scenario, "default or regime")
      ->capture_default_str()
      ->check(CLI::IsMember({"default", "regime"}));
  simulate->add_option("--weeks", o.weeks, "Weeks (per regime for the regime scenario)")->capture_default_str();
  simulate->add_option("--author", o.sim_author, "Author id of the simulated commits")->capture_default_str();
  req(simulate->add_option("--out", o.out, "Timeline and ground-truth NDJSON"));
  simulate->add_option("--corpus-out", o.corpus_out, "Also write the commits as a corpus");
  handlers["simulate"] = cmd_simulate;

  auto* train_hmm = app.add_subcommand("train-hmm", "Fit one author's coding-time model");
  req(train_hmm->add_option("--corpus", o.corpus, "Corpus NDJSON"));
  req(train_hmm->add_option("--author", o.author, "Author id"));
  req(train_hmm->add_option("--out", o.out, "Model JSON"));
  train_hmm->add_option("--hidden", o.hmm_config.hidden, "Hidden units")->capture_default_str()->check(CLI::PositiveNumber);
  train_hmm->add_option("--epochs", o.hmm_config.max_epochs, "Epoch limit")->capture_default_str()->check(CLI::PositiveNumber);
  train_hmm->add_option("--learning-rate", o.hmm_config.learning_rate, "Adam step")->capture_default_str();
  train_hmm->add_option("--min-commits", o.hmm_config.min_commits, "Refuse authors with fewer commits")
      ->capture_default_str();
  handlers["train-hmm"] = cmd_train_hmm;

  auto* coding = app.add_subcommand("coding-times", "Posterior coding time of every commit interval");
  req(coding->add_option("--corpus", o.corpus, "Corpus NDJSON"));
  req(coding->add_option("--models-dir", o.models_dir, "Directory of per-author HMM models"));
  coding->add_option("--samples", o.samples, "Posterior draws per interval")->capture_default_str();
  req(coding->add_option("--out", o.out, "Coding-time NDJSON"));
  handlers["coding-times"] = cmd_coding_times;

  auto* dict = app.add_subcommand("build-dict", "Token dictionary for one language");
  req(dict->add_option("--corpus", o.corpus, "Corpus NDJSON"));
  dict->add_option("--lang", o.lang, "Language")->capture_default_str();
  dict->add_option("--top-n", o.top_n, "Frequent words (language default when absent)");
  req(dict->add_option("--out", o.out, "Dictionary JSON"));
  handlers["build-dict"] = cmd_build_dict;

  auto* feat = app.add_subcommand("featurize", "Token counts and surface features per commit");
  req(feat->add_option("--corpus", o.corpus, "Corpus NDJSON"));
  req(feat->add_option("--dict", o.dict, "Dictionary JSON"));
  req(feat->add_option("--out", o.out, "Features NDJSON"));
  handlers["featurize"] = cmd_featurize;

  auto* train_mdn = app.add_subcommand("train-mdn", "Fit the standard coder");
  req(train_mdn->add_option("--features", o.features, "Features NDJSON"));
  req(train_mdn->add_option("--coding-times", o.coding_times, "Coding-time NDJSON"));
  train_mdn->add_option("--dict", o.dict, "Dictionary JSON, recorded in the model");
  req(train_mdn->add_option("--out", o.out, "Model file"));
  train_mdn->add_option("--epochs", o.mdn_config.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  train_mdn->add_option("--batch-size", o.mdn_config.batch_size, "Minibatch rows")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_mdn->add_option("--learning-rate", o.mdn_config.learning_rate, "Adam step")->capture_default_str();
  train_mdn->add_option("--components", o.mdn_config.components, "Mixture components")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_mdn->add_option("--hidden", o.mdn_config.hidden, "Hidden layer widths")->delimiter(',');
  train_mdn->add_option("--holdout", o.mdn_config.holdout_fraction, "Holdout fraction of commits")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.9));
  handlers["train-mdn"] = cmd_train_mdn;

  auto* predict = app.add_subcommand("predict", "SCH of one patch");
  req(predict->add_option("--model", o.model, "Model file"));
  req(predict->add_option("--dict", o.dict, "Dictionary JSON"));
  req(predict->add_option("--patch", o.patch, "Unified diff"));
  handlers["predict"] = cmd_predict;

  auto* analyze = app.add_subcommand("analyze", "Validation and counterfactual studies");
  analyze->require_subcommand(1);
  add_analysis(*analyze, o, handlers);

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage from a config file");
  req(pipeline->add_option("--config", o.config, "Pipeline config JSON"));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  if (jobs > 0) omp_set_num_threads(jobs);

  auto* sub = app.get_subcommands().front();
  try {
    if (sub == pipeline) {
      std::optional<std::uint64_t> seed;
      if (seed_opt->count() > 0) seed = session.seed;
      return run_pipeline(o.config, seed, out, err);
    }
    std::string name = sub->get_name();
    if (sub == analyze) name = sub->get_subcommands().front()->get_name();
    handlers.at(name)(o, session);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace stdcoder::cli
