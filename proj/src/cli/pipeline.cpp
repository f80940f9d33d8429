#include <chrono>
#include <functional>
#include <set>

#include "stdcoder/cli.hpp"
#include "workflow.hpp"

namespace stdcoder::cli {

using nlohmann::json;

namespace {

// Stage outputs are recorded with their content hashes. A stage is skipped
// when its key (config plus input hashes) is unchanged and every recorded
// output is still on disk with the same content.
class StageCache {
 public:
  StageCache(fs::path work_dir, std::ostream& out) : work_dir_(std::move(work_dir)), out_(out) {
    path_ = work_dir_ / "pipeline.state.json";
    if (fs::exists(path_)) {
      try {
        state_ = read_json_file(path_);
      } catch (const DataError&) {
        state_ = json::object();
      }
    }
    if (!state_.is_object() || !state_.contains("stages")) state_ = {{"stages", json::object()}};
  }

  static std::string key(const std::string& stage, const json& config, const std::vector<std::string>& inputs) {
    std::string acc = stage + '\n' + config.dump() + '\n';
    for (const auto& h : inputs) acc += h + '\n';
    return hex64(fnv1a64(acc));
  }

  // Runs body unless cached; outputs are paths relative to the work dir.
  void run(const std::string& stage, const std::string& key, const std::vector<std::string>& outputs,
           const std::function<void()>& body) {
    auto& stages = state_["stages"];
    if (stages.contains(stage) && stages[stage].value("key", "") == key && outputs_intact(stages[stage])) {
      out_ << "skip  " << stage << "\n";
      skipped.push_back(stage);
      return;
    }
    stages.erase(stage);
    save();
    out_ << "run   " << stage << "\n";
    body();
    json rec = {{"key", key}, {"outputs", json::object()}};
    for (const auto& o : outputs) rec["outputs"][o] = hash_path(work_dir_ / o);
    stages[stage] = rec;
    save();
    ran.push_back(stage);
  }

  void forget(const std::string& stage) {
    state_["stages"].erase(stage);
    save();
  }

  std::vector<std::string> ran;
  std::vector<std::string> skipped;

 private:
  bool outputs_intact(const json& rec) const {
    for (const auto& [rel, hash] : rec.at("outputs").items()) {
      fs::path p = work_dir_ / rel;
      if (!fs::exists(p) || hash_path(p) != hash.get<std::string>()) return false;
    }
    return true;
  }

  void save() const { write_file_atomic(path_, state_.dump(2) + "\n"); }

  fs::path work_dir_;
  fs::path path_;
  std::ostream& out_;
  json state_;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  fs::path work_dir;
  fs::path source;
  std::optional<fs::path> rules_path;
  FilterRules rules = FilterRules::defaults();
  int squash_minutes = 2;
  std::string stream = "author";
  std::vector<std::string> include_authors;
  hmm::TrainConfig hmm;
  std::size_t samples = 200;
  std::string lang = "java";
  std::size_t top_n = 0;
  mdn::MdnTrainConfig mdn;
  json analyses = json::object();
  json snapshot;
};

PipelineConfig parse_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  json j = read_json_file(path);
  fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  PipelineConfig c;
  try {
    c.seed = seed_override ? *seed_override : j.value("seed", std::uint64_t{0});
    c.work_dir = resolve(j.value("work_dir", std::string("pipeline-out")));
    const json& corpus = j.at("corpus");
    c.source = resolve(corpus.at("source").get<std::string>());
    if (corpus.contains("rules") && corpus["rules"].is_string()) {
      c.rules_path = resolve(corpus["rules"].get<std::string>());
      c.rules = read_rules(*c.rules_path);
    } else if (corpus.contains("rules") && corpus["rules"].is_object()) {
      c.rules = FilterRules::from_json(corpus["rules"]);
    }
    c.squash_minutes = corpus.value("squash_minutes", 2);
    c.stream = corpus.value("stream", std::string("author"));
    if (c.stream != "author" && c.stream != "author-project")
      throw DataError("corpus.stream must be author or author-project");
    if (j.contains("authors")) c.include_authors = j["authors"].value("include", std::vector<std::string>{});
    c.hmm = hmm::TrainConfig::from_json(j.value("hmm", json::object()));
    c.samples = j.value("coding_times", json::object()).value("samples", std::size_t{200});
    const json dict = j.value("dictionary", json::object());
    c.lang = dict.value("lang", std::string("java"));
    c.top_n = dict.value("top_n", std::size_t{0});
    c.mdn = mdn::MdnTrainConfig::from_json(j.value("mdn", json::object()));
    c.analyses = j.value("analyses", json::object());
    if (!c.analyses.is_object()) throw DataError("analyses must map analysis names to options");
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  c.mdn.seed = mdn_seed(c.seed);
  c.snapshot = j;
  c.snapshot["seed"] = c.seed;
  return c;
}

const std::set<std::string> kAnalyses{"yy", "correction", "project-corr", "table1", "beta", "file-spread",
                                      "token-swap"};

}  // namespace

int run_pipeline(const fs::path& config_path, std::optional<std::uint64_t> seed_override, std::ostream& out,
                 std::ostream& err) {
  auto started = std::chrono::steady_clock::now();
  PipelineConfig cfg;
  try {
    cfg = parse_config(config_path, seed_override);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  for (const auto& [name, _] : cfg.analyses.items())
    if (!kAnalyses.count(name)) {
      err << "error: unknown analysis " << name << " in " << config_path.string() << "\n";
      return 1;
    }

  const fs::path& wd = cfg.work_dir;
  fs::create_directories(wd);
  StageCache cache(wd, out);
  int exit_code = 0;
  std::vector<std::string> outputs;

  auto h = [&](const std::string& rel) { return hash_path(wd / rel); };
  auto write = [&](const std::string& rel, std::string_view content) { write_file_atomic(wd / rel, content); };

  try {
    // ingest
    json ingest_cfg = {{"rules", cfg.rules.to_json()}, {"squash_minutes", cfg.squash_minutes}, {"stream", cfg.stream}};
    cache.run("ingest", StageCache::key("ingest", ingest_cfg, {hash_path(cfg.source)}), {"corpus.ndjson"}, [&] {
      StreamKey key = cfg.stream == "author" ? StreamKey::author : StreamKey::author_project;
      write("corpus.ndjson", corpus_to_ndjson(ingest_source(cfg.source, cfg.rules, cfg.squash_minutes, key)));
    });
    outputs.push_back("corpus.ndjson");
    CommitCorpus corpus = read_corpus_ndjson(wd / "corpus.ndjson");

    // per-author models
    std::vector<std::string> authors;
    json status = json::array();
    auto counts = author_counts(corpus);
    if (!cfg.include_authors.empty()) {
      authors = cfg.include_authors;
      std::sort(authors.begin(), authors.end());
      authors.erase(std::unique(authors.begin(), authors.end()), authors.end());
    } else {
      for (const auto& [a, n] : counts)
        if (n >= cfg.hmm.min_commits) authors.push_back(a);
    }
    std::set<std::string> keep_files;
    std::vector<std::string> model_hashes;
    for (const auto& author : authors) {
      std::string rel = "models/" + model_file_name(author);
      auto commits = author_commits(corpus, author);
      std::string fingerprint;
      for (const auto& c : commits) fingerprint += c.commit_id + ' ' + std::to_string(c.author_time) + '\n';
      auto config = cfg.hmm;
      config.seed = hmm_seed(cfg.seed, author);
      std::string stage = "train-hmm:" + author;
      json entry = {{"author", author}, {"commits", commits.size()}, {"model", rel}};
      try {
        cache.run(stage,
                  StageCache::key(stage, config.to_json(), {hex64(fnv1a64(fingerprint))}),
                  {rel}, [&] { write(rel, train_author(corpus, author, config).dump(2) + "\n"); });
        entry["status"] = "ok";
        keep_files.insert(model_file_name(author));
        model_hashes.push_back(h(rel));
        outputs.push_back(rel);
      } catch (const DataError& e) {
        cache.forget(stage);
        entry["status"] = "failed";
        entry["message"] = e.what();
        entry.erase("model");
        err << "error: train-hmm " << author << ": " << e.what() << "\n";
        exit_code = 2;
      }
      status.push_back(entry);
    }
    json excluded = json::array();
    if (cfg.include_authors.empty())
      for (const auto& [a, n] : counts)
        if (n < cfg.hmm.min_commits) excluded.push_back({{"author", a}, {"commits", n}});
    write("status.json", json{{"authors", status}, {"below_min_commits", excluded},
                              {"min_commits", cfg.hmm.min_commits}}.dump(2) + "\n");
    outputs.push_back("status.json");
    // Models of authors no longer selected must not leak into later stages.
    if (fs::exists(wd / "models"))
      for (const auto& e : fs::directory_iterator(wd / "models"))
        if (!keep_files.count(e.path().filename().string())) fs::remove(e.path());
    if (keep_files.empty()) throw DataError("no author model could be trained");

    json ct_cfg = {{"samples", cfg.samples}, {"seed", cfg.seed}};
    std::vector<std::string> ct_inputs{h("corpus.ndjson")};
    ct_inputs.insert(ct_inputs.end(), model_hashes.begin(), model_hashes.end());
    cache.run("coding-times", StageCache::key("coding-times", ct_cfg, ct_inputs), {"intervals.ndjson"}, [&] {
      auto models = read_models_dir(wd / "models");
      write("intervals.ndjson", intervals_to_ndjson(coding_times(corpus, models, cfg.samples, cfg.seed)));
    });
    outputs.push_back("intervals.ndjson");

    Language lang = language_from_name(cfg.lang);
    if (lang == Language::other) throw DataError("dictionary.lang: unsupported language " + cfg.lang);
    std::size_t top_n = cfg.top_n > 0 ? cfg.top_n : default_top_n(lang);
    cache.run("build-dict", StageCache::key("build-dict", {{"lang", cfg.lang}, {"top_n", top_n}}, {h("corpus.ndjson")}),
              {"dict.json"}, [&] { write("dict.json", build_dictionary(corpus, lang, top_n).to_json().dump(2) + "\n"); });
    outputs.push_back("dict.json");
    TokenDictionary dict = read_dictionary(wd / "dict.json");

    cache.run("featurize", StageCache::key("featurize", json::object(), {h("corpus.ndjson"), h("dict.json")}),
              {"features.ndjson"}, [&] { write("features.ndjson", featurize_ndjson(corpus, dict)); });
    outputs.push_back("features.ndjson");
    auto features = read_features(wd / "features.ndjson");
    auto intervals = read_intervals(wd / "intervals.ndjson");

    cache.run("train-mdn",
              StageCache::key("train-mdn", cfg.mdn.to_json(),
                              {h("features.ndjson"), h("intervals.ndjson"), h("dict.json")}),
              {"mdn.model"}, [&] {
                std::ostringstream log;
                write("mdn.model", train_mdn_artifact(features, intervals, cfg.mdn, &dict, log));
              });
    outputs.push_back("mdn.model");
    auto model = mdn::load_model((wd / "mdn.model").string());

    cache.run("predictions", StageCache::key("predictions", json::object(), {h("mdn.model"), h("features.ndjson")}),
              {"sch.ndjson"}, [&] { write("sch.ndjson", predictions_ndjson(model, features)); });
    outputs.push_back("sch.ndjson");

    for (const auto& [name, opts] : cfg.analyses.items()) {
      std::string rel = "reports/" + name + ".json";
      std::string plot_rel = "reports/" + name + ".plot.csv";
      std::vector<std::string> inputs{h("corpus.ndjson"), h("features.ndjson"), h("intervals.ndjson"),
                                      h("mdn.model"), h("dict.json")};
      inputs.insert(inputs.end(), model_hashes.begin(), model_hashes.end());
      std::string stage = "analyze:" + name;
      cache.run(stage, StageCache::key(stage, {{"options", opts}, {"seed", cfg.seed}}, inputs), {rel, plot_rel}, [&] {
        Report r;
        if (name == "yy") {
          r = analyze_yy(model, mdn::read_model_header((wd / "mdn.model").string()), features, intervals,
                         opts.value("bins", std::size_t{250}));
        } else if (name == "correction") {
          r = analyze_correction(corpus, read_models_dir(wd / "models"), opts.value("min_commits", std::size_t{1000}));
        } else if (name == "project-corr") {
          r = analyze_project_corr(corpus, model, features, intervals, opts.value("min_commits", std::size_t{500}),
                                   opts.value("coverage", 0.8));
        } else if (name == "table1") {
          r = analyze_table1(model, features, intervals);
        } else if (name == "beta") {
          r = analyze_beta(features, intervals, opts.value("lo", -1.0), opts.value("hi", 1.0),
                           opts.value("step", 0.005));
        } else if (name == "file-spread") {
          r = analyze_file_spread(model, features, opts.value("max_files", 10));
        } else {
          r = analyze_token_swap(model, dict, features, opts.at("from").get<std::string>(),
                                 opts.at("to").get<std::string>(), opts.value("resamples", std::size_t{100000}),
                                 swap_seed(cfg.seed));
        }
        write(rel, r.report.dump(2) + "\n");
        write(plot_rel, r.plot_csv);
      });
      outputs.push_back(rel);
      outputs.push_back(plot_rel);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    exit_code = 2;
  }

  RunManifest m;
  m.command = "pipeline";
  m.arguments = {config_path.string()};
  m.config = cfg.snapshot;
  m.config["stages_run"] = cache.ran;
  m.config["stages_skipped"] = cache.skipped;
  m.seed = cfg.seed;
  m.inputs[config_path.string()] = hash_path(config_path);
  if (fs::exists(cfg.source)) m.inputs[cfg.source.string()] = hash_path(cfg.source);
  if (cfg.rules_path) m.inputs[cfg.rules_path->string()] = hash_path(*cfg.rules_path);
  for (const auto& rel : outputs)
    if (fs::exists(wd / rel)) m.outputs[rel] = hash_path(wd / rel);
  m.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file_atomic(wd / "pipeline.manifest.json", m.to_json().dump(2) + "\n");
  out << (exit_code == 0 ? "pipeline finished" : "pipeline finished with errors") << ": " << cache.ran.size()
      << " stages run, " << cache.skipped.size() << " skipped\n";
  return exit_code;
}

}  // namespace stdcoder::cli
