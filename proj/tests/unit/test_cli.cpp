#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stdcoder/cli.hpp"
#include "stdcoder/common.hpp"
#include "support/fixture_repo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = stdcoder::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path built_root;

const fs::path& shared_root() {
  if (built_root.empty()) {
    built_root = fixture::temp_dir("cli");
    fixture::build_java_repo(built_root / "repo");
    std::atexit([] { fs::remove_all(built_root); });
  }
  return built_root;
}

json small_config(const fs::path& source, const fs::path& work_dir) {
  return {{"seed", 5},
          {"work_dir", work_dir.string()},
          {"corpus", {{"source", source.string()}}},
          {"hmm", {{"max_epochs", 40}, {"min_commits", 30}, {"hidden", 8}}},
          {"coding_times", {{"samples", 20}}},
          {"mdn", {{"epochs", 2}, {"hidden", {16, 16}}, {"components", 3}, {"batch_size", 256}}},
          {"analyses", {{"table1", json::object()}}}};
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  auto path = dir / "pipeline.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

json read_json(const fs::path& p) { return json::parse(stdcoder::read_file(p)); }

const char* kPatch =
    "diff --git a/src/A.java b/src/A.java\n"
    "--- a/src/A.java\n"
    "+++ b/src/A.java\n"
    "@@ -1,2 +1,4 @@\n"
    " class A {\n"
    "+  private int count;\n"
    "+  public void inc() { count++; }\n"
    "-  int old;\n"
    " }\n";

}  // namespace

TEST_CASE("pipeline runs, caches and reruns what changed") {
  const auto root = shared_root() / "cache";
  fs::remove_all(root);
  fixture::sh("cp -r '" + (shared_root() / "repo").string() + "' '" + root.string() + "'");
  const auto repo = root;
  auto config = write_config(shared_root() / "cache-cfg", small_config(repo, shared_root() / "cache-work"));
  const auto wd = shared_root() / "cache-work";
  fs::remove_all(wd);

  auto first = cli({"pipeline", "--config", config.string()});
  INFO(first.err);
  REQUIRE(first.code == 0);
  for (auto rel : {"corpus.ndjson", "status.json", "intervals.ndjson", "dict.json", "features.ndjson", "mdn.model",
                   "sch.ndjson", "reports/table1.json", "reports/table1.plot.csv", "pipeline.manifest.json"})
    CHECK(fs::exists(wd / rel));
  auto status = read_json(wd / "status.json");
  CHECK(status["authors"].size() == 2);
  for (const auto& a : status["authors"]) CHECK(a["status"] == "ok");
  auto manifest = read_json(wd / "pipeline.manifest.json");
  CHECK(manifest["command"] == "pipeline");
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["outputs"].contains("mdn.model"));
  CHECK(manifest["config"]["stages_skipped"].empty());

  auto again = cli({"pipeline", "--config", config.string()});
  REQUIRE(again.code == 0);
  auto rerun = read_json(wd / "pipeline.manifest.json");
  CHECK(rerun["config"]["stages_run"].empty());
  CHECK(rerun["config"]["stages_skipped"].size() == manifest["config"]["stages_run"].size());
  CHECK(again.out.find("0 stages run") != std::string::npos);

  // a new commit by alice: her model and everything downstream rerun, bob's does not
  const std::string git = "git -C '" + repo.string() + "' ";
  fixture::sh("printf 'class Extra {\\n  int v;\\n}\\n' > '" + (repo / "Extra.java").string() + "'");
  fixture::sh(git + "add -A && GIT_AUTHOR_NAME=alice GIT_AUTHOR_EMAIL=alice@example.com "
                    "GIT_COMMITTER_NAME=alice GIT_COMMITTER_EMAIL=alice@example.com "
                    "GIT_AUTHOR_DATE='@1705000000 +0000' GIT_COMMITTER_DATE='@1705000000 +0000' " +
              git + "commit -q -m extra");
  auto changed = cli({"pipeline", "--config", config.string()});
  REQUIRE(changed.code == 0);
  auto after = read_json(wd / "pipeline.manifest.json");
  auto ran = after["config"]["stages_run"].get<std::vector<std::string>>();
  auto has = [&](const std::string& s) { return std::find(ran.begin(), ran.end(), s) != ran.end(); };
  CHECK(has("ingest"));
  CHECK(has("train-hmm:alice@example.com"));
  CHECK(!has("train-hmm:bob@example.com"));
  CHECK(has("coding-times"));
  CHECK(has("train-mdn"));
}

TEST_CASE("a failing author is reported while the others proceed") {
  const auto wd = shared_root() / "fail-work";
  fs::remove_all(wd);
  auto cfg = small_config(shared_root() / "repo", wd);
  cfg["authors"] = {{"include", {"alice@example.com", "ghost@example.com"}}};
  auto config = write_config(shared_root() / "fail-cfg", cfg);
  auto r = cli({"pipeline", "--config", config.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("ghost@example.com") != std::string::npos);
  auto status = read_json(wd / "status.json");
  REQUIRE(status["authors"].size() == 2);
  CHECK(status["authors"][0]["author"] == "alice@example.com");
  CHECK(status["authors"][0]["status"] == "ok");
  CHECK(status["authors"][1]["status"] == "failed");
  CHECK(status["authors"][1].contains("message"));
  CHECK(fs::exists(wd / "sch.ndjson"));
  CHECK(fs::exists(wd / "pipeline.manifest.json"));
}

TEST_CASE("individual commands, exit codes and manifests") {
  const auto dir = shared_root() / "cmds";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  auto repo = (shared_root() / "repo").string();

  REQUIRE(cli({"ingest", repo, "--out", p("corpus.ndjson")}).code == 0);
  CHECK(fs::exists(p("corpus.ndjson.manifest.json")));
  auto m = read_json(p("corpus.ndjson.manifest.json"));
  CHECK(m["command"] == "ingest");
  CHECK(m["inputs"].contains(repo));
  CHECK(m["outputs"].contains(p("corpus.ndjson")));
  CHECK(m.contains("wall_time_seconds"));
  CHECK(m["version"] == stdcoder::cli::kVersion);

  fs::create_directories(dir / "models");
  for (auto author : {"alice@example.com", "bob@example.com"}) {
    auto out = (dir / "models" / (std::string(author) + ".json")).string();
    auto r = cli({"--seed", "3", "train-hmm", "--corpus", p("corpus.ndjson"), "--author", author, "--out", out,
                  "--epochs", "30", "--hidden", "8", "--min-commits", "30"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(read_json(out + ".manifest.json")["seed"] == 3);
  }
  auto refused = cli({"train-hmm", "--corpus", p("corpus.ndjson"), "--author", "alice@example.com", "--out",
                      p("x.json"), "--min-commits", "100000"});
  CHECK(refused.code == 2);
  CHECK(!fs::exists(p("x.json")));

  REQUIRE(cli({"coding-times", "--corpus", p("corpus.ndjson"), "--models-dir", (dir / "models").string(),
               "--samples", "10", "--out", p("intervals.ndjson")})
              .code == 0);
  REQUIRE(cli({"build-dict", "--corpus", p("corpus.ndjson"), "--out", p("dict.json")}).code == 0);
  REQUIRE(cli({"featurize", "--corpus", p("corpus.ndjson"), "--dict", p("dict.json"), "--out", p("features.ndjson")})
              .code == 0);
  auto trained = cli({"train-mdn", "--features", p("features.ndjson"), "--coding-times", p("intervals.ndjson"),
                      "--dict", p("dict.json"), "--out", p("mdn.model"), "--epochs", "2", "--hidden", "16,16",
                      "--components", "3"});
  INFO(trained.err);
  REQUIRE(trained.code == 0);

  std::ofstream(p("change.patch")) << kPatch;
  auto pred = cli({"predict", "--model", p("mdn.model"), "--dict", p("dict.json"), "--patch", p("change.patch")});
  REQUIRE(pred.code == 0);
  auto j = json::parse(pred.out);
  double sch = j["sch_hours"];
  CHECK(sch >= 0.0);
  CHECK(sch <= 1.0);
  CHECK(j["sch_minutes"].get<double>() == doctest::Approx(sch * 60));
  CHECK(j["files_touched"] == 1);

  auto missing = cli({"predict", "--model", p("nope.model"), "--dict", p("dict.json"), "--patch", p("change.patch")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find(p("nope.model")) != std::string::npos);

  CHECK(cli({"predict", "--model", p("mdn.model"), "--dict", p("dict.json"), "--patch", p("change.patch"),
             "--frobnicate"})
            .code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"train-hmm", "--corpus", p("corpus.ndjson")}).code == 1);

  auto swap = cli({"analyze", "token-swap", "--model", p("mdn.model"), "--dict", p("dict.json"), "--features",
                   p("features.ndjson"), "--from", "for", "--to", "while", "--resamples", "500", "--out",
                   p("swap.json")});
  INFO(swap.err);
  CHECK(swap.code == 0);
  CHECK(fs::exists(p("swap.plot.csv")));
  CHECK(fs::exists(p("swap.json.manifest.json")));
  auto unknown = cli({"analyze", "token-swap", "--model", p("mdn.model"), "--dict", p("dict.json"), "--features",
                      p("features.ndjson"), "--from", "qqq", "--to", "public", "--out", p("swap2.json")});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("qqq") != std::string::npos);
}

TEST_CASE("simulate writes the timeline and its ground truth") {
  const auto dir = shared_root() / "sim";
  fs::create_directories(dir);
  auto out = (dir / "sim.ndjson").string();
  auto r = cli({"--seed", "7", "simulate", "--weeks", "1", "--out", out, "--corpus-out", (dir / "c.ndjson").string()});
  REQUIRE(r.code == 0);
  std::istringstream lines(stdcoder::read_file(out));
  std::string a, b, extra;
  std::getline(lines, a);
  std::getline(lines, b);
  CHECK(!std::getline(lines, extra));
  auto timeline = json::parse(a), truth = json::parse(b);
  CHECK(timeline["seed"] == 7);
  CHECK(truth.contains("runs"));
  CHECK(fs::exists(out + ".manifest.json"));
  auto again = (dir / "sim2.ndjson").string();
  REQUIRE(cli({"--seed", "7", "simulate", "--weeks", "1", "--out", again}).code == 0);
  CHECK(stdcoder::read_file(again) == stdcoder::read_file(out));
}

TEST_CASE("pipeline config errors") {
  const auto dir = shared_root() / "badcfg";
  auto cfg = small_config(shared_root() / "repo", dir / "work");
  cfg["analyses"] = {{"astrology", json::object()}};
  CHECK(cli({"pipeline", "--config", write_config(dir, cfg).string()}).code == 1);
  CHECK(cli({"pipeline", "--config", (dir / "absent.json").string()}).code == 2);
}
