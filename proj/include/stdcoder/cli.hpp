#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace stdcoder::cli {

inline constexpr const char* kVersion = "0.1.0";

// Written next to the primary output of every artifact-producing command as
// <output>.manifest.json.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;   // path -> content hash
  std::map<std::string, std::string> outputs;  // path -> content hash
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::string version = kVersion;

  nlohmann::json to_json() const;
};

std::filesystem::path manifest_path(const std::filesystem::path& primary_output);

// argv without the program name. 0 ok, 1 usage error, 2 data or model error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Runs every stage of a JSON pipeline config, skipping stages whose inputs are
// unchanged since the last run in the same work directory.
int run_pipeline(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed_override,
                 std::ostream& out, std::ostream& err);

}  // namespace stdcoder::cli
