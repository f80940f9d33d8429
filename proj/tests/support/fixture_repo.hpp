#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixture {

struct RepoSpec {
  std::vector<std::string> authors{"alice@example.com", "bob@example.com"};
  int weeks = 2;
  std::uint64_t seed = 1;
};

// A git repository of Java edits whose author dates follow simulated office
// hours. Returns the number of commits made.
std::size_t build_java_repo(const std::filesystem::path& dir, const RepoSpec& spec = {});

// Runs a shell command, throwing on a non-zero exit.
void sh(const std::string& cmd);

std::filesystem::path temp_dir(const std::string& name);

}  // namespace fixture
