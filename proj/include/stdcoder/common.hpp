#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stdcoder {

// Bad input data or model files. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad invocation. The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kMinutesPerDay = 1440;
inline constexpr std::int64_t kMinutesPerWeek = 10080;

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

// Stable per-stage seed derivation from a root seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

// Uniform double in [0, 1) from the top 53 bits of a 64-bit engine draw.
template <class Engine>
double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Fixed 17-significant-digit rendering used by every CSV writer.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Epoch minute -> day index with Monday = 0.
inline int weekday_of_minute(std::int64_t epoch_minute) {
  std::int64_t day = epoch_minute / kMinutesPerDay;
  if (epoch_minute < 0 && epoch_minute % kMinutesPerDay != 0) --day;
  // 1970-01-01 was a Thursday.
  return static_cast<int>(((day + 3) % 7 + 7) % 7);
}

}  // namespace stdcoder
