#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "stdcoder/common.hpp"
#include "support/fixture_repo.hpp"

using namespace stdcoder;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("derived seeds are stable and distinct per stage") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  CHECK(seen.size() == 1000);
}

TEST_CASE("uniform01 stays in [0, 1) and uses the top 53 bits") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10000; ++i) {
    double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  struct Max {
    std::uint64_t operator()() { return ~0ULL; }
  } top;
  CHECK(uniform01(top) == 1.0 - 0x1.0p-53);
}

TEST_CASE("format_double round-trips at 17 digits") {
  for (double v : {0.1, 1.0 / 3.0, 7.38, 1e-300, -2.5e17}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("weekday_of_minute counts Monday as 0") {
  CHECK(weekday_of_minute(0) == 3);                      // 1970-01-01, Thursday
  CHECK(weekday_of_minute(19723LL * 1440) == 0);         // 2024-01-01, Monday
  CHECK(weekday_of_minute(19723LL * 1440 + 1439) == 0);
  CHECK(weekday_of_minute(19723LL * 1440 + 5 * 1440) == 5);
  CHECK(weekday_of_minute(-1) == 2);
}

TEST_CASE("write_file_atomic replaces content and leaves no temp file") {
  auto dir = fixture::temp_dir("atomic");
  auto p = dir / "sub" / "x.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  CHECK(read_file(p) == "two");
  CHECK_FALSE(std::filesystem::exists(dir / "sub" / "x.txt.tmp"));
  CHECK_THROWS_AS(read_file(dir / "missing"), DataError);
  std::filesystem::remove_all(dir);
}
