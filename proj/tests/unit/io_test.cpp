#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "sdmd/io.hpp"

using namespace sdmd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("sdmd_io_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("sha1 matches the FIPS 180-1 vectors") {
  CHECK(sha1_hex("", 0) == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(sha1_hex("abc", 3) == "a9993e364706816aba3e25717850c26c9cd0d89d");
  const std::string a(1000000, 'a');
  CHECK(sha1_hex(a.data(), a.size()) == "34aa973cd4c4daa4f61eeb2bdbad27316534016f");
}

TEST_CASE("git blob hash matches git's own values") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(git_blob_hash("what is up, doc?") == "bd9dbf5aae1a3862dd1526723246b20206e5fc37");
}

TEST_CASE("format_g17 round-trips doubles exactly") {
  const double vals[] = {0.0,   1.0,      -1.0,     0.1,     1.0 / 3.0, 1e-308,
                         1e308, 1.5e-17,  -2.25,    3.14159, 1e17,      0x1.fffffffffffffp-1};
  for (double v : vals) {
    const std::string s = format_g17(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("matrix csv round-trips values and header") {
  const fs::path dir = temp_dir("csv");
  Mat m(3, 2);
  m << 1.0, -0.5, 1.0 / 3.0, 2e-15, -1e100, 0.0;
  write_matrix_csv(dir / "t.csv", {"alpha", "beta"}, m);
  const CsvTable t = read_matrix_csv(dir / "t.csv");
  REQUIRE(t.header.size() == 2);
  CHECK(t.header[0] == "alpha");
  CHECK(t.header[1] == "beta");
  REQUIRE(t.values.rows() == 3);
  REQUIRE(t.values.cols() == 2);
  CHECK((t.values - m).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("atomic_write_file replaces content and leaves no temporaries") {
  const fs::path dir = temp_dir("atomic");
  atomic_write_file(dir / "f.txt", "first");
  atomic_write_file(dir / "f.txt", "second");
  CHECK(read_file(dir / "f.txt") == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("json file round-trip") {
  const fs::path dir = temp_dir("json");
  const json j = {{"a", 1}, {"b", {1.5, "x"}}};
  write_json_file(dir / "j.json", j);
  CHECK(read_json_file(dir / "j.json") == j);
  fs::remove_all(dir);
}
