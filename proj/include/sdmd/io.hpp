#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "sdmd/linalg.hpp"

namespace sdmd {

using json = nlohmann::json;

// Shortest-roundtrip decimal with 17 significant digits ("%.17g").
// All numeric CSV output goes through this formatter.
std::string format_g17(double v);

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames, so readers never observe a
// partially written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string sha1_hex(const void* data, std::size_t n);

// Git-style content hash: sha1 over "blob <size>\0" + content.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Numeric matrix CSV with a single header row.
void write_matrix_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header, const Mat& values);

struct CsvTable {
  std::vector<std::string> header;
  Mat values;
};

CsvTable read_matrix_csv(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace sdmd
