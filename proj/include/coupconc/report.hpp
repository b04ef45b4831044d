#pragma once

// Serialized outputs: a run manifest embedded in every file, JSON documents
// and RFC-4180 CSV tables.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "coupconc/config.hpp"

namespace coupconc {

inline constexpr const char* kVersion = "coupconc 1.0.0";

struct Manifest {
  std::string command;
  std::string config_hash;  // FNV-1a of the canonical config text
  std::uint64_t seed = 0;
  std::string version = kVersion;
};

Manifest make_manifest(const std::string& command, const Config& config, std::uint64_t seed);
nlohmann::ordered_json manifest_json(const Manifest& m);

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite.
std::string format_double(double v);
/// Quotes a field if it contains a comma, quote, CR or LF.
std::string csv_field(const std::string& s);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> row);
  /// '#'-prefixed manifest lines, then the header and rows, CRLF-free.
  std::string render(const Manifest& manifest) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Pretty-printed JSON with the manifest under "manifest".
std::string render_json(nlohmann::ordered_json body, const Manifest& manifest);

/// Writes the file in binary mode; throws Error on failure.
void write_text(const std::string& path, const std::string& content);

}  // namespace coupconc
