#pragma once

// INI-style experiment configuration:
//
//   # comment
//   [section]
//   key = value
//
// Keys are addressed as "section.key". Parsing keeps line numbers so that
// typed validation can point back at the offending line.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coupconc {

class Config {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    std::size_t line = 0;  // 0 for entries set programmatically
  };

  /// Throws ConfigError with the line number on malformed input.
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  /// Canonical text: sections in first-appearance order, one "key = value"
  /// per line, no comments. parse(serialize()) reproduces the entries.
  std::string serialize() const;

  /// "section.key" -> value.
  std::optional<std::string> get(const std::string& dotted) const;
  const Entry* find(const std::string& dotted) const;
  /// Inserts or overwrites; new keys go to the end of their section.
  void set(const std::string& dotted, const std::string& value);
  /// Removes a key; returns whether it was present.
  bool erase(const std::string& dotted);
  /// Applies an override "section.key=value".
  void apply_override(const std::string& assignment);

  const std::vector<Entry>& entries() const { return entries_; }
  friend bool operator==(const Config& a, const Config& b);

 private:
  std::vector<Entry> entries_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// =============================================================================
// Typed view
// =============================================================================

struct ExperimentConfig {
  // [chain]
  std::string family = "hoc_case3";  // hoc_case1|hoc_case2|hoc_case3|hoc_custom|matrix
  double parameter = 0.5;            // alpha, gamma or q
  std::vector<double> prefix;        // q overrides (hoc) or the q list (hoc_custom)
  std::size_t cap = 40;
  double mass_tol = 1.0;
  std::vector<std::vector<double>> matrix;  // family = matrix
  // [coupling]
  std::string coupling = "default";  // default|quantile|independent|coalesced_independent
  std::size_t start_x = 1, start_y = 0;
  std::size_t horizon = 100;         // rows in coupling.csv
  // [bounds]
  double epsilon = 0.1;
  std::vector<int> orders = {1, 2};
  std::size_t min_horizon = 500;
  std::size_t max_horizon = 1u << 16;
  double tol = 1e-10;
  std::optional<std::pair<std::size_t, std::size_t>> worst_pair;
  std::vector<double> t_grid = {0.05, 0.1, 0.2, 0.5};
  // [verify]
  std::string functional = "empirical_mean";  // empirical_mean|hamming_to_path|site_indicator|constant
  std::size_t observable_state = 0;           // g = 1{x = state}; site for site_indicator
  std::size_t n = 100;
  std::size_t replicas = 10000;
  std::vector<double> lambda_grid = {-5.0, -1.0, 1.0, 5.0};
  // [hamming]
  std::size_t hamming_n = 10;
  std::size_t set_coordinate = 0;  // A = {x : x_coordinate = set_state}
  std::size_t set_state = 0;
  int hamming_p = 1;
  std::string hamming_constant = "variance";  // variance (p = 1) | moment
  std::vector<double> eps_grid = {0.3, 0.4, 0.5, 0.6, 0.8, 1.0};
  // [run]
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Reads and range-checks every known key; unknown keys are errors.
/// Throws ConfigError(line, "section.key", reason).
ExperimentConfig to_experiment(const Config& config);

}  // namespace coupconc
