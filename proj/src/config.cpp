#include "coupconc/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "coupconc/errors.hpp"

namespace coupconc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::pair<std::string, std::string> split_dotted(const std::string& dotted) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos || !valid_name(dotted.substr(0, dot)) || !valid_name(dotted.substr(dot + 1)))
    throw ConfigError(0, dotted, "expected section.key");
  return {dotted.substr(0, dot), dotted.substr(dot + 1)};
}

}  // namespace

// =============================================================================
// Text form
// =============================================================================

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string raw, section;
  std::set<std::string> seen;
  for (std::size_t line = 1; std::getline(in, raw); ++line) {
    const auto s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, "", "unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!valid_name(section)) throw ConfigError(line, "", "bad section name '" + section + "'");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "", "expected key = value");
    const auto key = trim(std::string_view(s).substr(0, eq));
    const auto value = trim(std::string_view(s).substr(eq + 1));
    if (section.empty()) throw ConfigError(line, key, "key outside any [section]");
    if (!valid_name(key)) throw ConfigError(line, key, "bad key name");
    const auto dotted = section + "." + key;
    if (!seen.insert(dotted).second) throw ConfigError(line, dotted, "duplicate key");
    cfg.entries_.push_back({section, key, value, line});
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "", "cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string Config::serialize() const {
  std::vector<std::string> order;
  for (const auto& e : entries_)
    if (std::find(order.begin(), order.end(), e.section) == order.end()) order.push_back(e.section);
  std::string out;
  for (const auto& sec : order) {
    if (!out.empty()) out += "\n";
    out += "[" + sec + "]\n";
    for (const auto& e : entries_)
      if (e.section == sec) out += e.key + " = " + e.value + "\n";
  }
  return out;
}

const Config::Entry* Config::find(const std::string& dotted) const {
  const auto [sec, key] = split_dotted(dotted);
  for (const auto& e : entries_)
    if (e.section == sec && e.key == key) return &e;
  return nullptr;
}

std::optional<std::string> Config::get(const std::string& dotted) const {
  if (const auto* e = find(dotted)) return e->value;
  return std::nullopt;
}

void Config::set(const std::string& dotted, const std::string& value) {
  const auto [sec, key] = split_dotted(dotted);
  if (value.find('\n') != std::string::npos) throw ConfigError(0, dotted, "value spans lines");
  for (auto& e : entries_)
    if (e.section == sec && e.key == key) {
      e.value = trim(value);
      return;
    }
  // Keep sections contiguous: insert after the section's last entry.
  auto pos = entries_.end();
  for (auto it = entries_.begin(); it != entries_.end(); ++it)
    if (it->section == sec) pos = it + 1;
  entries_.insert(pos, {sec, key, trim(value), 0});
}

bool Config::erase(const std::string& dotted) {
  const auto [sec, key] = split_dotted(dotted);
  const auto n = std::erase_if(entries_, [&](const Entry& e) { return e.section == sec && e.key == key; });
  return n > 0;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(0, assignment, "override must be section.key=value");
  set(trim(std::string_view(assignment).substr(0, eq)), assignment.substr(eq + 1));
}

bool operator==(const Config& a, const Config& b) {
  return std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(), b.entries_.end(),
                    [](const auto& x, const auto& y) {
                      return x.section == y.section && x.key == y.key && x.value == y.value;
                    });
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

// =============================================================================
// Typed view
// =============================================================================

namespace {

class Reader {
 public:
  explicit Reader(const Config& c) : cfg_(c) {}

  template <typename T>
  void number(const std::string& key, T& out) {
    const auto* e = take(key);
    if (!e) return;
    out = parse_number<T>(e->value, *e);
  }
  void text(const std::string& key, std::string& out) {
    if (const auto* e = take(key)) out = e->value;
  }
  template <typename T>
  void list(const std::string& key, std::vector<T>& out) {
    const auto* e = take(key);
    if (!e) return;
    out.clear();
    std::string item;
    std::istringstream in(e->value);
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(parse_number<T>(item, *e));
    }
  }
  void matrix(const std::string& key, std::vector<std::vector<double>>& out) {
    const auto* e = take(key);
    if (!e) return;
    out.clear();
    std::string row;
    std::istringstream rows(e->value);
    while (std::getline(rows, row, ';')) {
      std::replace(row.begin(), row.end(), ',', ' ');
      std::istringstream cells(row);
      std::vector<double> r;
      for (std::string cell; cells >> cell;) r.push_back(parse_number<double>(cell, *e));
      if (!r.empty()) out.push_back(std::move(r));
    }
  }
  const Config::Entry* entry(const std::string& key) const { return cfg_.find(key); }
  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    const auto* e = cfg_.find(key);
    throw ConfigError(e ? e->line : 0, key, why);
  }
  void reject_unknown() const {
    for (const auto& e : cfg_.entries())
      if (!used_.count(e.section + "." + e.key))
        throw ConfigError(e.line, e.section + "." + e.key, "unknown key");
  }

 private:
  const Config::Entry* take(const std::string& key) {
    used_.insert(key);
    return cfg_.find(key);
  }
  template <typename T>
  static T parse_number(const std::string& s, const Config::Entry& e) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end)
      throw ConfigError(e.line, e.section + "." + e.key, "cannot parse number '" + s + "'");
    return v;
  }
  const Config& cfg_;
  std::set<std::string> used_;
};

}  // namespace

ExperimentConfig to_experiment(const Config& cfg) {
  ExperimentConfig x;
  Reader r(cfg);
  r.text("chain.family", x.family);
  r.number("chain.parameter", x.parameter);
  r.list("chain.prefix", x.prefix);
  r.number("chain.cap", x.cap);
  r.number("chain.mass_tol", x.mass_tol);
  r.matrix("chain.matrix", x.matrix);

  r.text("coupling.kind", x.coupling);
  std::vector<std::size_t> start;
  r.list("coupling.start", start);
  r.number("coupling.horizon", x.horizon);

  r.number("bounds.epsilon", x.epsilon);
  r.list("bounds.orders", x.orders);
  r.number("bounds.min_horizon", x.min_horizon);
  r.number("bounds.max_horizon", x.max_horizon);
  r.number("bounds.tol", x.tol);
  std::vector<std::size_t> worst;
  r.list("bounds.worst_pair", worst);
  r.list("bounds.t_grid", x.t_grid);

  r.text("verify.functional", x.functional);
  r.number("verify.observable_state", x.observable_state);
  r.number("verify.n", x.n);
  r.number("verify.replicas", x.replicas);
  r.list("verify.lambda_grid", x.lambda_grid);

  r.number("hamming.n", x.hamming_n);
  r.number("hamming.set_coordinate", x.set_coordinate);
  r.number("hamming.set_state", x.set_state);
  r.number("hamming.p", x.hamming_p);
  r.text("hamming.constant", x.hamming_constant);
  r.list("hamming.eps_grid", x.eps_grid);

  r.number("run.seed", x.seed);
  r.number("run.threads", x.threads);
  r.reject_unknown();

  // ---- ranges ----
  static const std::set<std::string> families = {"hoc_case1", "hoc_case2", "hoc_case3", "hoc_custom",
                                                  "matrix"};
  if (!families.count(x.family)) r.fail("chain.family", "unknown family '" + x.family + "'");
  if (x.family == "matrix") {
    if (x.matrix.empty()) r.fail("chain.matrix", "family = matrix needs chain.matrix");
    for (const auto& row : x.matrix)
      if (row.size() != x.matrix.size()) r.fail("chain.matrix", "matrix must be square");
  } else if (x.cap < 2) {
    r.fail("chain.cap", "cap must be at least 2");
  }
  if (x.family == "hoc_case1" && !(x.parameter > 0.0 && x.parameter < 1.0))
    r.fail("chain.parameter", "case1 needs 0 < alpha < 1");
  if (x.family == "hoc_case2" && !(x.parameter > 0.0)) r.fail("chain.parameter", "case2 needs gamma > 0");
  if (x.family == "hoc_case3" && !(x.parameter > 0.0 && x.parameter < 1.0))
    r.fail("chain.parameter", "case3 needs 0 < q < 1");
  if (!(x.mass_tol > 0.0 && x.mass_tol <= 1.0)) r.fail("chain.mass_tol", "must lie in (0, 1]");

  static const std::set<std::string> couplings = {"default", "quantile", "independent",
                                                  "coalesced_independent"};
  if (!couplings.count(x.coupling)) r.fail("coupling.kind", "unknown coupling '" + x.coupling + "'");
  if (!start.empty()) {
    if (start.size() != 2) r.fail("coupling.start", "expected two states x, y");
    x.start_x = start[0];
    x.start_y = start[1];
  }
  if (x.horizon < 1) r.fail("coupling.horizon", "must be at least 1");

  if (!(x.epsilon > 0.0)) r.fail("bounds.epsilon", "must be positive");
  for (int p : x.orders)
    if (p < 1) r.fail("bounds.orders", "moment orders must be >= 1");
  if (x.min_horizon < 1 || x.max_horizon < x.min_horizon)
    r.fail("bounds.max_horizon", "need 1 <= min_horizon <= max_horizon");
  if (!(x.tol > 0.0)) r.fail("bounds.tol", "must be positive");
  if (!worst.empty()) {
    if (worst.size() != 2) r.fail("bounds.worst_pair", "expected two states u, v");
    x.worst_pair = std::pair{worst[0], worst[1]};
  }
  for (double t : x.t_grid)
    if (!(t > 0.0)) r.fail("bounds.t_grid", "grid points must be positive");

  static const std::set<std::string> functionals = {"empirical_mean", "hamming_to_path", "site_indicator",
                                                    "constant"};
  if (!functionals.count(x.functional)) r.fail("verify.functional", "unknown functional '" + x.functional + "'");
  if (x.n < 1) r.fail("verify.n", "must be at least 1");
  if (x.replicas < 100) r.fail("verify.replicas", "need at least 100 replicas");

  if (x.hamming_n < 1) r.fail("hamming.n", "must be at least 1");
  if (x.set_coordinate >= x.hamming_n) r.fail("hamming.set_coordinate", "must be below hamming.n");
  if (x.hamming_p < 1) r.fail("hamming.p", "must be >= 1");
  if (x.hamming_constant != "variance" && x.hamming_constant != "moment")
    r.fail("hamming.constant", "expected variance or moment");
  if (x.hamming_constant == "variance" && x.hamming_p != 1)
    r.fail("hamming.constant", "the variance constant serves p = 1 only");
  return x;
}

}  // namespace coupconc
