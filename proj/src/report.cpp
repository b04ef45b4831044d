#include "coupconc/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "coupconc/errors.hpp"

namespace coupconc {

Manifest make_manifest(const std::string& command, const Config& config, std::uint64_t seed) {
  // Thread count never changes results, so it stays out of the hash.
  Config hashed = config;
  hashed.erase("run.threads");
  return {command, hex64(fnv1a64(hashed.serialize())), seed, kVersion};
}

nlohmann::ordered_json manifest_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["version"] = m.version;
  return j;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw PreconditionError("CSV row has the wrong number of fields");
  rows_.push_back(std::move(row));
}

std::string CsvTable::render(const Manifest& m) const {
  std::string out;
  out += "# command=" + m.command + "\n";
  out += "# config_hash=" + m.config_hash + "\n";
  out += "# seed=" + std::to_string(m.seed) + "\n";
  out += "# version=" + m.version + "\n";
  auto line = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

std::string render_json(nlohmann::ordered_json body, const Manifest& manifest) {
  nlohmann::ordered_json doc;
  doc["manifest"] = manifest_json(manifest);
  for (auto& [k, v] : body.items()) doc[k] = std::move(v);
  return doc.dump(2) + "\n";
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw Error("write failed for " + path);
}

}  // namespace coupconc
