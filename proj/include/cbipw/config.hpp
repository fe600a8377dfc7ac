#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/csv.hpp"

namespace cbipw {

inline constexpr const char* kToolVersion = "0.1.0";

// Line-oriented `key = value` configuration with bracketed sections.
// Comments start with '#'. Serialization is canonical, so
// parse(serialize(c)) == c for any structurally valid config.
struct ConfigFile {
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections;

  const Section* find(const std::string& name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const {
    if (const Section* s = find(section))
      for (const auto& [k, v] : s->entries)
        if (k == key) return v;
    return std::nullopt;
  }

  friend bool operator==(const ConfigFile& a, const ConfigFile& b) {
    if (a.sections.size() != b.sections.size()) return false;
    for (std::size_t i = 0; i < a.sections.size(); ++i)
      if (a.sections[i].name != b.sections[i].name ||
          a.sections[i].entries != b.sections[i].entries)
        return false;
    return true;
  }
};

inline ConfigFile parse_config(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (const auto hash = t.find('#'); hash != std::string::npos) t = detail::trim(t.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config: malformed section header at line " +
                                 std::to_string(line_no));
      cfg.sections.push_back({detail::trim(t.substr(1, t.size() - 2)), {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected 'key = value' at line " +
                               std::to_string(line_no));
    if (cfg.sections.empty())
      throw std::runtime_error("config: entry before any [section] at line " +
                               std::to_string(line_no));
    cfg.sections.back().entries.emplace_back(detail::trim(t.substr(0, eq)),
                                             detail::trim(t.substr(eq + 1)));
  }
  return cfg;
}

inline std::string serialize_config(const ConfigFile& cfg) {
  std::ostringstream out;
  for (const auto& s : cfg.sections) {
    out << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Rejects sections or keys outside the declared schema.
inline void validate_known_keys(const ConfigFile& cfg,
                                const std::map<std::string, std::set<std::string>>& schema) {
  for (const auto& s : cfg.sections) {
    const auto it = schema.find(s.name);
    if (it == schema.end())
      throw std::runtime_error("config: unknown section [" + s.name + "]");
    for (const auto& [k, v] : s.entries)
      if (!it->second.contains(k))
        throw std::runtime_error("config: unknown key '" + k + "' in section [" + s.name + "]");
  }
}

inline std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t config_hash(const ConfigFile& cfg) {
  return fnv1a_hash(serialize_config(cfg));
}

// Run provenance: everything needed to reproduce an output directory.
struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string created_utc;
  std::vector<std::pair<std::string, std::string>> parameters;

  std::string to_text() const {
    std::ostringstream out;
    out << "tool = cbipw " << kToolVersion << '\n';
    out << "command = " << command << '\n';
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_hash));
    out << "config_hash = " << hex << '\n';
    out << "seed = " << seed << '\n';
    out << "created_utc = " << created_utc << '\n';
    for (const auto& [k, v] : parameters) out << "param." << k << " = " << v << '\n';
    return out.str();
  }
};

}  // namespace cbipw
