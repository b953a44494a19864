#pragma once

// `key = value` run configuration with a fixed set of known keys per command.
// Later sources override earlier ones; the resolved set echoes back as a file
// that reproduces the run.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/errors.hpp"
#include "bayeslink/io.hpp"

namespace bayeslink {

class RunConfig {
 public:
  RunConfig(std::string command, std::map<std::string, std::string> defaults,
            std::vector<std::string> open_prefixes = {})
      : command_(std::move(command)), values_(std::move(defaults)), prefixes_(std::move(open_prefixes)) {}

  const std::string& command() const noexcept { return command_; }

  bool known(const std::string& key) const {
    if (values_.count(key)) return true;
    return std::any_of(prefixes_.begin(), prefixes_.end(), [&](const std::string& p) {
      return key.size() > p.size() && key.compare(0, p.size(), p) == 0;
    });
  }

  void set(const std::string& key, const std::string& value, const std::string& where = "") {
    if (!known(key)) {
      throw ConfigError("unknown key '" + key + "' for command " + command_ + (where.empty() ? "" : " at " + where));
    }
    values_[key] = value;
  }

  // `key = value` lines; '#' starts a comment.
  void load_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto where = source + ":" + std::to_string(lineno);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value' at " + where);
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
  }

  void load_file(const std::string& path) { load_text(read_file(path), path); }

  bool has(const std::string& key) const {
    auto it = values_.find(key);
    return it != values_.end() && !it->second.empty();
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("no key '" + key + "' for command " + command_);
    return it->second;
  }

  const std::string& require(const std::string& key) const {
    const auto& v = str(key);
    if (v.empty()) throw ConfigError("missing required key '" + key + "' for command " + command_);
    return v;
  }

  std::int64_t i64(const std::string& key) const {
    return parse<std::int64_t>(key, [](const std::string& s, std::size_t* p) { return std::stoll(s, p); });
  }
  std::uint64_t u64(const std::string& key) const {
    const auto& v = require(key);
    if (!v.empty() && v[0] == '-') throw ConfigError("key '" + key + "' must be nonnegative");
    return parse<std::uint64_t>(key, [](const std::string& s, std::size_t* p) { return std::stoull(s, p); });
  }
  double dbl(const std::string& key) const {
    return parse<double>(key, [](const std::string& s, std::size_t* p) { return std::stod(s, p); });
  }

  bool flag(const std::string& key) const {
    const auto& v = require(key);
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("key '" + key + "' expects on/off, got '" + v + "'");
  }

  // Comma separated list of raw strings.
  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    const auto& v = str(key);
    if (trim(v).empty()) return out;
    std::size_t start = 0;
    for (;;) {
      const auto c = v.find(',', start);
      out.push_back(trim(v.substr(start, c == std::string::npos ? std::string::npos : c - start)));
      if (c == std::string::npos) break;
      start = c + 1;
    }
    return out;
  }

  // Keys starting with `prefix`, with the prefix removed.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : values_) {
      if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) out[k.substr(prefix.size())] = v;
    }
    return out;
  }

  std::string echo() const {
    std::string s = "# bayeslink " + command_ + "\n";
    for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
    return s;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  template <typename T, typename F>
  T parse(const std::string& key, F f) const {
    const auto& v = require(key);
    try {
      std::size_t pos = 0;
      T x = f(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' has malformed value '" + v + "'");
    }
  }

  std::string command_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> prefixes_;
};

}  // namespace bayeslink
