#pragma once

// Delimited text files to coded record tables. Both files share one label
// dictionary per key variable; codes are 1-based positions in that dictionary.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/errors.hpp"
#include "bayeslink/io.hpp"

namespace bayeslink {

struct IngestSpec {
  char delimiter = 0;  // 0: detect among tab, comma, semicolon, else whitespace
  bool header = false;
  std::vector<Code> k;                                  // declared category counts
  std::map<std::size_t, std::vector<std::string>> domains;  // declared labels per variable
  std::vector<std::vector<std::size_t>> pattern;        // independence pattern, 0-based
};

struct Ingested {
  KeySchema schema;
  RecordTable xA;
  RecordTable xB;
  std::vector<std::vector<std::string>> labels;  // labels[i][code - 1]
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline char detect_delimiter(const std::string& line) {
  for (char c : {'\t', ',', ';'}) {
    if (line.find(c) != std::string::npos) return c;
  }
  return ' ';
}

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream in(line);
    std::string f;
    while (in >> f) out.push_back(f);
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = s[0] == '-' || s[0] == '+' ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

struct RawFile {
  std::string name;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // source line of each row
};

inline RawFile read_delimited(const std::string& name, const std::string& text, const IngestSpec& spec,
                              char& delim) {
  RawFile f;
  f.name = name;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_pending = spec.header;
  std::optional<std::size_t> width;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (delim == 0) delim = detect_delimiter(line);
    auto fields = split_fields(line, delim);
    if (!width) width = fields.size();
    if (fields.size() != *width) {
      throw IngestError(name + " line " + std::to_string(lineno) + ": expected " +
                        std::to_string(*width) + " fields, found " + std::to_string(fields.size()));
    }
    if (header_pending) {
      header_pending = false;
      continue;
    }
    f.rows.push_back(std::move(fields));
    f.lines.push_back(lineno);
  }
  if (f.rows.empty()) throw IngestError(name + ": no records");
  return f;
}

}  // namespace detail

// Parses both files from text; `nameA`/`nameB` only label error messages.
inline Ingested ingest_text(const std::string& nameA, const std::string& textA,
                            const std::string& nameB, const std::string& textB,
                            const IngestSpec& spec) {
  char delim = spec.delimiter;
  auto fa = detail::read_delimited(nameA, textA, spec, delim);
  if (spec.delimiter == 0) delim = 0;
  auto fb = detail::read_delimited(nameB, textB, spec, delim);
  const std::size_t h = fa.rows.front().size();
  if (fb.rows.front().size() != h) {
    throw IngestError(nameB + " line " + std::to_string(fb.lines.front()) + ": expected " +
                      std::to_string(h) + " fields as in " + nameA + ", found " +
                      std::to_string(fb.rows.front().size()));
  }
  if (!spec.k.empty() && spec.k.size() != h) {
    throw IngestError("declared k has " + std::to_string(spec.k.size()) + " entries but records have " +
                      std::to_string(h) + " fields");
  }
  for (const auto& [i, dom] : spec.domains) {
    if (i >= h) throw IngestError("domain declared for variable " + std::to_string(i + 1) + " of " + std::to_string(h));
    if (!spec.k.empty() && dom.size() != spec.k[i]) {
      throw IngestError("domain of variable " + std::to_string(i + 1) + " lists " +
                        std::to_string(dom.size()) + " labels but k = " + std::to_string(spec.k[i]));
    }
  }

  std::vector<std::vector<std::string>> labels(h);
  std::vector<std::map<std::string, Code>> code_of(h);
  std::vector<Code> k(h);
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < h; ++i) {
    if (auto it = spec.domains.find(i); it != spec.domains.end()) {
      labels[i] = it->second;
    } else if (!spec.k.empty()) {
      // Integer labels 1..k_i stand for themselves.
      for (Code c = 1; c <= spec.k[i]; ++c) labels[i].push_back(std::to_string(c));
    } else {
      std::set<std::string> seen;
      for (const auto* f : {&fa, &fb}) {
        for (const auto& row : f->rows) seen.insert(row[i]);
      }
      labels[i].assign(seen.begin(), seen.end());
      const bool numeric = std::all_of(labels[i].begin(), labels[i].end(), detail::is_integer);
      if (numeric) {
        std::sort(labels[i].begin(), labels[i].end(), [](const auto& x, const auto& y) {
          return std::stoll(x) < std::stoll(y);
        });
      }
      std::string msg = "variable " + std::to_string(i + 1) + ": k inferred as " +
                        std::to_string(std::max<std::size_t>(labels[i].size(), 2)) +
                        " from observed labels";
      if (labels[i].size() < 2) {
        labels[i].push_back("<unobserved>");
        msg += " (one label observed; a placeholder category was added)";
      }
      warnings.push_back(msg);
    }
    for (std::size_t c = 0; c < labels[i].size(); ++c) {
      if (!code_of[i].emplace(labels[i][c], static_cast<Code>(c + 1)).second) {
        throw IngestError("variable " + std::to_string(i + 1) + ": duplicate label '" + labels[i][c] + "'");
      }
    }
    k[i] = static_cast<Code>(labels[i].size());
    if (k[i] < 2) throw IngestError("variable " + std::to_string(i + 1) + " needs at least 2 categories");
  }

  KeySchema schema(k, spec.pattern);
  auto encode = [&](const detail::RawFile& f, char label) {
    std::vector<Code> codes;
    codes.reserve(f.rows.size() * h);
    for (std::size_t r = 0; r < f.rows.size(); ++r) {
      for (std::size_t i = 0; i < h; ++i) {
        auto it = code_of[i].find(f.rows[r][i]);
        if (it == code_of[i].end()) {
          throw IngestError(f.name + " line " + std::to_string(f.lines[r]) + ": label '" +
                            f.rows[r][i] + "' outside the domain of variable " + std::to_string(i + 1));
        }
        codes.push_back(it->second);
      }
    }
    return RecordTable(schema, std::move(codes), label);
  };
  auto xA = encode(fa, 'A');
  auto xB = encode(fb, 'B');
  return Ingested{std::move(schema), std::move(xA), std::move(xB), std::move(labels), std::move(warnings)};
}

inline Ingested ingest(const std::string& pathA, const std::string& pathB, const IngestSpec& spec) {
  return ingest_text(pathA, read_file(pathA), pathB, read_file(pathB), spec);
}

// Records back to delimited text using the label dictionary.
inline std::string export_table(const RecordTable& x, const std::vector<std::vector<std::string>>& labels,
                                char delimiter = '\t') {
  std::string s;
  for (std::size_t r = 0; r < x.n(); ++r) {
    for (std::size_t i = 0; i < x.h(); ++i) {
      if (i) s += delimiter;
      s += labels.at(i).at(x.at(r, i) - 1);
    }
    s += "\n";
  }
  return s;
}

inline std::string dictionary_tsv(const std::vector<std::vector<std::string>>& labels) {
  std::string s = "variable\tcode\tlabel\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t c = 0; c < labels[i].size(); ++c) {
      s += std::to_string(i + 1) + "\t" + std::to_string(c + 1) + "\t" + labels[i][c] + "\n";
    }
  }
  return s;
}

}  // namespace bayeslink
