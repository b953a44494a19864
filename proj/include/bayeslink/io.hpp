#pragma once

// Tab-separated outputs (traces, pair probabilities, quantile summaries,
// match lists) and their readers. Files are written to a temporary sibling and
// renamed into place.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bayeslink/core.hpp"
#include "bayeslink/decision.hpp"
#include "bayeslink/draws.hpp"
#include "bayeslink/errors.hpp"
#include "bayeslink/numeric.hpp"

namespace bayeslink {

inline std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// iter, N, T, then one column per named parameter.
inline std::string trace_tsv(const PosteriorDraws& d) {
  std::string s = "iter\tN\tT";
  for (const auto& name : d.param_names) s += "\t" + name;
  s += "\n";
  for (std::size_t r = 0; r < d.retained(); ++r) {
    s += std::to_string(d.iteration[r]) + "\t" + std::to_string(d.N[r]) + "\t" +
         std::to_string(d.T[r]);
    for (double v : d.params[r]) s += "\t" + fmt_num(v);
    s += "\n";
  }
  return s;
}

// 1-based a, b; pairs never matched are omitted.
inline std::string pair_probs_tsv(const PairPosterior& post) {
  std::string s = "a\tb\tposterior_probability\n";
  for (const auto& [ab, p] : post.probs) {
    if (p <= 0.0) continue;
    s += std::to_string(ab.first + 1) + "\t" + std::to_string(ab.second + 1) + "\t" + fmt_num(p) +
         "\n";
  }
  return s;
}

inline std::string matches_tsv(const MatchingMatrix& G, const PairPosterior* post = nullptr) {
  std::string s = post ? "a\tb\tposterior_probability\n" : "a\tb\n";
  for (auto [a, b] : G.pairs()) {
    s += std::to_string(a + 1) + "\t" + std::to_string(b + 1);
    if (post) s += "\t" + fmt_num(post->prob(a, b));
    s += "\n";
  }
  return s;
}

namespace detail {
inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}
}  // namespace detail

// Reads a pair-probability table. Dimensions default to the largest indices seen.
inline PairPosterior read_pair_probs(const std::string& text, std::size_t nA = 0,
                                     std::size_t nB = 0) {
  std::istringstream in(text);
  std::string line;
  PairPosterior post;
  std::size_t lineno = 0;
  std::size_t max_a = 0, max_b = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (lineno == 1 && f.size() >= 1 && f[0] == "a") continue;
    if (f.size() < 3) throw IngestError("pair file line " + std::to_string(lineno) + ": need a, b, probability");
    std::size_t a = 0, b = 0;
    double p = 0.0;
    try {
      a = std::stoul(f[0]);
      b = std::stoul(f[1]);
      p = std::stod(f[2]);
    } catch (const std::exception&) {
      throw IngestError("pair file line " + std::to_string(lineno) + ": not numeric");
    }
    if (a < 1 || b < 1) throw IngestError("pair file line " + std::to_string(lineno) + ": indices are 1-based");
    post.probs[{a - 1, b - 1}] = p;
    max_a = std::max(max_a, a);
    max_b = std::max(max_b, b);
  }
  post.nA = nA ? nA : max_a;
  post.nB = nB ? nB : max_b;
  post.validate();
  return post;
}

// Quantiles (2.5, 5, 50, 97.5) and mean of one scalar series.
struct ScalarSummary {
  std::string name;
  double mean = 0.0;
  double q025 = 0.0;
  double q05 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

inline ScalarSummary summarize(const std::string& name, std::vector<double> xs) {
  ScalarSummary s;
  s.name = name;
  if (xs.empty()) return s;
  s.mean = mean_and_se(xs).mean;
  std::sort(xs.begin(), xs.end());
  s.q025 = empirical_quantile<double>(xs, 0.025);
  s.q05 = empirical_quantile<double>(xs, 0.05);
  s.q50 = empirical_quantile<double>(xs, 0.5);
  s.q975 = empirical_quantile<double>(xs, 0.975);
  return s;
}

inline std::vector<ScalarSummary> summarize(const PosteriorDraws& d) {
  std::vector<ScalarSummary> out;
  out.push_back(summarize("N", {d.N.begin(), d.N.end()}));
  out.push_back(summarize("T", {d.T.begin(), d.T.end()}));
  for (const auto& name : d.param_names) out.push_back(summarize(name, d.column(name)));
  return out;
}

inline std::string summary_tsv(const std::vector<ScalarSummary>& rows) {
  std::string s = "quantity\tmean\tq2.5\tq5\tq50\tq97.5\n";
  for (const auto& r : rows) {
    s += r.name + "\t" + fmt_num(r.mean) + "\t" + fmt_num(r.q025) + "\t" + fmt_num(r.q05) + "\t" +
         fmt_num(r.q50) + "\t" + fmt_num(r.q975) + "\n";
  }
  return s;
}

}  // namespace bayeslink
