#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bayeslink/baselines.hpp"
#include "bayeslink/config.hpp"
#include "bayeslink/decision.hpp"
#include "bayeslink/ingest.hpp"
#include "bayeslink/io.hpp"
#include "bayeslink/popsize.hpp"
#include "bayeslink/sampler.hpp"
#include "bayeslink/simulate.hpp"

namespace fs = std::filesystem;
using namespace bayeslink;

namespace {

using Defaults = std::map<std::string, std::string>;

void merge(Defaults& into, const Defaults& from) { into.insert(from.begin(), from.end()); }

const Defaults kCommon = {{"seed", "1"}, {"out", "out"}};
const Defaults kIngest = {{"file_a", ""}, {"file_b", ""}, {"delimiter", "auto"},
                          {"header", "off"}, {"k", ""}, {"pattern", ""}};
const Defaults kPrior = {{"prior_g", "2"},
                         {"prior_form", "gamma"},
                         {"capture_prior_factor", "off"},
                         {"n_cap", ""},
                         {"epsilon", "1e-12"}};

RunConfig make_config(const std::string& command) {
  Defaults d = kCommon;
  std::vector<std::string> prefixes;
  if (command == "link" || command == "baseline-fs" || command == "baseline-jaro") {
    merge(d, kIngest);
    merge(d, kPrior);
    prefixes.push_back("domain.");
  }
  if (command == "link") {
    merge(d, {{"iterations", "10000"},
              {"burn_in", "1000"},
              {"thin", "1"},
              {"inner_sweeps", "5"},
              {"draw_c", "on"},
              {"per_file_beta", "off"},
              {"dirichlet", "1"},
              {"theta_margins", ""},
              {"check_invariants", "off"}});
  } else if (command == "baseline-fs") {
    merge(d, {{"constrain_w_half", "on"}, {"em_tol", "1e-10"}, {"em_max_iter", "10000"}});
  } else if (command == "baseline-jaro") {
    merge(d, {{"iterations", "10000"}, {"burn_in", "1000"}, {"thin", "1"}, {"moves_per_iteration", "0"}});
  } else if (command == "popsize") {
    merge(d, kPrior);
    merge(d, {{"n_a", ""}, {"n_b", ""}, {"t", ""}});
    d["prior_form"] = "inverse-square";
  } else if (command == "estimate") {
    merge(d, {{"pair_probs", ""}, {"n_a", ""}, {"n_b", ""}});
  } else if (command == "simulate") {
    merge(d, kPrior);
    merge(d, {{"scenario", "1"},
              {"n", "90"},
              {"beta", "0.95"},
              {"replicates", "20"},
              {"iterations", "9000"},
              {"burn_in", "1000"},
              {"inner_sweeps", "5"},
              {"jaro_iterations", "9000"},
              {"jaro_burn_in", "1000"},
              {"methods", "hier,jaro,hybrid"},
              {"threads", "0"}});
  }
  return RunConfig(command, d, prefixes);
}

PriorConfig prior_from(const RunConfig& c) {
  PriorConfig p;
  p.g = c.dbl("prior_g");
  const auto& form = c.require("prior_form");
  if (form == "gamma") {
    p.n_prior_form = NPriorForm::gamma_form;
  } else if (form == "inverse-square" || form == "inverse_square") {
    p.n_prior_form = NPriorForm::inverse_square;
  } else {
    throw ConfigError("prior_form must be gamma or inverse-square, got '" + form + "'");
  }
  p.capture_prior_factor = c.flag("capture_prior_factor");
  if (c.has("n_cap")) p.n_cap = c.i64("n_cap");
  if (c.known("dirichlet")) p.dirichlet_default = c.dbl("dirichlet");
  p.validate();
  return p;
}

char delimiter_from(const std::string& v) {
  if (v == "auto") return 0;
  if (v == "tab" || v == "\\t" || v == "\t") return '\t';
  if (v == "space" || v == "whitespace") return ' ';
  if (v == "comma") return ',';
  if (v == "semicolon") return ';';
  if (v.size() == 1) return v[0];
  throw ConfigError("delimiter must be auto, tab, comma, semicolon, space or one character");
}

Code parse_code(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size() || v < 1) throw std::invalid_argument(s);
    return static_cast<Code>(v);
  } catch (const std::exception&) {
    throw ConfigError(what + ": expected a positive integer, got '" + s + "'");
  }
}

// "1,2;3" -> {{0,1},{2}}
std::vector<std::vector<std::size_t>> pattern_from(const std::string& v) {
  std::vector<std::vector<std::size_t>> out;
  if (RunConfig::trim(v).empty()) return out;
  std::stringstream groups(v);
  std::string group;
  while (std::getline(groups, group, ';')) {
    std::vector<std::size_t> g;
    std::stringstream vars(group);
    std::string var;
    while (std::getline(vars, var, ',')) g.push_back(parse_code(RunConfig::trim(var), "pattern") - 1);
    out.push_back(g);
  }
  return out;
}

IngestSpec ingest_spec_from(const RunConfig& c) {
  IngestSpec s;
  s.delimiter = delimiter_from(c.str("delimiter"));
  s.header = c.flag("header");
  for (const auto& x : c.list("k")) s.k.push_back(parse_code(x, "k"));
  for (const auto& [var, labels] : c.with_prefix("domain.")) {
    const std::size_t i = parse_code(var, "domain variable") - 1;
    std::vector<std::string> dom;
    std::stringstream ss(labels);
    std::string l;
    while (std::getline(ss, l, ',')) dom.push_back(RunConfig::trim(l));
    s.domains[i] = dom;
  }
  s.pattern = pattern_from(c.str("pattern"));
  return s;
}

Ingested load_inputs(const RunConfig& c, const fs::path& out) {
  auto in = ingest(c.require("file_a"), c.require("file_b"), ingest_spec_from(c));
  for (const auto& w : in.warnings) std::cerr << "warning\t" << w << "\n";
  write_atomic(out / "dictionary.tsv", dictionary_tsv(in.labels));
  std::cout << "nA\t" << in.xA.n() << "\nnB\t" << in.xB.n() << "\nK\t" << in.schema.K() << "\n";
  return in;
}

// "24..30" or "24,25,29"
std::vector<std::int64_t> t_grid_from(const std::string& v) {
  std::vector<std::int64_t> out;
  if (auto dots = v.find(".."); dots != std::string::npos) {
    const auto lo = std::stoll(v.substr(0, dots));
    const auto hi = std::stoll(v.substr(dots + 2));
    for (auto t = lo; t <= hi; ++t) out.push_back(t);
    return out;
  }
  std::stringstream ss(v);
  std::string x;
  while (std::getline(ss, x, ',')) out.push_back(std::stoll(RunConfig::trim(x)));
  return out;
}

void write_chain_outputs(const PosteriorDraws& draws, const fs::path& out) {
  write_atomic(out / "trace.tsv", trace_tsv(draws));
  write_atomic(out / "summary.tsv", summary_tsv(summarize(draws)));
  if (!draws.has_pairs) return;
  const auto post = draws.pair_posterior();
  write_atomic(out / "pair_probs.tsv", pair_probs_tsv(post));
  const auto est = bayes_estimate(post);
  write_atomic(out / "matches.tsv", matches_tsv(est.G, &post));
  std::cout << "declared_matches\t" << est.G.T() << "\nconflicts_resolved\t"
            << (est.conflicts_resolved ? 1 : 0) << "\n";
}

void cmd_link(const RunConfig& c, const fs::path& out) {
  const auto in = load_inputs(c, out);
  SamplerConfig s;
  s.iterations = c.i64("iterations");
  s.burn_in = c.i64("burn_in");
  s.thin = c.i64("thin");
  s.inner_sweeps = static_cast<int>(c.i64("inner_sweeps"));
  s.seed = c.u64("seed");
  s.epsilon = c.dbl("epsilon");
  s.draw_C = c.flag("draw_c");
  s.per_file_beta = c.flag("per_file_beta");
  s.check_invariants = c.flag("check_invariants");
  for (const auto& m : c.list("theta_margins")) {
    const auto eq = m.find('=');
    if (eq == std::string::npos) throw ConfigError("theta margin '" + m + "' must look like var=code");
    s.theta_margins.push_back({parse_code(m.substr(0, eq), "theta margin") - 1,
                               parse_code(m.substr(eq + 1), "theta margin")});
  }
  const auto draws = run_chain(in.xA, in.xB, in.schema, prior_from(c), s);
  write_chain_outputs(draws, out);
}

void cmd_baseline_fs(const RunConfig& c, const fs::path& out) {
  const auto in = load_inputs(c, out);
  const auto data = build_comparisons(in.xA, in.xB, in.schema);
  const auto fit = em_fit(data, default_em_init(data), c.flag("constrain_w_half"), c.dbl("em_tol"),
                          static_cast<int>(c.i64("em_max_iter")));
  for (const auto& w : fit.warnings) std::cerr << "warning\t" << w << "\n";
  const auto scores = score_pairs(fit.params, data);

  std::string report = "pattern\tfrequency\tposterior_probability\tlambda\n";
  for (const auto& [y, count] : data.counts) {
    const auto& s = scores.by_pattern.at(y);
    report += format_pattern(y, data.h) + "\t" + std::to_string(count) + "\t" + fmt_num(s.posterior) +
              "\t" + fmt_num(std::exp(s.log_lambda)) + "\n";
  }
  write_atomic(out / "report.tsv", report);

  std::string params = "parameter\tvalue\nw\t" + fmt_num(fit.params.w) + "\n";
  for (std::size_t i = 0; i < data.h; ++i) params += "m_" + std::to_string(i + 1) + "\t" + fmt_num(fit.params.m[i]) + "\n";
  for (std::size_t i = 0; i < data.h; ++i) params += "u_" + std::to_string(i + 1) + "\t" + fmt_num(fit.params.u[i]) + "\n";
  params += "loglik\t" + fmt_num(fit.loglik) + "\niterations\t" + std::to_string(fit.iterations) +
            "\nconverged\t" + std::to_string(fit.converged) + "\nidentifiable\t" +
            std::to_string(fit.identifiable) + "\n";
  write_atomic(out / "params.tsv", params);

  const auto G = lp_assign(scores);
  write_atomic(out / "matches.tsv", matches_tsv(G));
  const auto pmf = hybrid_popsize(static_cast<std::int64_t>(G.T()), static_cast<std::int64_t>(in.xA.n()),
                                  static_cast<std::int64_t>(in.xB.n()), prior_from(c), c.dbl("epsilon"));
  ScalarSummary n{"N", pmf.mean(), static_cast<double>(pmf.quantile(0.025)),
                  static_cast<double>(pmf.quantile(0.05)), static_cast<double>(pmf.quantile(0.5)),
                  static_cast<double>(pmf.quantile(0.975))};
  write_atomic(out / "summary.tsv", summary_tsv({n}));
  std::cout << "declared_matches\t" << G.T() << "\nN_interval\t" << n.q025 << "\t" << n.q975 << "\n";
}

void cmd_baseline_jaro(const RunConfig& c, const fs::path& out) {
  const auto in = load_inputs(c, out);
  const auto data = build_comparisons(in.xA, in.xB, in.schema);
  JaroConfig j;
  j.iterations = c.i64("iterations");
  j.burn_in = c.i64("burn_in");
  j.thin = c.i64("thin");
  j.moves_per_iteration = c.i64("moves_per_iteration");
  j.seed = c.u64("seed");
  j.epsilon = c.dbl("epsilon");
  write_chain_outputs(jaro_constrained_chain(data, prior_from(c), j), out);
}

void cmd_popsize(const RunConfig& c, const fs::path& out) {
  const auto nA = c.i64("n_a");
  const auto nB = c.i64("n_b");
  const auto prior = prior_from(c);
  std::string report = "T\tq2.5\tq50\tq97.5\tmean\n";
  for (auto T : t_grid_from(c.require("t"))) {
    const auto pmf = n_posterior(T, nA, nB, prior, c.dbl("epsilon"));
    report += std::to_string(T) + "\t" + std::to_string(pmf.quantile(0.025)) + "\t" +
              std::to_string(pmf.quantile(0.5)) + "\t" + std::to_string(pmf.quantile(0.975)) + "\t" +
              fmt_num(pmf.mean()) + "\n";
  }
  write_atomic(out / "report.tsv", report);
  std::cout << report;
}

void cmd_estimate(const RunConfig& c, const fs::path& out) {
  const auto nA = c.has("n_a") ? static_cast<std::size_t>(c.i64("n_a")) : 0;
  const auto nB = c.has("n_b") ? static_cast<std::size_t>(c.i64("n_b")) : 0;
  const auto post = read_pair_probs(read_file(c.require("pair_probs")), nA, nB);
  const auto est = bayes_estimate(post);
  write_atomic(out / "matches.tsv", matches_tsv(est.G, &post));
  std::cout << "declared_matches\t" << est.G.T() << "\nconflicts_resolved\t"
            << (est.conflicts_resolved ? 1 : 0) << "\n";
}

void cmd_simulate(const RunConfig& c, const fs::path& out) {
  const auto sc = make_scenario(static_cast<int>(c.i64("scenario")), c.i64("n"), c.dbl("beta"),
                                c.i64("replicates"), c.u64("seed"));
  StudyConfig cfg;
  cfg.prior = prior_from(c);
  cfg.sampler.iterations = c.i64("iterations");
  cfg.sampler.burn_in = c.i64("burn_in");
  cfg.sampler.inner_sweeps = static_cast<int>(c.i64("inner_sweeps"));
  cfg.sampler.epsilon = c.dbl("epsilon");
  cfg.jaro.iterations = c.i64("jaro_iterations");
  cfg.jaro.burn_in = c.i64("jaro_burn_in");
  cfg.jaro.epsilon = c.dbl("epsilon");
  cfg.threads = static_cast<unsigned>(c.i64("threads"));
  cfg.methods.clear();
  for (const auto& m : c.list("methods")) {
    if (m == "hier") {
      cfg.methods.push_back(Method::hier);
    } else if (m == "jaro") {
      cfg.methods.push_back(Method::jaro);
    } else if (m == "hybrid") {
      cfg.methods.push_back(Method::hybrid);
    } else {
      throw ConfigError("unknown method '" + m + "' (hier, jaro, hybrid)");
    }
  }
  const auto rep = run_study(sc, cfg);

  std::string report =
      "method\tE_N\tE_N_se\tcoverage\tlength\tlength_se\tfmr1\tfmr1_se\tfmr2\tfmr2_se\n";
  for (const auto& s : rep.methods) {
    report += method_name(s.method) + "\t" + fmt_num(s.post_mean.mean) + "\t" + fmt_num(s.post_mean.se) +
              "\t" + fmt_num(s.coverage) + "\t" + fmt_num(s.length.mean) + "\t" + fmt_num(s.length.se) +
              "\t" + fmt_num(s.fmr1.mean) + "\t" + fmt_num(s.fmr1.se) + "\t" + fmt_num(s.fmr2.mean) +
              "\t" + fmt_num(s.fmr2.se) + "\n";
  }
  write_atomic(out / "report.tsv", report);
  std::string per = "replicate\tmethod\tT_true\tpost_mean\tlower\tupper\tcovered\tdeclared\tfmr1\tfmr2\n";
  for (const auto& r : rep.replicates) {
    per += std::to_string(r.replicate) + "\t" + method_name(r.method) + "\t" + std::to_string(r.T_true) +
           "\t" + fmt_num(r.post_mean) + "\t" + fmt_num(r.lower) + "\t" + fmt_num(r.upper) + "\t" +
           std::to_string(r.covered) + "\t" + std::to_string(r.declared) + "\t" + fmt_num(r.rates.fmr1) +
           "\t" + fmt_num(r.rates.fmr2) + "\n";
  }
  write_atomic(out / "summary.tsv", per);
  std::cout << report;
}

void fail(const std::string& kind, const std::string& message) {
  std::string m = message;
  for (char& ch : m) {
    if (ch == '\n' || ch == '\t') ch = ' ';
  }
  std::cerr << "error\tkind=" << kind << "\tmessage=" << m << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian record linkage and population size estimation"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::string> seed, out, delimiter, iterations, burn_in, inner_sweeps, prior_g,
        prior_form, draw_c;
  };
  std::map<std::string, Flags> flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"link", "hierarchical model: posterior of matches and population size"},
      {"baseline-fs", "mixture model with EM, likelihood ratios and one-to-one assignment"},
      {"baseline-jaro", "constrained mixture chain on comparison vectors"},
      {"popsize", "exact posterior of N for a grid of match counts"},
      {"estimate", "Bayes point estimate of the matching from pair probabilities"},
      {"simulate", "replicated simulation study"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    auto& f = flags[name];
    sub->add_option("--config", f.config, "key = value file");
    sub->add_option("--set", f.sets, "override: key=value (repeatable)");
    sub->add_option("--seed", f.seed, "RNG seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--delimiter", f.delimiter, "auto|tab|comma|semicolon|space|<char>");
    sub->add_option("--iterations", f.iterations, "MCMC iterations");
    sub->add_option("--burn-in", f.burn_in, "iterations discarded");
    sub->add_option("--inner-sweeps", f.inner_sweeps, "true-value sweeps per iteration");
    sub->add_option("--prior-g", f.prior_g, "g of the N prior");
    sub->add_option("--prior-form", f.prior_form, "gamma|inverse-square");
    sub->add_option("--draw-c", f.draw_c, "on|off");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    auto cfg = make_config(command);
    const auto& f = flags[command];
    if (!f.config.empty()) cfg.load_file(f.config);
    const std::pair<const char*, const std::optional<std::string>*> named[] = {
        {"seed", &f.seed},       {"out", &f.out},
        {"delimiter", &f.delimiter}, {"iterations", &f.iterations},
        {"burn_in", &f.burn_in}, {"inner_sweeps", &f.inner_sweeps},
        {"prior_g", &f.prior_g}, {"prior_form", &f.prior_form},
        {"draw_c", &f.draw_c}};
    for (const auto& [key, value] : named) {
      if (*value) cfg.set(key, **value, "command line");
    }
    for (const auto& kv : f.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(RunConfig::trim(kv.substr(0, eq)), RunConfig::trim(kv.substr(eq + 1)), "command line");
    }

    const fs::path out = cfg.require("out");
    fs::create_directories(out);
    std::cout << cfg.echo();
    std::cout.flush();
    write_atomic(out / "config.txt", cfg.echo());

    if (command == "link") cmd_link(cfg, out);
    else if (command == "baseline-fs") cmd_baseline_fs(cfg, out);
    else if (command == "baseline-jaro") cmd_baseline_jaro(cfg, out);
    else if (command == "popsize") cmd_popsize(cfg, out);
    else if (command == "estimate") cmd_estimate(cfg, out);
    else if (command == "simulate") cmd_simulate(cfg, out);
  } catch (const Error& e) {
    fail(e.kind(), e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    fail("io-error", e.what());
    return 1;
  } catch (const std::exception& e) {
    fail("internal", e.what());
    return 1;
  }
  return 0;
}
