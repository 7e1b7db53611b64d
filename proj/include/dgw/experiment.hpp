#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgw/analysis.hpp"
#include "dgw/environment.hpp"
#include "dgw/error.hpp"
#include "dgw/io.hpp"
#include "dgw/parallel.hpp"
#include "dgw/simulate.hpp"
#include "dgw/trees.hpp"
#include "dgw/version.hpp"

namespace dgw {

// Exit statuses of the batch runner.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitPrecondition = 3, kExitBudget = 4 };

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"pgf",      "dist",  "moments", "absorption",  "bounds",
                                              "check",    "rates", "simulate", "agree",      "tree-sample",
                                              "tree-validate", "cond-mean"};
  return names;
}

struct ExperimentConfig {
  std::string command;
  json environment;
  json params = json::object();
  std::uint64_t seed{0};
  std::optional<std::string> output_path;
  json raw;
};

struct Diagnostic {
  std::string pointer;
  std::string message;
  bool warning{false};
};

struct Artifact {
  std::string suffix;  // appended to the output stem: ".csv", ".json", ".trajectories.csv", ...
  std::string content;
};

// ---------------------------------------------------------------------------
// Formatting

namespace detail {

// Shortest representation that reads back to the same double.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string fmt(std::size_t x) { return std::to_string(x); }
inline std::string fmt(bool x) { return x ? "true" : "false"; }

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_{header.size()} { row_strings(header); }

  template <class... Ts>
  void row(const Ts&... xs) {
    std::vector<std::string> cells{cell(xs)...};
    row_strings(cells);
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class T>
  static std::string cell(const std::optional<T>& x) {
    return x ? cell(*x) : std::string{};
  }
  template <class T>
  static std::string cell(const T& x) {
    return fmt(x);
  }

  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::size_t width_;
  std::ostringstream out_;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << x;
  return os.str();
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// ---------------------------------------------------------------------------
// Parameter access with JSON-pointer diagnostics

class Params {
 public:
  Params(const json& j, std::string ptr) : j_{j}, ptr_{std::move(ptr)} {}

  std::size_t size(const char* key, std::optional<std::size_t> def = std::nullopt, std::size_t min = 0) const {
    if (!j_.contains(key)) return required(key, def);
    return to_size(j_.at(key), at(key), min);
  }

  std::vector<std::size_t> sizes(const char* key, std::size_t min = 0) const {
    if (!j_.contains(key)) throw config_error(at(key), "is required");
    const auto& v = j_.at(key);
    if (!v.is_array()) return {to_size(v, at(key), min)};
    if (v.empty()) throw config_error(at(key), "must be nonempty");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_size(v[i], at(key) + "/" + std::to_string(i), min));
    return out;
  }

  double number(const char* key, std::optional<double> def = std::nullopt) const {
    if (!j_.contains(key)) return required(key, def);
    return number_at(j_.at(key), at(key));
  }

  std::optional<double> maybe_number(const char* key) const {
    if (!j_.contains(key)) return std::nullopt;
    return number_at(j_.at(key), at(key));
  }

  std::vector<double> numbers(const char* key) const {
    if (!j_.contains(key)) throw config_error(at(key), "is required");
    const auto& v = j_.at(key);
    if (!v.is_array()) return {number_at(v, at(key))};
    if (v.empty()) throw config_error(at(key), "must be nonempty");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number_at(v[i], at(key) + "/" + std::to_string(i)));
    return out;
  }

  bool flag(const char* key, bool def) const {
    if (!j_.contains(key)) return def;
    if (!j_.at(key).is_boolean()) throw config_error(at(key), "must be a boolean");
    return j_.at(key).get<bool>();
  }

  std::string text(const char* key, const std::string& def, std::initializer_list<const char*> allowed) const {
    if (!j_.contains(key)) return def;
    const std::string s = string_at(j_.at(key), at(key));
    for (const char* a : allowed)
      if (s == a) return s;
    throw config_error(at(key), "unsupported value '" + s + "'");
  }

  std::string at(const char* key) const { return ptr_ + "/" + key; }

 private:
  template <class T>
  T required(const char* key, const std::optional<T>& def) const {
    if (!def) throw config_error(at(key), "is required");
    return *def;
  }

  static std::size_t to_size(const json& v, const std::string& ptr, std::size_t min) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw config_error(ptr, "must be a nonnegative integer");
    const auto x = v.get<std::size_t>();
    if (x < min) throw config_error(ptr, "must be >= " + std::to_string(min));
    return x;
  }

  const json& j_;
  std::string ptr_;
};

inline const std::map<std::string, std::vector<const char*>>& allowed_params() {
  static const std::map<std::string, std::vector<const char*>> m{
      {"pgf", {"k", "n", "s", "order"}},
      {"dist", {"n", "D", "budget"}},
      {"moments", {"n"}},
      {"absorption", {"n"}},
      {"bounds", {"n"}},
      {"check", {"horizons"}},
      {"rates", {"n", "eps", "n0", "N", "rho", "sigma"}},
      {"simulate", {"horizon", "reps", "mode", "population_cap", "trajectories"}},
      {"agree", {"horizon", "reps", "population_cap"}},
      {"tree-sample", {"n", "samples", "conditioned", "extra_depth"}},
      {"tree-validate", {"n", "samples", "max_k"}},
      {"cond-mean", {"n", "D"}},
  };
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config parsing

// Schema-level parse; throws config_error at the first violation.
inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw config_error("", "config must be a JSON object");
  detail::only_keys(j, "", {"command", "environment", "params", "seed", "output"});
  ExperimentConfig c;
  c.raw = j;
  c.command = detail::string_at(detail::require(j, "", "command"), "/command");
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), c.command) == names.end())
    throw config_error("/command", "unknown command '" + c.command + "'");
  c.environment = detail::require(j, "", "environment");
  if (j.contains("params")) {
    c.params = j.at("params");
    if (!c.params.is_object()) throw config_error("/params", "must be an object");
    const auto& allowed = detail::allowed_params().at(c.command);
    for (const auto& [k, v] : c.params.items())
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end())
        throw config_error("/params/" + k, "unknown parameter for command '" + c.command + "'");
  }
  const auto& seed = detail::require(j, "", "seed");
  if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) throw config_error("/seed", "must be a nonnegative integer (no wall-clock default)");
  c.seed = seed.get<std::uint64_t>();
  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (!o.is_object()) throw config_error("/output", "must be an object");
    detail::only_keys(o, "/output", {"path"});
    if (o.contains("path")) c.output_path = detail::string_at(o.at("path"), "/output/path");
  }
  return c;
}

struct RunOptions {
  unsigned threads{1};
};

// ---------------------------------------------------------------------------
// Command execution

namespace detail {

inline json verdict_json(const ConditionVerdict& v) {
  json j{{"module", "analysis"},
         {"operation", "theorem_checks"},
         {"criterion", v.id},
         {"horizons", v.horizons},
         {"partial_sums", v.partial_sums},
         {"verdict", to_string(v.verdict)},
         {"numeric_verdict", to_string(v.numeric_verdict)},
         {"analytic", v.analytic}};
  j["growth_diagnostic"] = std::isfinite(v.growth_diagnostic) ? json(v.growth_diagnostic) : json(fmt(v.growth_diagnostic));
  return j;
}

inline json estimate_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

inline std::vector<Artifact> run_command(const ExperimentConfig& c, const Environment& env, const RunOptions& ro) {
  const Params p(c.params, "/params");
  const std::string& cmd = c.command;
  if (cmd == "pgf") {
    const auto k = p.size("k", 0);
    const auto n = p.size("n");
    if (k > n) throw config_error("/params/k", "must not exceed n");
    const auto order = p.size("order", 0);
    if (order > 2) throw config_error("/params/order", "must be 0, 1 or 2");
    CsvWriter w({"module", "operation", "k", "n", "s", "order", "value"});
    for (double s : p.numbers("s")) {
      if (!(s >= 0.0 && s <= 1.0)) throw config_error("/params/s", "values must lie in [0, 1]");
      w.row("environment", "compose_eval", k, n, s, static_cast<std::size_t>(order),
            compose_eval(env, k, n, s, static_cast<int>(order)));
    }
    return {{".csv", w.str()}};
  }
  if (cmd == "dist") {
    const auto d = compose_coeffs(env, p.size("n"), p.size("D", std::nullopt, 1), p.number("budget", kDefaultCoefficientBudget));
    json j{{"module", "environment"}, {"operation", "compose_coeffs"}, {"n", d.horizon},     {"D", d.truncation},
           {"probs", d.probs},        {"delta_mass", d.delta_mass},   {"tail_mass", d.tail_mass}};
    return {{".json", j.dump(2) + "\n"}};
  }
  if (cmd == "moments") {
    CsvWriter w({"module", "operation", "n", "mean", "second_moment_ratio", "second_moment"});
    for (auto n : p.sizes("n", 1)) {
      const auto m = moments(env, n);
      w.row("analysis", "moments", n, m.mean, m.second_moment_ratio, m.second_moment);
    }
    return {{".csv", w.str()}};
  }
  if (cmd == "absorption") {
    CsvWriter w({"module", "operation", "n", "p_ext", "p_delta", "p_abs", "survival", "log_survival"});
    for (auto n : p.sizes("n")) {
      const auto a = absorption_profile(env, n);
      w.row("analysis", "absorption_profile", n, a.p_ext, a.p_delta, a.p_abs, a.survival, a.log_survival);
    }
    return {{".csv", w.str()}};
  }
  if (cmd == "bounds") {
    CsvWriter w({"module", "operation", "n", "survival", "inf_mu_bound", "moment_lb", "eq17_lhs", "inverse_survival",
                 "eq17_rhs", "c_used", "c_prime", "c_prime_empirical", "holds"});
    for (auto n : p.sizes("n", 1)) {
      const auto b = prop2_bounds(env, n);
      w.row("analysis", "prop2_bounds", n, b.survival, b.inf_mu_bound, b.moment_lb, b.eq17_lhs, b.inverse_survival,
            b.eq17_rhs, b.c_used, b.c_prime, b.c_prime_empirical, b.holds);
    }
    return {{".csv", w.str()}};
  }
  if (cmd == "check") {
    std::vector<std::size_t> horizons{100, 1000, 10000, 100000};
    if (c.params.contains("horizons")) horizons = p.sizes("horizons", 1);
    json out = json::array();
    for (const auto& v : theorem_checks(env, horizons)) out.push_back(verdict_json(v));
    return {{".json", out.dump(2) + "\n"}};
  }
  if (cmd == "rates") {
    const auto ns = p.sizes("n", 1);
    const double eps = p.number("eps", 0.05);
    const auto n0 = p.size("n0", 1, 1);
    const auto N = p.size("N", *std::max_element(ns.begin(), ns.end()), 1);
    std::optional<double> rho = p.maybe_number("rho"), sigma = p.maybe_number("sigma");
    std::string status = "given";
    if (!rho || !sigma) {
      const auto rs = rho_sigma(env, n0, N);
      if (!rho) rho = rs.rho;
      if (!sigma) sigma = rs.sigma;
      status = rs.status;
    }
    CsvWriter w({"module", "operation", "n", "rate_mean", "rate_survival", "rho", "sigma", "eps", "bracket_status",
                 "ratio_mean_rho", "tail_product_rho", "ratio_mean_sigma_eps", "tail_product_sigma_eps", "ext_tail",
                 "ext_upper", "ext_upper_holds", "delta_tail", "delta_lower", "delta_lower_holds"});
    for (auto n : ns) {
      const auto g = growth_rate(env, n);
      std::optional<Theorem3Rates> t3;
      std::optional<ExtinctionTail> et;
      if (rho && sigma && *sigma + eps < 1.0) t3 = theorem3_rates(env, *rho, *sigma, eps, n);
      if (sigma) et = extinction_tail(env, *sigma, n);
      auto opt = [](bool have, double x) { return have ? std::optional<double>(x) : std::nullopt; };
      auto optb = [](bool have, bool x) { return have ? std::optional<std::string>(fmt(x)) : std::nullopt; };
      w.row("analysis", "growth_rate+theorem3_rates+extinction_tail", n, g.rate_mean, g.rate_survival, rho, sigma, eps,
            status, opt(t3.has_value(), t3 ? t3->ratio_mean_rho : 0.0), opt(t3.has_value(), t3 ? t3->tail_product_rho : 0.0),
            opt(t3.has_value(), t3 ? t3->ratio_mean_sigma_eps : 0.0),
            opt(t3.has_value(), t3 ? t3->tail_product_sigma_eps : 0.0), opt(et.has_value(), et ? et->ext_tail : 0.0),
            opt(et.has_value(), et ? et->upper : 0.0), optb(et.has_value(), et && et->upper_holds),
            opt(et.has_value(), et ? et->delta_tail : 0.0), opt(et.has_value(), et ? et->lower : 0.0),
            optb(et.has_value(), et && et->lower_holds));
    }
    return {{".csv", w.str()}};
  }
  if (cmd == "simulate" || cmd == "agree") {
    SimOptions so;
    so.threads = ro.threads;
    so.population_cap = p.size("population_cap", kDefaultPopulationCap, 1);
    const auto horizon = p.size("horizon");
    const auto reps = p.size("reps", std::nullopt, 1);
    if (cmd == "agree") {
      if (reps < 10'000) throw config_error("/params/reps", "must be >= 10000 for mode agreement");
      const auto a = mode_agreement(env, horizon, reps, c.seed, so);
      json j{{"module", "simulate"},     {"operation", "mode_agreement"}, {"horizon", horizon},
             {"reps", reps},             {"bins", json::array({"0", "D", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10+"})},
             {"direct_counts", a.direct_counts}, {"coupled_counts", a.coupled_counts}, {"bins_used", a.bins_used},
             {"tv_distance", a.tv_distance}, {"chi2_stat", a.chi2_stat}, {"chi2_df", a.chi2_df},
             {"threshold", a.threshold}, {"degenerate", a.degenerate}, {"pass", a.pass}};
      return {{".json", j.dump(2) + "\n"}};
    }
    const Mode mode = p.text("mode", "direct", {"direct", "coupled"}) == "direct" ? Mode::Direct : Mode::Coupled;
    so.keep_trajectory = p.flag("trajectories", false);
    const auto paths = simulate_paths(env, horizon, reps, mode, RandomStream(c.seed), so);
    const auto s = summarize(paths, horizon, mode, c.seed);
    json hist = json::array();
    for (const auto& [k, v] : s.histogram) hist.push_back({k, v});
    json j{{"module", "simulate"},
           {"operation", "monte_carlo"},
           {"mode", to_string(mode)},
           {"seed", c.seed},
           {"reps", s.reps},
           {"horizon", s.horizon},
           {"counts", {{"extinct", s.extinct}, {"absorbed_delta", s.absorbed_delta}, {"alive", s.alive}, {"overflow", s.overflow}}},
           {"survival", estimate_json(s.survival)},
           {"p_ext", estimate_json(s.p_ext)},
           {"p_delta", estimate_json(s.p_delta)},
           {"mean_alive", estimate_json(s.mean_alive)},
           {"histogram", hist},
           {"w", {{"count", s.w_count}, {"mean", s.w_mean}, {"variance", s.w_variance}, {"se", s.w_se}}}};
    std::vector<Artifact> out{{".json", j.dump(2) + "\n"}};
    if (so.keep_trajectory) {
      std::ostringstream os;
      write_trajectories_csv(os, paths);
      out.push_back({".trajectories.csv", os.str()});
    }
    return out;
  }
  if (cmd == "tree-sample") {
    const auto n = p.size("n");
    const auto samples = p.size("samples", 1, 1);
    const bool conditioned = p.flag("conditioned", true);
    ConditionedOptions co;
    co.extra_depth = p.size("extra_depth", 0);
    std::vector<std::string> records(samples);
    const RandomStream root(c.seed);
    std::optional<ConditionedSampler> sampler;
    if (conditioned) sampler.emplace(env, n, co);
    const auto laws = env.laws(n + co.extra_depth);
    parallel_for(samples, ro.threads, [&](std::size_t i) {
      RandomStream rng = root.fork(i);
      std::ostringstream os;
      os << "# sample " << i;
      DefectiveTree t;
      if (conditioned) {
        const auto ct = sampler->sample(rng);
        os << " spine";
        for (const auto& [d, cc] : ct.spine.dc) os << ' ' << d << '/' << cc;
        t = ct.tree;
      } else {
        t = detail::sample_tree(laws, n + co.extra_depth, rng);
      }
      if (auto err = validate(t)) throw std::logic_error("sampled tree invalid: " + *err);
      os << '\n' << serialize(t) << '\n';
      records[i] = os.str();
    });
    std::string text;
    for (const auto& r : records) text += r;
    return {{".txt", text}};
  }
  if (cmd == "tree-validate") {
    Prop4Options po;
    po.threads = ro.threads;
    po.max_k = p.size("max_k", 8);
    const auto n = p.size("n", std::nullopt, 1);
    const auto samples = p.size("samples", std::nullopt, 1);
    const auto r = validate_prop4(env, n, samples, c.seed, po);
    json j{{"module", "trees"},          {"operation", "validate_prop4"},
           {"n", n},                     {"samples", r.samples},
           {"atoms", r.atoms},           {"tv_sampler_vs_rejection", r.tv_sampler_vs_rejection},
           {"threshold", r.threshold},   {"invalid_trees", r.invalid_trees},
           {"pass", r.pass}};
    j["tv_vs_exact"] = r.tv_vs_exact ? json(*r.tv_vs_exact) : json(nullptr);
    return {{".json", j.dump(2) + "\n"}};
  }
  // cond-mean
  CsvWriter w({"module", "operation", "n", "exact", "exact_moment", "truncation", "alpha", "beta", "c", "thm4_bound",
               "holds"});
  const auto D = p.size("D", 32, 1);
  for (auto n : p.sizes("n", 1)) {
    const auto m = conditional_mean(env, n, D);
    w.row("analysis", "conditional_mean", n, m.exact, m.exact_moment, m.truncation, m.alpha, m.beta, m.c, m.thm4_bound,
          m.holds);
  }
  return {{".csv", w.str()}};
}

}  // namespace detail

// Executes a parsed configuration and returns its artifacts in memory.
inline std::vector<Artifact> run_experiment(const ExperimentConfig& c, const RunOptions& ro = {}) {
  const Environment env = environment_from_json(c.environment, "/environment");
  try {
    return detail::run_command(c, env, ro);
  } catch (const config_error&) {
    throw;
  } catch (const std::invalid_argument& e) {
    detail::rethrow_at("/params", e);
  }
}

// Schema and semantic validation plus pre-flight warnings, without running.
inline std::vector<Diagnostic> validate_config(const json& j) {
  std::vector<Diagnostic> out;
  ExperimentConfig c;
  try {
    c = parse_config(j);
  } catch (const config_error& e) {
    out.push_back({e.pointer(), e.message(), false});
    return out;
  }
  std::optional<Environment> env;
  try {
    env = environment_from_json(c.environment, "/environment");
  } catch (const config_error& e) {
    out.push_back({e.pointer(), e.message(), false});
    return out;
  }
  if (c.command == "tree-sample" || c.command == "tree-validate") {
    try {
      const auto n = detail::Params(c.params, "/params").size("n");
      const auto a = absorption_profile(*env, n);
      if (!(a.survival > 1e-6)) {
        std::ostringstream os;
        os << "P[tau_a > n] = " << detail::fmt(a.survival) << " at n = " << n
           << "; conditioned sampling and rejection will be impractical";
        out.push_back({"/params/n", os.str(), true});
      }
    } catch (const config_error& e) {
      out.push_back({e.pointer(), e.message(), false});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifact output

inline std::filesystem::path resolve_output(const ExperimentConfig& c, const std::string& ext) {
  std::filesystem::path p = c.output_path ? std::filesystem::path(*c.output_path) : std::filesystem::path(c.command + ext);
  if (p.is_relative()) {
    if (const char* dir = std::getenv("DGW_OUTPUT_DIR"); dir && *dir) p = std::filesystem::path(dir) / p;
  }
  return p;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
    os << content;
    if (!os.flush()) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline json manifest(const ExperimentConfig& c, const std::vector<std::string>& artifacts) {
  return {{"artifacts", artifacts},
          {"command", c.command},
          {"config_hash", "fnv1a64:" + detail::hex64(detail::fnv1a(c.raw.dump()))},
          {"seed", c.seed},
          {"versions", {{"dgw", kVersion}, {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
          {"timestamp", detail::utc_timestamp()}};
}

// Writes every artifact atomically next to a manifest; returns the paths.
inline std::vector<std::string> write_artifacts(const ExperimentConfig& c, const std::vector<Artifact>& artifacts) {
  if (artifacts.empty()) return {};
  const auto primary = resolve_output(c, artifacts.front().suffix);
  std::filesystem::path stem = primary;
  if (!c.output_path || primary.extension() == artifacts.front().suffix) stem.replace_extension();
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    const auto path = i == 0 ? primary : std::filesystem::path(stem.string() + artifacts[i].suffix);
    write_atomic(path, artifacts[i].content);
    paths.push_back(path.string());
  }
  write_atomic(stem.string() + ".manifest.json", manifest(c, paths).dump(2) + "\n");
  return paths;
}

}  // namespace dgw
