#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dgw/error.hpp"
#include "dgw/offspring.hpp"

namespace dgw {

// Outcome of a criterion check. Series criteria use Converges/Diverges,
// the infimum criterion Positive/Zero, the regularity constant Finite/Infinite.
enum class Verdict { Converges, Diverges, Positive, Zero, Finite, Infinite, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Converges: return "converges";
    case Verdict::Diverges: return "diverges";
    case Verdict::Positive: return "positive";
    case Verdict::Zero: return "zero";
    case Verdict::Finite: return "finite";
    case Verdict::Infinite: return "infinite";
    case Verdict::Inconclusive: break;
  }
  return "inconclusive";
}

// Analytic classification of the criterion series, known for named families.
struct TailMeta {
  std::optional<Verdict> thm1_series;           // sum (1 - f_n[1])
  std::optional<Verdict> thm2_inf_mu;           // inf mu_n
  std::optional<Verdict> thm2_delta_mu_series;  // sum delta_n mu_{n-1}
  std::optional<Verdict> thm2_f2_series;        // sum f_n''(1) / (f_n'(1) mu_n)
  std::optional<Verdict> cond8;                 // sup_n c8(f_n)
  std::vector<std::string> tags;                // e.g. "series_1_minus_f1: divergent_harmonic"
};

// f_n = (1 - delta_n) * base with delta_n = a * n^-b * gamma^-n, capped below 1.
struct ScaledDefectParams {
  OffspringLaw base = OffspringLaw::identity();
  double a{1.0};
  double b{2.0};
  double gamma{1.0};
};

inline constexpr double kMaxScaledDefect = 0.999;

// (1 - delta) * base for a proper base law, with delta = exp(log_delta) kept exact.
inline OffspringLaw scale_law(const OffspringLaw& base, double log_delta) {
  const double factor = -std::expm1(log_delta);
  if (base.kind() == LawKind::LinearFractional) {
    const auto& lf = base.lf_params();
    return OffspringLaw::linear_fractional(lf.q * factor, lf.r * factor, lf.p).with_log_defect(log_delta);
  }
  std::vector<double> w(base.weights().begin(), base.weights().end());
  for (double& x : w) x *= factor;
  return OffspringLaw::finite(std::move(w)).with_log_defect(log_delta);
}

// The varying environment v = {f_n}, n >= 1.
class Environment {
 public:
  struct Constant {
    OffspringLaw law;
  };
  struct Prefix {
    std::vector<OffspringLaw> laws;
    OffspringLaw tail;
  };
  struct Periodic {
    std::vector<OffspringLaw> laws;
  };
  struct Named {
    std::string id;
    std::optional<ScaledDefectParams> scaled;
  };
  using Generator = std::variant<Constant, Prefix, Periodic, Named>;

  static Environment constant(OffspringLaw law) { return Environment{Constant{std::move(law)}}; }
  static Environment identity() { return constant(OffspringLaw::identity()); }

  static Environment prefix(std::vector<OffspringLaw> laws, OffspringLaw tail) {
    return Environment{Prefix{std::move(laws), std::move(tail)}};
  }

  static Environment periodic(std::vector<OffspringLaw> laws) {
    if (laws.empty()) throw std::invalid_argument("laws: periodic environment needs at least one law");
    return Environment{Periodic{std::move(laws)}};
  }

  // Named families: "example-1a", "example-1b", "example-2a", "example-2b",
  // and "scaled-defect" (requires params).
  static Environment named(const std::string& id, std::optional<ScaledDefectParams> params = std::nullopt) {
    static const char* known[] = {"example-1a", "example-1b", "example-2a", "example-2b", "scaled-defect"};
    if (std::find(std::begin(known), std::end(known), id) == std::end(known))
      throw std::invalid_argument("id: unknown named environment '" + id + "'");
    if (id == "scaled-defect") {
      if (!params) throw std::invalid_argument("params: scaled-defect requires parameters");
      if (std::abs(defect(params->base)) > 1e-12) throw std::invalid_argument("params/base: must be a proper law");
      if (!(params->a > 0.0) || !std::isfinite(params->b) || !(params->gamma >= 1.0))
        throw std::invalid_argument("params: need a > 0, finite b and gamma >= 1");
    } else {
      params.reset();
    }
    Environment env{Named{id, std::move(params)}};
    env.meta_ = named_meta(id);
    return env;
  }

  const Generator& generator() const { return gen_; }
  const TailMeta& tail_meta() const { return meta_; }

  // f_n for n >= 1.
  OffspringLaw law(std::size_t n) const {
    if (n == 0) throw std::invalid_argument("n: generations are numbered from 1");
    const std::size_t m = n + shift_;
    return std::visit([m](const auto& g) { return law_of(g, m); }, gen_);
  }

  // f_1..f_n; element i - 1 is f_i.
  std::vector<OffspringLaw> laws(std::size_t n) const {
    std::vector<OffspringLaw> out;
    out.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) out.push_back(law(i));
    return out;
  }

  // Shifted environment v_j = {f_{j+1}, f_{j+2}, ...}.
  Environment shifted(std::size_t j) const {
    if (j == 0) return *this;
    Environment out = *this;
    out.shift_ += j;
    out.meta_ = {};
    return out;
  }

  std::size_t shift() const { return shift_; }

  std::string describe() const {
    std::string base = std::visit(
        [](const auto& g) -> std::string {
          using T = std::decay_t<decltype(g)>;
          if constexpr (std::is_same_v<T, Constant>) return "constant";
          else if constexpr (std::is_same_v<T, Prefix>) return "prefix";
          else if constexpr (std::is_same_v<T, Periodic>) return "periodic";
          else return g.id;
        },
        gen_);
    return shift_ ? base + "+" + std::to_string(shift_) : base;
  }

 private:
  explicit Environment(Generator g) : gen_{std::move(g)} {}

  static OffspringLaw law_of(const Constant& c, std::size_t) { return c.law; }
  static OffspringLaw law_of(const Prefix& p, std::size_t n) { return n <= p.laws.size() ? p.laws[n - 1] : p.tail; }
  static OffspringLaw law_of(const Periodic& p, std::size_t n) { return p.laws[(n - 1) % p.laws.size()]; }

  static OffspringLaw law_of(const Named& named, std::size_t n) {
    static const OffspringLaw identity_law = OffspringLaw::identity();
    static const OffspringLaw binary_split = OffspringLaw::finite({0.0, 0.0, 1.0});
    const double log_n = std::log(static_cast<double>(n));
    const double log_half = std::log(0.5);
    const std::string& id = named.id;
    // f_1(s) = s/2 in both Example 1 families
    if (id == "example-1a") return scale_law(identity_law, n == 1 ? log_half : -log_n);
    if (id == "example-1b") return scale_law(identity_law, n == 1 ? log_half : -2.0 * log_n);
    if (id == "example-2a") return scale_law(binary_split, -log_n + static_cast<double>(n) * log_half);
    if (id == "example-2b") return scale_law(binary_split, -2.0 * log_n + static_cast<double>(n) * log_half);
    const auto& sp = *named.scaled;
    const double log_delta = std::log(sp.a) - sp.b * log_n - static_cast<double>(n) * std::log(sp.gamma);
    return scale_law(sp.base, std::min(std::log(kMaxScaledDefect), log_delta));
  }

  static TailMeta named_meta(const std::string& id) {
    TailMeta m;
    if (id == "example-1a") {
      m.thm1_series = Verdict::Diverges;
      m.thm2_inf_mu = Verdict::Zero;
      m.thm2_delta_mu_series = Verdict::Converges;
      m.thm2_f2_series = Verdict::Converges;
      m.cond8 = Verdict::Finite;
      m.tags = {"series_1_minus_f1: divergent_harmonic", "mu_n: 1/(2n)", "f2: identically zero"};
    } else if (id == "example-1b") {
      m.thm1_series = Verdict::Converges;
      m.thm2_inf_mu = Verdict::Positive;
      m.thm2_delta_mu_series = Verdict::Converges;
      m.thm2_f2_series = Verdict::Converges;
      m.cond8 = Verdict::Finite;
      m.tags = {"series_1_minus_f1: convergent_p_series(2)", "mu_n: (n+1)/(4n)", "f2: identically zero"};
    } else if (id == "example-2a") {
      m.thm1_series = Verdict::Diverges;
      m.thm2_inf_mu = Verdict::Positive;
      m.thm2_delta_mu_series = Verdict::Diverges;
      m.thm2_f2_series = Verdict::Converges;
      m.cond8 = Verdict::Finite;
      m.tags = {"series_1_minus_f1: f_n[1] = 0", "series_delta_mu: divergent_harmonic times convergent product",
                "series_f2: geometric(1/2)"};
    } else if (id == "example-2b") {
      m.thm1_series = Verdict::Diverges;
      m.thm2_inf_mu = Verdict::Positive;
      m.thm2_delta_mu_series = Verdict::Converges;
      m.thm2_f2_series = Verdict::Converges;
      m.cond8 = Verdict::Finite;
      m.tags = {"series_1_minus_f1: f_n[1] = 0", "series_delta_mu: convergent_p_series(2) times convergent product",
                "series_f2: geometric(1/2)"};
    }
    return m;
  }

  Generator gen_;
  TailMeta meta_{};
  std::size_t shift_{0};
};

// ---------------------------------------------------------------------------
// Composition f_{k,n} = f_{k+1} o ... o f_n, evaluated innermost-first.

// Values f_{i,n}(s) for i = k..n and the chain-rule derivatives of f_{k,n} at s.
struct CompositionSweep {
  std::size_t k{0};
  std::size_t n{0};
  std::vector<double> values;  // values[i - k] = f_{i,n}(s)
  double first{1.0};           // f_{k,n}'(s)
  double second{0.0};          // f_{k,n}''(s)

  double at(std::size_t i) const { return values.at(i - k); }
};

namespace detail {

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// A point x in [0, 1] carried together with its complement 1 - x. Near 1 the
// complement is the accurate coordinate: defects far below machine epsilon
// vanish from f(x) but still accumulate in 1 - f(x) = delta + f[1, x](1 - x).
// The complement is kept linearly while it is a normal number and in log
// scale below that.
inline constexpr double kTinyComplement = 1e-280;

struct Point {
  double x;
  double c;   // 1 - x, or 0 when below kTinyComplement
  double lc;  // log(1 - x) when c == 0

  double log_c() const { return c > 0.0 ? std::log(c) : lc; }
};

inline Point make_point(double s) {
  const double c = 1.0 - s;
  return c >= kTinyComplement ? Point{s, c, 0.0} : Point{s, 0.0, std::log1p(-s)};
}

inline Point point_from_log_complement(double x, double lc) {
  const double c = std::exp(lc);
  return c >= kTinyComplement ? Point{x, c, 0.0} : Point{x, 0.0, lc};
}

inline Point apply(const OffspringLaw& f, const Point& p) {
  const double x = f.value(p.x);
  if (x <= 0.5) return {x, 1.0 - x, 0.0};
  const double dd = f.divided_difference(1.0, p.x);
  const double d = f.defect();
  if (p.c > 0.0 && (d >= kTinyComplement || f.log_defect() == -std::numeric_limits<double>::infinity())) {
    const double c = d + p.c * dd;
    if (c >= kTinyComplement) return {1.0 - c, c, 0.0};
  }
  const double lc = log_sum_exp(f.log_defect(), p.log_c() + std::log(dd));
  return point_from_log_complement(-std::expm1(lc), lc);
}

// laws[i - 1] is f_i.
inline CompositionSweep sweep(std::span<const OffspringLaw> laws, std::size_t k, std::size_t n, double s) {
  if (k > n) throw std::invalid_argument("k: must not exceed n");
  if (n > laws.size()) throw std::invalid_argument("n: exceeds materialized environment");
  CompositionSweep out;
  out.k = k;
  out.n = n;
  out.values.assign(n - k + 1, 0.0);
  Point p = make_point(s);
  double d1 = 1.0, d2 = 0.0;
  out.values[n - k] = p.x;
  for (std::size_t i = n; i > k; --i) {
    const OffspringLaw& f = laws[i - 1];
    const double f1 = f.first_derivative(p.x);
    d2 = f.second_derivative(p.x) * d1 * d1 + f1 * d2;
    d1 = f1 * d1;
    p = apply(f, p);
    out.values[i - 1 - k] = p.x;
  }
  out.first = d1;
  out.second = d2;
  return out;
}

// log(f_{i,n}(hi) - f_{i,n}(lo)) for i = 0..n via divided differences (no cancellation).
inline std::vector<double> log_gaps(std::span<const OffspringLaw> laws, std::size_t n, double hi, double lo) {
  std::vector<double> out(n + 1);
  Point a = make_point(hi), b = make_point(lo);
  double lg = std::log(hi - lo);
  out[n] = lg;
  for (std::size_t i = n; i >= 1; --i) {
    const OffspringLaw& f = laws[i - 1];
    lg += std::log(f.divided_difference(a.x, b.x));
    a = apply(f, a);
    b = apply(f, b);
    out[i - 1] = lg;
  }
  return out;
}

// log(f_{0,n}(hi) - f_{0,n}(lo)) alone; the product is renormalized instead of logged per step.
inline double log_gap(std::span<const OffspringLaw> laws, std::size_t n, double hi, double lo) {
  Point a = make_point(hi), b = make_point(lo);
  double lg = std::log(hi - lo), prod = 1.0;
  for (std::size_t i = n; i >= 1; --i) {
    const OffspringLaw& f = laws[i - 1];
    prod *= f.divided_difference(a.x, b.x);
    if (prod < 1e-280 || prod > 1e280) {
      lg += std::log(prod);
      prod = 1.0;
    }
    a = apply(f, a);
    b = apply(f, b);
  }
  return lg + std::log(prod);
}

}  // namespace detail

inline CompositionSweep composition_sweep(const Environment& env, std::size_t k, std::size_t n, double s) {
  if (k > n) throw std::invalid_argument("k: must not exceed n");
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("s: must lie in [0, 1]");
  const auto laws = env.laws(n);
  return detail::sweep(laws, k, n, s);
}

// f_{k,n}(s) and its first two derivatives. f_{n,n}(s) = s.
inline double compose_eval(const Environment& env, std::size_t k, std::size_t n, double s, int order) {
  if (order < 0 || order > 2) throw std::invalid_argument("order: must be 0, 1 or 2");
  const auto sw = composition_sweep(env, k, n, s);
  return order == 0 ? sw.values.front() : order == 1 ? sw.first : sw.second;
}

// Value with its natural logarithm carried alongside; the linear value becomes
// 0 or +inf outside double range while the log stays exact.
struct LogScalar {
  double value{1.0};
  double log{0.0};

  static LogScalar from_log(double lg) { return {std::exp(lg), lg}; }
};

struct MuProfile {
  std::size_t n{0};
  double s{1.0};
  LogScalar mu_n;                  // prod_{i<=n} f_i'(1)
  LogScalar mu_n_at_s;             // prod_{i<=n} f_i'(s)
  LogScalar nu_n_at_s;             // sum_{i<=n} 1 / mu_i(s)
  std::vector<LogScalar> ladder;   // mu_{j,n} = prod_{i<=j} f_i'(f_{i,n}(1)), j = 0..n
  std::vector<LogScalar> mu_prefix;  // mu_j for j = 0..n
};

namespace detail {

inline MuProfile mu_profile(std::span<const OffspringLaw> laws, std::size_t n, double s) {
  MuProfile out;
  out.n = n;
  out.s = s;
  const auto sw = sweep(laws, 0, n, 1.0);
  double log_mu = 0.0, log_mu_s = 0.0, log_ladder = 0.0;
  double log_nu = -std::numeric_limits<double>::infinity();
  out.ladder.reserve(n + 1);
  out.mu_prefix.reserve(n + 1);
  out.ladder.push_back({1.0, 0.0});
  out.mu_prefix.push_back({1.0, 0.0});
  for (std::size_t i = 1; i <= n; ++i) {
    const OffspringLaw& f = laws[i - 1];
    log_mu += std::log(f.first_derivative(1.0));
    log_mu_s += std::log(f.first_derivative(s));
    log_nu = log_sum_exp(log_nu, -log_mu_s);
    log_ladder += std::log(f.first_derivative(sw.at(i)));
    out.ladder.push_back(LogScalar::from_log(log_ladder));
    out.mu_prefix.push_back(LogScalar::from_log(log_mu));
  }
  out.mu_n = LogScalar::from_log(log_mu);
  out.mu_n_at_s = LogScalar::from_log(log_mu_s);
  out.nu_n_at_s = n == 0 ? LogScalar{0.0, -std::numeric_limits<double>::infinity()} : LogScalar::from_log(log_nu);
  return out;
}

}  // namespace detail

// mu_n, mu_n(s), nu_n(s) and the ladder mu_{j,n}, all with log-scale shadows.
inline MuProfile mu_profile(const Environment& env, std::size_t n, double s) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("s: must lie in (0, 1]");
  const auto laws = env.laws(n);
  return detail::mu_profile(laws, n, s);
}

// ---------------------------------------------------------------------------
// Exact truncated distribution of Z_n by coefficient composition.

struct DistVector {
  std::size_t horizon{0};
  std::size_t truncation{0};
  std::vector<double> probs;  // P[Z_n = k], k = 0..truncation
  double delta_mass{0.0};     // P[Z_n = graveyard]
  double tail_mass{0.0};      // P[truncation < Z_n < infinity]
};

inline constexpr double kDefaultCoefficientBudget = 2e8;

namespace detail {

// c = a * b truncated to `cap` coefficients, using only the populated lengths.
inline std::size_t convolve_truncated(const std::vector<double>& a, std::size_t la, const std::vector<double>& b,
                                      std::size_t lb, std::vector<double>& c, std::size_t cap) {
  const std::size_t lc = std::min(cap, la + lb - 1);
  std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(lc), 0.0);
  for (std::size_t i = 0; i < la && i < lc; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    const std::size_t jmax = std::min(lb, lc - i);
    for (std::size_t j = 0; j < jmax; ++j) c[i + j] += ai * b[j];
  }
  return lc;
}

// Coefficients of f o G up to degree cap - 1, given G's populated length lg.
inline std::size_t compose_series(const OffspringLaw& f, const std::vector<double>& g, std::size_t lg,
                                  std::vector<double>& out, std::size_t cap) {
  if (f.kind() == LawKind::LinearFractional) {
    // f o G = q + r / (1 - p G); invert the series 1 - p G term by term.
    const auto& lf = f.lf_params();
    const double head = 1.0 - lf.p * g[0];
    const std::size_t len = lg > 1 ? cap : 1;
    std::vector<double> h(len, 0.0);
    h[0] = 1.0 / head;
    for (std::size_t m = 1; m < len; ++m) {
      double acc = 0.0;
      const std::size_t jmax = std::min(m, lg - 1);
      for (std::size_t j = 1; j <= jmax; ++j) acc += g[j] * h[m - j];
      h[m] = lf.p * acc / head;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t m = 0; m < len; ++m) out[m] = lf.r * h[m];
    out[0] += lf.q;
    return len;
  }
  // Horner: R = w_K; R = R * G + w_k.
  const auto w = f.weights();
  std::vector<double> acc(cap, 0.0), tmp(cap, 0.0);
  acc[0] = w.back();
  std::size_t la = 1;
  for (std::size_t k = w.size() - 1; k-- > 0;) {
    la = convolve_truncated(acc, la, g, lg, tmp, cap);
    std::swap(acc, tmp);
    acc[0] += w[k];
  }
  std::fill(out.begin(), out.end(), 0.0);
  std::copy(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(la), out.begin());
  return la;
}

inline DistVector compose_coeffs(std::span<const OffspringLaw> laws, std::size_t n, std::size_t truncation,
                                 double budget) {
  if (truncation < 1) throw std::invalid_argument("D: truncation must be >= 1");
  if (static_cast<double>(truncation + 1) * static_cast<double>(n) > budget)
    throw budget_error("compose_coeffs: (D+1)*n exceeds the configured work budget");
  const std::size_t cap = truncation + 1;
  std::vector<double> g(cap, 0.0), next(cap, 0.0);
  g[1] = 1.0;
  std::size_t lg = 2;
  for (std::size_t i = n; i >= 1; --i) {
    lg = compose_series(laws[i - 1], g, lg, next, cap);
    std::swap(g, next);
  }
  DistVector out;
  out.horizon = n;
  out.truncation = truncation;
  out.probs = std::move(g);
  const double total = n == 0 ? 1.0 : sweep(laws, 0, n, 1.0).values.front();
  out.delta_mass = std::max(0.0, 1.0 - total);
  const double listed = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  out.tail_mass = std::max(0.0, total - listed);
  return out;
}

}  // namespace detail

// Power-series coefficients of f_{0,n} up to degree D, with the graveyard mass
// and the mass above D accounted for separately.
inline DistVector compose_coeffs(const Environment& env, std::size_t n, std::size_t truncation,
                                 double budget = kDefaultCoefficientBudget) {
  const auto laws = env.laws(n);
  return detail::compose_coeffs(laws, n, truncation, budget);
}

}  // namespace dgw
