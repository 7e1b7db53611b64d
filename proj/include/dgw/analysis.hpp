#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgw/environment.hpp"
#include "dgw/error.hpp"
#include "dgw/offspring.hpp"

namespace dgw {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {

// log(1 - f_{i,n}(s)) for i = 0..n, using 1 - f(x) = delta + f[1, x](1 - x).
inline std::vector<double> log_one_minus(std::span<const OffspringLaw> laws, std::size_t n, double s) {
  std::vector<double> out(n + 1);
  Point p = make_point(s);
  out[n] = p.log_c();
  for (std::size_t i = n; i >= 1; --i) {
    p = apply(laws[i - 1], p);
    out[i - 1] = p.log_c();
  }
  return out;
}

// log(f_{0,n}(hi) - f_{0,n}(lo)) given log(hi - lo) exactly.
inline double log_gap_chain(std::span<const OffspringLaw> laws, std::size_t n, Point a, Point b, double log_gap) {
  for (std::size_t i = n; i >= 1; --i) {
    const OffspringLaw& f = laws[i - 1];
    log_gap += std::log(f.divided_difference(a.x, b.x));
    a = apply(f, a);
    b = apply(f, b);
  }
  return log_gap;
}

inline double log_or_neg_inf(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Moments

struct Moments {
  std::size_t n{0};
  double mean{1.0};                 // E[Z_n]
  double second_moment_ratio{1.0};  // E[Z_n^2] / E[Z_n]^2
  double second_moment{1.0};        // E[Z_n^2]
  double log_mean{0.0};
  double log_ratio{0.0};
};

namespace detail {

// Sum over j of f_j''(x_j) / (f_j'(x_j) mu_{j,n}) with x_j = f_{j,n}(1), in log scale.
inline double log_curvature_sum(std::span<const OffspringLaw> laws, std::size_t n, const CompositionSweep& sw,
                                const MuProfile& mp) {
  double acc = kNegInf;
  for (std::size_t j = 1; j <= n; ++j) {
    const OffspringLaw& f = laws[j - 1];
    const double x = sw.at(j);
    const double f2 = f.second_derivative(x);
    if (f2 <= 0.0) continue;
    acc = log_sum_exp(acc, std::log(f2) - std::log(f.first_derivative(x)) - mp.ladder[j].log);
  }
  return acc;
}

inline Moments moments(std::span<const OffspringLaw> laws, std::size_t n) {
  const auto sw = sweep(laws, 0, n, 1.0);
  const auto mp = mu_profile(laws, n, 1.0);
  Moments m;
  m.n = n;
  m.log_mean = mp.ladder[n].log;
  m.log_ratio = log_sum_exp(-m.log_mean, log_curvature_sum(laws, n, sw, mp));
  m.mean = std::exp(m.log_mean);
  m.second_moment_ratio = std::exp(m.log_ratio);
  m.second_moment = std::exp(m.log_ratio + 2.0 * m.log_mean);
  return m;
}

}  // namespace detail

// E[Z_n] and E[Z_n^2] from the composition intermediates; expectations exclude
// the graveyard.
inline Moments moments(const Environment& env, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  const auto laws = env.laws(n);
  return detail::moments(laws, n);
}

// ---------------------------------------------------------------------------
// Absorption times

struct AbsorptionProfile {
  std::size_t n{0};
  double p_ext{0.0};     // P[tau_0 <= n]
  double p_delta{0.0};   // P[tau_Delta <= n]
  double p_abs{0.0};     // P[tau_a <= n]
  double survival{1.0};  // P[tau_a > n]
  double log_survival{0.0};
};

namespace detail {

inline AbsorptionProfile absorption_profile(std::span<const OffspringLaw> laws, std::size_t n) {
  AbsorptionProfile a;
  a.n = n;
  a.p_ext = sweep(laws, 0, n, 0.0).values.front();
  a.p_delta = n == 0 ? 0.0 : std::exp(log_one_minus(laws, n, 1.0).front());
  a.p_abs = a.p_ext + a.p_delta;
  a.log_survival = log_gap(laws, n, 1.0, 0.0);
  a.survival = std::exp(a.log_survival);
  return a;
}

}  // namespace detail

// Extinction, graveyard and total absorption probabilities by time n. The
// survival probability is propagated as a gap f_{i,n}(1) - f_{i,n}(0), so it
// keeps full relative accuracy far below 1e-16.
inline AbsorptionProfile absorption_profile(const Environment& env, std::size_t n) {
  const auto laws = env.laws(n);
  return detail::absorption_profile(laws, n);
}

// log P[tau_a > n] for n = 0..N.
inline std::vector<double> log_survival_sequence(const Environment& env, std::size_t N) {
  const auto laws = env.laws(N);
  std::vector<double> out(N + 1);
  for (std::size_t n = 0; n <= N; ++n) out[n] = detail::log_gap(laws, n, 1.0, 0.0);
  return out;
}

// E[W~_n] for W~_n = Z~_n prod_{i<=n} f_i(1)/f_i'(1), where Z~ runs on the
// normalized laws g_i = f_i / f_i(1). Equals 1 for every n.
inline double normalized_martingale_mean(const Environment& env, std::size_t n) {
  std::vector<OffspringLaw> g;
  g.reserve(n);
  double log_scale = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const OffspringLaw f = env.law(i);
    g.push_back(normalize(f));
    log_scale += std::log(f.total_mass()) - std::log(f.first_derivative(1.0));
  }
  const double log_mean = std::log(detail::sweep(g, 0, n, 1.0).first);
  return std::exp(log_mean + log_scale);
}

// ---------------------------------------------------------------------------
// Survival bounds: inf_i mu_i above, the moment ratio below, and the two-sided
// bracket on 1 / P[tau_a > n] obtained by iterating the difference quotient.

struct Prop2Bounds {
  std::size_t n{0};
  double survival{1.0};
  double inf_mu_bound{1.0};  // inf_{i<=n} mu_i
  double moment_lb{1.0};     // E[Z_n]^2 / E[Z_n^2]
  double eq17_lhs{1.0};      // 1/E[Z_n] + (1/(2c)) sum_j T_j
  double eq17_rhs{1.0};      // 1/E[Z_n] + sum_j T_j
  double inverse_survival{1.0};
  double c_used{0.0};          // max_j c12(f_j)
  double c_prime{1.0};         // max(1, 2 c_used)
  double c_prime_empirical{1.0};  // survival * E[Z_n^2] / E[Z_n]^2
  bool holds{true};
  // log-scale shadows
  double log_survival{0.0};
  double log_inf_mu{0.0};
  double log_eq17_lhs{0.0};
  double log_eq17_rhs{0.0};
};

inline constexpr double kBoundRelTol = 1e-12;

namespace detail {

inline bool log_le(double a, double b, double rel_tol = kBoundRelTol) { return a <= b + rel_tol; }

inline Prop2Bounds prop2_bounds(std::span<const OffspringLaw> laws, std::size_t n) {
  Prop2Bounds b;
  b.n = n;
  const auto sw = sweep(laws, 0, n, 1.0);
  const auto mp = mu_profile(laws, n, 1.0);
  for (std::size_t j = 1; j <= n; ++j) {
    const auto [m1, m2] = tail_moments(laws[j - 1]);
    b.c_used = std::max(b.c_used, regularity_from_tails(laws[j - 1], m1, m2).c12);
  }
  b.c_prime = std::max(1.0, 2.0 * b.c_used);

  b.log_survival = log_gap(laws, n, 1.0, 0.0);
  b.survival = std::exp(b.log_survival);
  b.inverse_survival = std::exp(-b.log_survival);

  b.log_inf_mu = 0.0;
  for (std::size_t i = 1; i <= n; ++i) b.log_inf_mu = i == 1 ? mp.mu_prefix[i].log : std::min(b.log_inf_mu, mp.mu_prefix[i].log);
  b.inf_mu_bound = std::exp(b.log_inf_mu);

  const double log_inv_mean = -mp.ladder[n].log;
  const double log_t = log_curvature_sum(laws, n, sw, mp);
  b.log_eq17_rhs = log_sum_exp(log_inv_mean, log_t);
  b.log_eq17_lhs = b.c_used > 0.0 ? log_sum_exp(log_inv_mean, log_t - std::log(2.0 * b.c_used)) : log_inv_mean;
  b.eq17_rhs = std::exp(b.log_eq17_rhs);
  b.eq17_lhs = std::exp(b.log_eq17_lhs);
  b.moment_lb = std::exp(-b.log_eq17_rhs);
  b.c_prime_empirical = std::exp(b.log_survival + b.log_eq17_rhs);

  const double log_inv = -b.log_survival;
  b.holds = log_le(-b.log_eq17_rhs, b.log_survival) && log_le(b.log_survival, b.log_inf_mu) &&
            log_le(b.log_eq17_lhs, log_inv) && log_le(log_inv, b.log_eq17_rhs) &&
            log_le(b.log_survival, std::log(b.c_prime) - b.log_eq17_rhs);
  return b;
}

}  // namespace detail

inline Prop2Bounds prop2_bounds(const Environment& env, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  const auto laws = env.laws(n);
  return detail::prop2_bounds(laws, n);
}

// ---------------------------------------------------------------------------
// Criterion checkers

struct ConditionVerdict {
  std::string id;
  std::vector<std::size_t> horizons;
  std::vector<double> partial_sums;  // partial sum, infimum or supremum up to each horizon
  double growth_diagnostic{std::numeric_limits<double>::quiet_NaN()};
  Verdict verdict{Verdict::Inconclusive};
  Verdict numeric_verdict{Verdict::Inconclusive};
  bool analytic{false};
};

inline constexpr double kConvergeSlope = -1.15;
inline constexpr double kDivergeSlope = -0.85;
inline constexpr double kInfPositiveSlope = -0.01;
inline constexpr double kInfZeroSlope = -0.15;
inline constexpr double kSupStableRel = 0.01;

namespace detail {

// Numeric verdict from per-interval sums: the mean term over (h_{k-1}, h_k] is
// placed at the geometric midpoint and the log-log slope is taken between the
// last two intervals.
inline std::pair<Verdict, double> series_verdict(const std::vector<std::size_t>& horizons,
                                                 const std::vector<double>& log_interval_sums) {
  if (horizons.size() < 3) return {Verdict::Inconclusive, std::numeric_limits<double>::quiet_NaN()};
  const std::size_t k = horizons.size() - 1;
  const double l1 = log_interval_sums[k - 1], l2 = log_interval_sums[k];
  if (l2 == kNegInf) return {Verdict::Converges, kNegInf};
  if (l1 == kNegInf) return {Verdict::Inconclusive, std::numeric_limits<double>::quiet_NaN()};
  auto mid = [&](std::size_t i) {
    const double lo = static_cast<double>(horizons[i - 1]), hi = static_cast<double>(horizons[i]);
    return std::pair{0.5 * (std::log(lo) + std::log(hi)), std::log(hi - lo)};
  };
  const auto [x1, w1] = mid(k - 1);
  const auto [x2, w2] = mid(k);
  const double slope = ((l2 - w2) - (l1 - w1)) / (x2 - x1);
  if (slope < kConvergeSlope) return {Verdict::Converges, slope};
  if (slope > kDivergeSlope) return {Verdict::Diverges, slope};
  return {Verdict::Inconclusive, slope};
}

}  // namespace detail

// Verdicts for the series of the absorption/explosion criteria, the infimum of
// mu_n and the supremum of the condition (8) constant. Analytic metadata on
// the environment overrides the numeric heuristic; both are reported.
inline std::vector<ConditionVerdict> theorem_checks(const Environment& env, std::vector<std::size_t> horizons) {
  if (horizons.empty()) throw std::invalid_argument("horizons: must be nonempty");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] == 0) throw std::invalid_argument("horizons/" + std::to_string(i) + ": must be >= 1");
    if (i > 0 && horizons[i] <= horizons[i - 1])
      throw std::invalid_argument("horizons/" + std::to_string(i) + ": must be strictly increasing");
  }
  const std::size_t H = horizons.size();
  std::vector<double> thm1(H, kNegInf), dmu(H, kNegInf), f2(H, kNegInf);  // per-interval log sums
  std::vector<double> thm1_cum(H), dmu_cum(H), f2_cum(H), inf_mu(H), sup_c8(H);
  double c1 = kNegInf, c2 = kNegInf, c3 = kNegInf;
  double log_mu = 0.0, log_inf = 0.0, c8 = 0.0;
  std::size_t h = 0;
  for (std::size_t n = 1; n <= horizons.back(); ++n) {
    const OffspringLaw f = env.law(n);
    const double a = detail::log_or_neg_inf(1.0 - f.mass(1));
    const double b = f.log_defect() + log_mu;
    const double fp = f.first_derivative(1.0);
    log_mu += std::log(fp);
    log_inf = n == 1 ? log_mu : std::min(log_inf, log_mu);
    const double f2pp = f.second_derivative(1.0);
    const double c = f2pp > 0.0 ? std::log(f2pp) - std::log(fp) - log_mu : kNegInf;
    const auto [m1, m2] = tail_moments(f);
    c8 = std::max(c8, regularity_from_tails(f, m1, m2).c8);
    thm1[h] = detail::log_sum_exp(thm1[h], a);
    dmu[h] = detail::log_sum_exp(dmu[h], b);
    f2[h] = detail::log_sum_exp(f2[h], c);
    c1 = detail::log_sum_exp(c1, a);
    c2 = detail::log_sum_exp(c2, b);
    c3 = detail::log_sum_exp(c3, c);
    if (n == horizons[h]) {
      thm1_cum[h] = std::exp(c1);
      dmu_cum[h] = std::exp(c2);
      f2_cum[h] = std::exp(c3);
      inf_mu[h] = log_inf;
      sup_c8[h] = c8;
      ++h;
    }
  }

  const TailMeta& meta = env.tail_meta();
  auto finish = [&](ConditionVerdict v, const std::optional<Verdict>& analytic) {
    v.horizons = horizons;
    v.verdict = v.numeric_verdict;
    if (analytic) {
      v.verdict = *analytic;
      v.analytic = true;
    }
    return v;
  };
  auto series = [&](const std::string& id, const std::vector<double>& intervals, const std::vector<double>& cum,
                    const std::optional<Verdict>& analytic) {
    ConditionVerdict v;
    v.id = id;
    v.partial_sums = cum;
    const auto [verdict, slope] = detail::series_verdict(horizons, intervals);
    v.numeric_verdict = verdict;
    v.growth_diagnostic = slope;
    return finish(std::move(v), analytic);
  };

  std::vector<ConditionVerdict> out;
  out.push_back(series("thm1_series", thm1, thm1_cum, meta.thm1_series));

  {
    ConditionVerdict v;
    v.id = "thm2_inf_mu";
    for (double l : inf_mu) v.partial_sums.push_back(std::exp(l));
    if (H >= 2) {
      const double slope = (inf_mu[H - 1] - inf_mu[H - 2]) /
                           (std::log(static_cast<double>(horizons[H - 1])) - std::log(static_cast<double>(horizons[H - 2])));
      v.growth_diagnostic = slope;
      v.numeric_verdict = slope >= kInfPositiveSlope ? Verdict::Positive
                          : slope < kInfZeroSlope    ? Verdict::Zero
                                                     : Verdict::Inconclusive;
    }
    out.push_back(finish(std::move(v), meta.thm2_inf_mu));
  }

  out.push_back(series("thm2_delta_mu_series", dmu, dmu_cum, meta.thm2_delta_mu_series));
  out.push_back(series("thm2_f2_series", f2, f2_cum, meta.thm2_f2_series));

  {
    ConditionVerdict v;
    v.id = "cond8";
    v.partial_sums = sup_c8;
    if (H >= 2) {
      const double prev = sup_c8[H - 2], last = sup_c8[H - 1];
      const double growth = prev > 0.0 ? last / prev - 1.0 : (last > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      v.growth_diagnostic = growth;
      v.numeric_verdict = growth <= kSupStableRel ? Verdict::Finite : Verdict::Inconclusive;
      if (H >= 3 && growth > kSupStableRel && sup_c8[H - 3] > 0.0 && prev / sup_c8[H - 3] - 1.0 > kSupStableRel)
        v.numeric_verdict = Verdict::Infinite;
    }
    out.push_back(finish(std::move(v), meta.cond8));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-point bracket and rate bounds

struct FixedPointWitness {
  std::size_t n{0};
  std::optional<double> theta;
  double f0{0.0};
};

struct RhoSigma {
  std::optional<double> rho;    // f_n(rho) >= rho on the window
  std::optional<double> sigma;  // f_n(sigma) <= sigma on the window
  bool rho_from_f0{false};      // rho = inf f_n[0] because some theta_n is missing
  std::vector<FixedPointWitness> witnesses;
  std::string status;

  bool available() const { return rho && sigma; }
};

// rho = inf theta_n and sigma = sup theta_n over n in [n0, N]. When some
// theta_n is missing, rho falls back to inf f_n[0] (if positive) and sigma is
// unavailable. Every reported endpoint is re-validated on the window.
inline RhoSigma rho_sigma(const Environment& env, std::size_t n0, std::size_t N) {
  if (n0 == 0) throw std::invalid_argument("n0: must be >= 1");
  if (n0 > N) throw std::invalid_argument("n0: must not exceed N");
  RhoSigma out;
  bool all_theta = true;
  double lo = 1.0, hi = 0.0, f0_inf = 1.0;
  std::vector<OffspringLaw> laws;
  for (std::size_t n = n0; n <= N; ++n) {
    laws.push_back(env.law(n));
    const auto theta = fixed_point(laws.back());
    const double f0 = laws.back().mass(0);
    out.witnesses.push_back({n, theta, f0});
    f0_inf = std::min(f0_inf, f0);
    if (theta) {
      lo = std::min(lo, *theta);
      hi = std::max(hi, *theta);
    } else {
      all_theta = false;
    }
  }
  if (all_theta) {
    out.rho = lo;
    out.sigma = hi;
  } else if (f0_inf > 0.0) {
    out.rho = f0_inf;
    out.rho_from_f0 = true;
  }
  // f(rho) >= rho and f(sigma) <= sigma, with slack for the root tolerance
  for (const auto& f : laws) {
    if (out.rho && f.value(*out.rho) < *out.rho - kFixedPointTol) out.rho.reset();
    if (out.sigma && f.value(*out.sigma) > *out.sigma + kFixedPointTol) out.sigma.reset();
  }
  if (out.available()) out.status = out.rho_from_f0 ? "ok (rho from inf f_n[0])" : "ok";
  else if (!out.rho && f0_inf == 0.0 && !all_theta) out.status = "unavailable: law without fixed point and f_n[0] = 0";
  else if (!out.sigma) out.status = "unavailable: no valid upper bracket sigma in (0, 1)";
  else out.status = "unavailable: no valid lower bracket rho in (0, 1)";
  return out;
}

struct Theorem3Rates {
  std::size_t n{0};
  double ratio_mean_rho{0.0};          // E[Z_n] / mu_n(rho)
  double tail_product_rho{0.0};        // nu_n(rho) P[tau_a > n]
  double ratio_mean_sigma_eps{0.0};    // E[Z_n] / mu_n(sigma + eps)
  double tail_product_sigma_eps{0.0};  // nu_n(sigma + eps) P[tau_a > n]
  double log_ratio_mean_rho{0.0};
  double log_tail_product_rho{0.0};
  double log_ratio_mean_sigma_eps{0.0};
  double log_tail_product_sigma_eps{0.0};
};

inline Theorem3Rates theorem3_rates(const Environment& env, double rho, double sigma, double eps, std::size_t n) {
  if (!(rho > 0.0 && rho <= sigma && eps > 0.0 && sigma + eps < 1.0))
    throw precondition_error("rates: need 0 < rho <= sigma < sigma + eps < 1");
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  const auto laws = env.laws(n);
  const double log_mean = detail::mu_profile(laws, n, 1.0).ladder[n].log;
  const double log_surv = detail::log_gap(laws, n, 1.0, 0.0);
  const auto at_rho = detail::mu_profile(laws, n, rho);
  const auto at_sig = detail::mu_profile(laws, n, sigma + eps);
  Theorem3Rates r;
  r.n = n;
  r.log_ratio_mean_rho = log_mean - at_rho.mu_n_at_s.log;
  r.log_tail_product_rho = at_rho.nu_n_at_s.log + log_surv;
  r.log_ratio_mean_sigma_eps = log_mean - at_sig.mu_n_at_s.log;
  r.log_tail_product_sigma_eps = at_sig.nu_n_at_s.log + log_surv;
  r.ratio_mean_rho = std::exp(r.log_ratio_mean_rho);
  r.tail_product_rho = std::exp(r.log_tail_product_rho);
  r.ratio_mean_sigma_eps = std::exp(r.log_ratio_mean_sigma_eps);
  r.tail_product_sigma_eps = std::exp(r.log_tail_product_sigma_eps);
  return r;
}

struct GrowthRate {
  std::size_t n{0};
  double rate_mean{0.0};      // (1/n) log E[Z_n]
  double rate_survival{0.0};  // (1/n) log P[tau_a > n]
};

inline GrowthRate growth_rate(const Environment& env, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  const auto laws = env.laws(n);
  const double log_mean = detail::mu_profile(laws, n, 1.0).ladder[n].log;
  const double log_surv = detail::log_gap(laws, n, 1.0, 0.0);
  if (!std::isfinite(log_surv) || !std::isfinite(log_mean))
    throw precondition_error("growth_rate: survival or mean underflows in log scale at n = " + std::to_string(n));
  const double nn = static_cast<double>(n);
  return {n, log_mean / nn, log_surv / nn};
}

// ---------------------------------------------------------------------------
// Extinction and graveyard tails

struct ExtinctionTail {
  std::size_t n{0};
  std::size_t proxy_horizon{0};  // N used for the limits
  double sigma{0.0};
  double q0{0.0};                // P[tau_0 < infinity] ~ f_{0,N}(0)
  bool q_bound_holds{true};      // q_l <= sigma for l = 0..n
  double ext_tail{0.0};          // P[n < tau_0 < infinity]
  double upper{0.0};             // sigma prod_{i<=n} f_i'(sigma)
  bool upper_holds{true};
  double delta_tail{0.0};        // P[n < tau_Delta < infinity]
  double lower{0.0};             // (1 - sigma) prod_{i<=n} f_i'(f_{i,n}(sigma))
  bool lower_holds{true};
};

inline constexpr double kLimitTol = 1e-10;
inline constexpr std::size_t kMaxProxyHorizon = std::size_t{1} << 22;

// Limits q_l = lim f_{l,N}(0) approximated at a proxy horizon N doubled until
// successive values of f_{n,N}(0) and f_{n,N}(1) differ by less than 1e-10.
inline ExtinctionTail extinction_tail(const Environment& env, double sigma, std::size_t n) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw precondition_error("sigma: must lie in (0, 1)");
  ExtinctionTail out;
  out.n = n;
  out.sigma = sigma;

  std::size_t extra = std::max<std::size_t>(64, 2 * n);
  std::vector<OffspringLaw> laws;
  auto extend = [&](std::size_t N) {
    for (std::size_t i = laws.size() + 1; i <= N; ++i) {
      laws.push_back(env.law(i));
      if (laws.back().mass(1) == 1.0)
        throw precondition_error("env: f_" + std::to_string(i) + "(s) = s has no fixed point in (0, 1)");
      if (laws.back().value(sigma) > sigma + kFixedPointTol)
        throw precondition_error("sigma: f_" + std::to_string(i) + "(sigma) > sigma, not an upper bracket");
    }
  };
  // f_{n,N}(s) from the tail laws n+1..N
  auto tail_value = [&](std::size_t N, double s) {
    auto p = detail::make_point(s);
    for (std::size_t i = N; i > n; --i) p = detail::apply(laws[i - 1], p);
    return p.x;
  };
  extend(n + extra);
  double y0 = tail_value(n + extra, 0.0), y1 = tail_value(n + extra, 1.0);
  for (;;) {
    const std::size_t N = n + 2 * extra;
    if (N > kMaxProxyHorizon) throw budget_error("extinction_tail: limits did not settle by the proxy horizon cap");
    extend(N);
    const double z0 = tail_value(N, 0.0), z1 = tail_value(N, 1.0);
    const bool settled = std::abs(z0 - y0) < kLimitTol && std::abs(z1 - y1) < kLimitTol;
    y0 = z0;
    y1 = z1;
    extra *= 2;
    if (settled) break;
  }
  const std::size_t N = n + extra;
  out.proxy_horizon = N;

  const std::span<const OffspringLaw> head(laws.data(), n);
  const auto sw0 = detail::sweep(laws, 0, N, 0.0);
  out.q0 = sw0.values.front();
  out.q_bound_holds = true;
  for (std::size_t l = 0; l <= n; ++l) out.q_bound_holds = out.q_bound_holds && sw0.at(l) <= sigma + kLimitTol;

  // f_{0,n}(y0) - f_{0,n}(0) and f_{0,n}(1) - f_{0,n}(y1)
  out.ext_tail = y0 > 0.0 ? std::exp(detail::log_gap_chain(head, n, detail::make_point(y0), detail::make_point(0.0), std::log(y0))) : 0.0;
  const double log_one_minus_y1 = detail::log_one_minus(std::span<const OffspringLaw>(laws.data(), N), N, 1.0)[n];
  out.delta_tail = std::exp(detail::log_gap_chain(head, n, detail::make_point(1.0), detail::point_from_log_complement(y1, log_one_minus_y1), log_one_minus_y1));

  double log_up = std::log(sigma), log_low = std::log1p(-sigma);
  const auto sws = detail::sweep(head, 0, n, sigma);
  for (std::size_t i = 1; i <= n; ++i) {
    log_up += std::log(laws[i - 1].first_derivative(sigma));
    log_low += std::log(laws[i - 1].first_derivative(sws.at(i)));
  }
  out.upper = std::exp(log_up);
  out.lower = std::exp(log_low);
  out.upper_holds = out.ext_tail <= out.upper * (1.0 + kBoundRelTol) + kLimitTol;
  out.lower_holds = out.delta_tail + kLimitTol >= out.lower * (1.0 - kBoundRelTol);
  return out;
}

// ---------------------------------------------------------------------------
// Conditional mean E[Z_n | tau_a > n] and its bound

struct ConditionalMean {
  std::size_t n{0};
  double exact{0.0};         // sum_k k P[Z_n = k] / P[tau_a > n] from the coefficients
  double exact_moment{0.0};  // E[Z_n] / P[tau_a > n] from the composition
  std::size_t truncation{0};
  double alpha{0.0};  // inf f_i(0)
  double beta{0.0};   // sup f_i(1)
  double c{0.0};      // 1 / (e alpha^2 beta log(1/beta))
  double thm4_bound{0.0};
  bool holds{false};
};

inline constexpr double kMeanDeficitTol = 1e-10;

// Exact conditional mean and the bound 1 + c f_n'(1) sum_{j<n} beta^j (1 + f''_{n-j}(1)/f'_{n-j}(1)),
// with alpha and beta taken over generations 1..n. The truncation doubles from
// D0 until the mean carried above it is below 1e-10 relative.
inline ConditionalMean conditional_mean(const Environment& env, std::size_t n, std::size_t D0 = 32,
                                        double budget = kDefaultCoefficientBudget) {
  if (n == 0) throw std::invalid_argument("n: must be >= 1");
  if (D0 < 1) throw std::invalid_argument("D: truncation must be >= 1");
  const auto laws = env.laws(n);
  ConditionalMean out;
  out.n = n;
  out.alpha = 1.0;
  out.beta = 0.0;
  for (const auto& f : laws) {
    out.alpha = std::min(out.alpha, f.mass(0));
    out.beta = std::max(out.beta, f.total_mass());
  }
  if (!(out.alpha > 0.0)) throw precondition_error("conditional_mean: alpha = inf f_n(0) is 0");
  if (!(out.beta < 1.0))
    throw precondition_error("conditional_mean: beta = sup f_n(1) is 1");
  out.c = 1.0 / (std::numbers::e * out.alpha * out.alpha * out.beta * std::log(1.0 / out.beta));
  double sum = 0.0, bj = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    const OffspringLaw& f = laws[n - j - 1];
    sum += bj * (1.0 + f.second_derivative(1.0) / f.first_derivative(1.0));
    bj *= out.beta;
  }
  out.thm4_bound = 1.0 + out.c * laws.back().first_derivative(1.0) * sum;

  const double log_mean = detail::mu_profile(laws, n, 1.0).ladder[n].log;
  const double log_surv = detail::log_gap(laws, n, 1.0, 0.0);
  out.exact_moment = std::exp(log_mean - log_surv);
  const double mean = std::exp(log_mean);

  for (std::size_t D = D0;; D *= 2) {
    const auto dist = detail::compose_coeffs(laws, n, D, budget);
    double m = 0.0;
    for (std::size_t k = 1; k < dist.probs.size(); ++k) m += static_cast<double>(k) * dist.probs[k];
    if ((mean - m) <= kMeanDeficitTol * mean) {
      out.truncation = D;
      out.exact = m / std::exp(log_surv);
      break;
    }
  }
  out.holds = out.exact <= out.thm4_bound;
  return out;
}

}  // namespace dgw
