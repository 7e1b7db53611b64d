#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgw/rng.hpp"
#include "dgw/state.hpp"

namespace dgw {

enum class LawKind { FiniteSupport, LinearFractional };

// Parameters of f(s) = q + r / (1 - p s).
struct LinearFractionalParams {
  double q{0.0};
  double r{0.0};
  double p{0.0};
  friend bool operator==(const LinearFractionalParams&, const LinearFractionalParams&) = default;
};

// One generation's possibly defective offspring distribution. The mass missing
// from f(1) is the probability that an individual sends the process to the
// graveyard. Immutable once constructed; construction validates the
// invariants (nonnegative weights, f(1) <= 1, 0 < f'(1) < infinity).
class OffspringLaw {
 public:
  // Slack allowed on f(1) <= 1 for weights produced by floating-point division.
  static constexpr double kMassSlack = 1e-12;

  static OffspringLaw finite(std::vector<double> weights) {
    if (weights.empty()) throw std::invalid_argument("weights: must be nonempty");
    double total = 0.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double w = weights[k];
      if (!std::isfinite(w) || w < 0.0)
        throw std::invalid_argument("weights/" + std::to_string(k) + ": must be finite and >= 0");
      total += w;
      mean += static_cast<double>(k) * w;
    }
    if (total > 1.0 + kMassSlack)
      throw std::invalid_argument("weights: total mass " + std::to_string(total) + " exceeds 1");
    if (!(mean > 0.0)) throw std::invalid_argument("weights: mean offspring f'(1) must be > 0");
    while (weights.size() > 1 && weights.back() == 0.0) weights.pop_back();
    OffspringLaw law;
    law.kind_ = LawKind::FiniteSupport;
    law.weights_ = std::move(weights);
    law.set_defect_from_mass();
    return law;
  }

  static OffspringLaw linear_fractional(double q, double r, double p) {
    if (!std::isfinite(q) || q < 0.0) throw std::invalid_argument("q: must be finite and >= 0");
    if (!std::isfinite(r) || !(r > 0.0)) throw std::invalid_argument("r: must be > 0");
    if (!std::isfinite(p) || !(p > 0.0) || !(p < 1.0))
      throw std::invalid_argument("p: must lie in (0, 1) for a positive finite mean");
    if (q + r / (1.0 - p) > 1.0 + kMassSlack)
      throw std::invalid_argument("q: total mass q + r/(1-p) exceeds 1");
    OffspringLaw law;
    law.kind_ = LawKind::LinearFractional;
    law.lf_ = {q, r, p};
    law.set_defect_from_mass();
    return law;
  }

  // f(s) = s.
  static OffspringLaw identity() { return finite({0.0, 1.0}); }

  // Copy carrying an exactly known defect exp(log_delta), for defects too small
  // to survive the subtraction 1 - f(1). Must agree with the weights to 1e-12.
  OffspringLaw with_log_defect(double log_delta) const {
    const double d = std::exp(log_delta);
    if (!(d < 1.0) || std::abs(d - std::max(0.0, 1.0 - total_mass())) > kMassSlack)
      throw std::invalid_argument("defect: inconsistent with the offspring weights");
    OffspringLaw out = *this;
    out.defect_ = d;
    out.log_defect_ = log_delta;
    return out;
  }

  // 1 - f(1) and its logarithm (-inf for proper laws).
  double defect() const { return defect_; }
  double log_defect() const { return log_defect_; }

  LawKind kind() const { return kind_; }
  bool is_finite() const { return kind_ == LawKind::FiniteSupport; }

  // FiniteSupport only; trailing zeros trimmed.
  std::span<const double> weights() const { return weights_; }
  // LinearFractional only.
  const LinearFractionalParams& lf_params() const { return lf_; }

  // Largest k with f[k] > 0, or nullopt for unbounded support.
  std::optional<std::size_t> max_support() const {
    if (kind_ == LawKind::LinearFractional) return std::nullopt;
    return weights_.size() - 1;
  }

  // f[k].
  double mass(std::size_t k) const {
    if (kind_ == LawKind::FiniteSupport) return k < weights_.size() ? weights_[k] : 0.0;
    if (k == 0) return lf_.q + lf_.r;
    return lf_.r * std::pow(lf_.p, static_cast<double>(k));
  }

  double total_mass() const { return value(1.0); }

  double value(double s) const {
    if (kind_ == LawKind::LinearFractional) return lf_.q + lf_.r / (1.0 - lf_.p * s);
    double acc = 0.0;
    for (auto it = weights_.rbegin(); it != weights_.rend(); ++it) acc = acc * s + *it;
    return acc;
  }

  double first_derivative(double s) const {
    if (kind_ == LawKind::LinearFractional) {
      const double den = 1.0 - lf_.p * s;
      return lf_.r * lf_.p / (den * den);
    }
    double acc = 0.0;
    for (std::size_t k = weights_.size(); k-- > 1;) acc = acc * s + static_cast<double>(k) * weights_[k];
    return acc;
  }

  double second_derivative(double s) const {
    if (kind_ == LawKind::LinearFractional) {
      const double den = 1.0 - lf_.p * s;
      return 2.0 * lf_.r * lf_.p * lf_.p / (den * den * den);
    }
    double acc = 0.0;
    for (std::size_t k = weights_.size(); k-- > 2;)
      acc = acc * s + static_cast<double>(k) * static_cast<double>(k - 1) * weights_[k];
    return acc;
  }

  // (f(a) - f(b)) / (a - b) evaluated without cancellation; f'(a) when a == b.
  double divided_difference(double a, double b) const {
    if (kind_ == LawKind::LinearFractional) {
      return lf_.r * lf_.p / ((1.0 - lf_.p * a) * (1.0 - lf_.p * b));
    }
    // h_k = (a^k - b^k)/(a - b) obeys h_k = a h_{k-1} + b^{k-1}.
    double h = 0.0;
    double b_pow = 1.0;
    double acc = 0.0;
    for (std::size_t k = 1; k < weights_.size(); ++k) {
      h = a * h + b_pow;
      b_pow *= b;
      acc += weights_[k] * h;
    }
    return acc;
  }

  // Weights f[0..K] where, for unbounded support, K is the first index whose
  // remaining tail mass is below rel_tol * f(1).
  std::vector<double> truncated_weights(double rel_tol = 1e-14) const {
    if (kind_ == LawKind::FiniteSupport) return weights_;
    const std::size_t k_max = tail_cutoff(rel_tol);
    std::vector<double> w(k_max + 1);
    for (std::size_t k = 0; k <= k_max; ++k) w[k] = mass(k);
    return w;
  }

  // Smallest K with sum_{k > K} f[k] <= rel_tol * f(1). Zero tail for finite laws.
  std::size_t tail_cutoff(double rel_tol) const {
    if (kind_ == LawKind::FiniteSupport) return weights_.size() - 1;
    // tail beyond K is r p^{K+1} / (1 - p)
    const double target = rel_tol * total_mass() * (1.0 - lf_.p) / lf_.r;
    const double k = std::ceil(std::log(target) / std::log(lf_.p)) - 1.0;
    return static_cast<std::size_t>(std::max(1.0, k));
  }

  friend bool operator==(const OffspringLaw& a, const OffspringLaw& b) {
    if (a.kind_ != b.kind_) return false;
    return a.kind_ == LawKind::FiniteSupport ? a.weights_ == b.weights_ : a.lf_ == b.lf_;
  }

 private:
  OffspringLaw() = default;

  void set_defect_from_mass() {
    defect_ = std::max(0.0, 1.0 - total_mass());
    log_defect_ = std::log(defect_);
  }

  LawKind kind_{LawKind::FiniteSupport};
  std::vector<double> weights_;
  LinearFractionalParams lf_{};
  double defect_{0.0};
  double log_defect_{0.0};
};

// f(s), f'(s) or f''(s).
inline double eval(const OffspringLaw& law, double s, int order) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("s: must lie in [0, 1]");
  switch (order) {
    case 0: return law.value(s);
    case 1: return law.first_derivative(s);
    case 2: return law.second_derivative(s);
    default: throw std::invalid_argument("order: must be 0, 1 or 2");
  }
}

inline double defect(const OffspringLaw& law) { return law.defect(); }

// g(s) = f(s) / f(1).
inline OffspringLaw normalize(const OffspringLaw& law) {
  const double total = law.total_mass();
  if (!(total > 0.0)) throw std::invalid_argument("law: f(1) = 0 cannot be normalized");
  if (law.kind() == LawKind::LinearFractional) {
    const auto& lf = law.lf_params();
    return OffspringLaw::linear_fractional(lf.q / total, lf.r / total, lf.p);
  }
  std::vector<double> w(law.weights().begin(), law.weights().end());
  for (double& x : w) x /= total;
  return OffspringLaw::finite(std::move(w));
}

namespace detail {

inline std::optional<double> smallest_root_in_open_unit(double lo_root, double hi_root) {
  for (double x : {lo_root, hi_root})
    if (x > 0.0 && x < 1.0) return x;
  return std::nullopt;
}

// Roots of x^2 - 2 b x + c = 0, smaller one in the cancellation-free form c / (b + sqrt(b^2 - c)).
inline std::optional<std::pair<double, double>> quadratic_roots(double b, double c) {
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double hi = b + sq;
  const double lo = hi != 0.0 ? c / hi : 0.0;
  return std::pair{lo, hi};
}

}  // namespace detail

inline constexpr int kBisectionMaxIter = 200;
inline constexpr double kFixedPointTol = 1e-12;

// Smallest root of f(s) = s in (0, 1) by bisection on the convex function
// f(s) - s. Works for any law.
inline std::optional<double> fixed_point_bisection(const OffspringLaw& law) {
  auto gap = [&](double s) { return law.value(s) - s; };
  if (!(law.value(0.0) > 0.0)) return std::nullopt;  // f(s) - s <= 0 on (0,1] by convexity
  double hi = 1.0;
  if (gap(1.0) >= 0.0) {
    // proper law: a root below 1 needs f'(1) > 1; the minimum of f(s) - s sits where f'(s) = 1
    if (!(law.first_derivative(1.0) > 1.0)) return std::nullopt;
    double a = 0.0, b = 1.0;
    for (int it = 0; it < kBisectionMaxIter; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid == a || mid == b) break;
      (law.first_derivative(mid) < 1.0 ? a : b) = mid;
    }
    hi = b;
    if (gap(hi) >= 0.0) return std::nullopt;
  }
  double lo = 0.0;
  for (int it = 0; it < kBisectionMaxIter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (gap(mid) > 0.0 ? lo : hi) = mid;
  }
  const double theta = std::abs(gap(lo)) <= std::abs(gap(hi)) ? lo : hi;
  if (!(theta > 0.0 && theta < 1.0) || std::abs(gap(theta)) > kFixedPointTol) return std::nullopt;
  return theta;
}

// Smallest theta in (0, 1) with f(theta) = theta. Closed forms for binary
// (support within {0, 1, 2}) and linear-fractional laws, bisection otherwise.
// nullopt when no such root exists, including the degenerate f(s) = s.
inline std::optional<double> fixed_point(const OffspringLaw& law) {
  if (law.kind() == LawKind::LinearFractional) {
    const auto& lf = law.lf_params();
    const auto roots = detail::quadratic_roots((1.0 + lf.p * lf.q) / (2.0 * lf.p), (lf.r + lf.q) / lf.p);
    if (!roots) return std::nullopt;
    return detail::smallest_root_in_open_unit(roots->first, roots->second);
  }
  if (law.weights().size() > 3) return fixed_point_bisection(law);
  const double r = law.mass(0), q = law.mass(1), p = law.mass(2);
  if (law.defect() <= 4.0 * std::numeric_limits<double>::epsilon()) {
    // proper up to rounding: the roots are r / p and 1, so avoid a rounded 1 - 2^-53
    if (p == 0.0) return std::nullopt;
    return detail::smallest_root_in_open_unit(r / p, 2.0);
  }
  if (p == 0.0) {
    if (q >= 1.0) return std::nullopt;
    return detail::smallest_root_in_open_unit(r / (1.0 - q), 2.0);
  }
  const auto roots = detail::quadratic_roots((1.0 - q) / (2.0 * p), r / p);
  if (!roots) return std::nullopt;
  return detail::smallest_root_in_open_unit(roots->first, roots->second);
}

struct RegularityReport {
  double m2_tail{0.0};    // E[X^2; X >= 2]
  double m1_tail{0.0};    // E[X; X >= 2]
  double cond_mean{0.0};  // E[X | X >= 1]
  double c8{0.0};         // smallest c in E[X^2; X>=2] <= c E[X; X>=2] E[X | X>=1]
  double c12{0.0};        // smallest c in E[X^2; X>=2] <= c E[X; X>=2]
};

// E[X; X >= 2] and E[X^2; X >= 2] in closed form (exact for both kinds).
inline std::pair<double, double> tail_moments(const OffspringLaw& law) {
  if (law.kind() == LawKind::LinearFractional) {
    const auto& lf = law.lf_params();
    const double p = lf.p, om = 1.0 - p;
    return {lf.r * (p / (om * om) - p), lf.r * (p * (1.0 + p) / (om * om * om) - p)};
  }
  double m1 = 0.0, m2 = 0.0;
  const auto w = law.weights();
  for (std::size_t k = 2; k < w.size(); ++k) {
    const double kk = static_cast<double>(k);
    m1 += kk * w[k];
    m2 += kk * kk * w[k];
  }
  return {m1, m2};
}

inline RegularityReport regularity_from_tails(const OffspringLaw& law, double m1, double m2) {
  RegularityReport rep;
  rep.m1_tail = m1;
  rep.m2_tail = m2;
  const double at_least_one = law.total_mass() - law.mass(0);
  rep.cond_mean = at_least_one > 0.0 ? law.first_derivative(1.0) / at_least_one : 0.0;
  if (m1 > 0.0) {
    rep.c12 = m2 / m1;
    rep.c8 = m2 / (m1 * rep.cond_mean);
  }
  return rep;
}

// Truncated moment sums over k = 2..trunc (exact for finite support) and the
// minimal constants of the two regularity conditions; 0/0 is reported as 0.
inline RegularityReport regularity(const OffspringLaw& law, std::size_t trunc) {
  if (law.kind() == LawKind::FiniteSupport) {
    const auto [m1, m2] = tail_moments(law);
    return regularity_from_tails(law, m1, m2);
  }
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 2; k <= trunc; ++k) {
    const double kk = static_cast<double>(k), w = law.mass(k);
    m1 += kk * w;
    m2 += kk * kk * w;
  }
  const auto [e1, e2] = tail_moments(law);
  if ((e2 - m2) > 1e-12 * e2)
    throw std::invalid_argument("trunc: linear-fractional tail beyond trunc exceeds 1e-12 relative");
  return regularity_from_tails(law, m1, m2);
}

// One draw from the defective law: k with probability f[k], the graveyard with
// probability 1 - f(1).
inline State sample(const OffspringLaw& law, RandomStream& rng) {
  const double u = rng.uniform();
  if (law.kind() == LawKind::LinearFractional) {
    const auto& lf = law.lf_params();
    const double zero = lf.q + lf.r;
    if (u < zero) return State{0};
    const double tail = lf.r * lf.p / (1.0 - lf.p);
    if (u >= zero + tail) return State::graveyard();
    // given X >= 1, X - 1 is geometric: P(X > j) = p^j
    const double v = std::clamp((u - zero) / tail, 0.0, std::nextafter(1.0, 0.0));
    const double j = std::floor(std::log1p(-v) / std::log(lf.p));
    return State{1 + static_cast<State::count_type>(j)};
  }
  double acc = 0.0;
  const auto w = law.weights();
  for (std::size_t k = 0; k < w.size(); ++k) {
    acc += w[k];
    if (u < acc) return State{k};
  }
  return State::graveyard();
}

// One draw from the normalized law g = f / f(1) (never the graveyard).
inline State::count_type sample_proper(const OffspringLaw& law, RandomStream& rng) {
  for (;;) {
    const double u = rng.uniform() * law.total_mass();
    if (law.kind() == LawKind::LinearFractional) {
      const auto& lf = law.lf_params();
      const double zero = lf.q + lf.r;
      if (u < zero) return 0;
      const double tail = lf.r * lf.p / (1.0 - lf.p);
      const double v = std::clamp((u - zero) / tail, 0.0, std::nextafter(1.0, 0.0));
      return 1 + static_cast<State::count_type>(std::floor(std::log1p(-v) / std::log(lf.p)));
    }
    double acc = 0.0;
    const auto w = law.weights();
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += w[k];
      if (u < acc) return k;
    }
    // u landed in the rounding gap above the last cumulative weight; redraw
  }
}

namespace detail {

inline constexpr State::count_type kIndividualDrawLimit = 16;

inline std::uint64_t binomial(RandomStream& rng, std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::uint64_t>(n, p)(rng);
}

// Sum of n iid draws from the proper law g = f / f(1), aggregated as a multinomial.
inline State::count_type proper_sum_aggregated(const OffspringLaw& law, std::uint64_t n, RandomStream& rng) {
  const double total = law.total_mass();
  if (law.kind() == LawKind::LinearFractional) {
    const auto& lf = law.lf_params();
    const double positive = (lf.r * lf.p / (1.0 - lf.p)) / total;
    const std::uint64_t m = binomial(rng, n, positive);
    if (m == 0) return 0;
    // each positive draw is 1 + (failures before a success with probability 1 - p)
    const auto extra = std::negative_binomial_distribution<std::uint64_t>(m, 1.0 - lf.p)(rng);
    return m + extra;
  }
  const auto w = law.weights();
  double remaining_mass = total;
  std::uint64_t remaining = n;
  State::count_type sum = 0;
  for (std::size_t k = 0; k < w.size() && remaining > 0; ++k) {
    const std::uint64_t nk = (k + 1 == w.size()) ? remaining : binomial(rng, remaining, w[k] / remaining_mass);
    remaining -= nk;
    remaining_mass -= w[k];
    sum += nk * k;
  }
  return sum;
}

}  // namespace detail

// Sum of n iid draws from the defective law, with the graveyard absorbing the
// sum. Small n draws individually; large n draws the graveyard count and the
// category counts as a multinomial.
inline State sample_sum(const OffspringLaw& law, State::count_type n, RandomStream& rng) {
  if (n <= detail::kIndividualDrawLimit) {
    State sum{0};
    for (State::count_type i = 0; i < n; ++i) {
      sum += sample(law, rng);
      if (sum.is_graveyard()) return sum;
    }
    return sum;
  }
  if (detail::binomial(rng, n, defect(law)) > 0) return State::graveyard();
  return State{detail::proper_sum_aggregated(law, n, rng)};
}

// Sum of n iid draws from the normalized law g = f / f(1).
inline State::count_type sample_proper_sum(const OffspringLaw& law, State::count_type n, RandomStream& rng) {
  if (n <= detail::kIndividualDrawLimit) {
    State::count_type sum = 0;
    for (State::count_type i = 0; i < n; ++i) sum += sample_proper(law, rng);
    return sum;
  }
  return detail::proper_sum_aggregated(law, n, rng);
}

}  // namespace dgw
