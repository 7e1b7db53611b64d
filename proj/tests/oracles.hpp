#pragma once

// Reference computations used by the tests. They deliberately take different
// routes from the library: forward propagation of the state distribution
// instead of generating-function composition, plain loops instead of
// log-scale sweeps, bisection instead of closed forms.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "dgw/offspring.hpp"

namespace oracle {

// Weights f[0..K] of a law, with linear-fractional tails cut at K.
inline std::vector<double> weights(const dgw::OffspringLaw& f, std::size_t K) {
  std::vector<double> w(K + 1);
  for (std::size_t k = 0; k <= K; ++k) w[k] = f.mass(k);
  return w;
}

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b, std::size_t cap) {
  std::vector<double> out(std::min(a.size() + b.size() - 1, cap + 1), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size() && i + j <= cap; ++j) out[i + j] += a[i] * b[j];
  return out;
}

// Law of Z_n on {0..cap} by propagating P[Z_j = m] one generation at a time.
// P[Z_n = Delta] is the mass lost to defects; mass above cap is dropped
// (pick cap >= max support^n for exact results).
struct Forward {
  std::vector<double> probs;
  double delta{0.0};
};

inline Forward forward(const std::vector<dgw::OffspringLaw>& laws, std::size_t n, std::size_t cap,
                       std::size_t law_cut = 64) {
  Forward st;
  st.probs.assign(cap + 1, 0.0);
  st.probs[1] = 1.0;
  for (std::size_t g = 0; g < n; ++g) {
    const auto w = weights(laws[g], law_cut);
    std::vector<double> next(cap + 1, 0.0);
    std::vector<double> power{1.0};  // m-fold convolution of the defective weights
    next[0] += st.probs[0];
    for (std::size_t m = 1; m <= cap; ++m) {
      power = convolve(power, w, cap);
      if (st.probs[m] == 0.0) continue;
      for (std::size_t k = 0; k < power.size(); ++k) next[k] += st.probs[m] * power[k];
    }
    st.probs = std::move(next);
    st.delta = 1.0 - std::accumulate(st.probs.begin(), st.probs.end(), 0.0);
  }
  return st;
}

inline double mean(const Forward& f) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.probs.size(); ++k) m += static_cast<double>(k) * f.probs[k];
  return m;
}

inline double second_moment(const Forward& f) {
  double m = 0.0;
  for (std::size_t k = 0; k < f.probs.size(); ++k) m += static_cast<double>(k * k) * f.probs[k];
  return m;
}

inline double pgf(const std::vector<double>& probs, double s) {
  double v = 0.0;
  for (std::size_t k = probs.size(); k-- > 0;) v = v * s + probs[k];
  return v;
}

// f_{0,n}(s) evaluated by brute force through the forward distribution.
inline double composed(const std::vector<dgw::OffspringLaw>& laws, std::size_t n, double s, std::size_t cap) {
  return pgf(forward(laws, n, cap).probs, s);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double second_difference(const std::function<double(double)>& f, double x, double h = 1e-4) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// Smallest root of g(s) = f(s) - s in (0, 1): scan for a sign change, then bisect.
inline double smallest_fixed_point(const std::function<double(double)>& f, std::size_t grid = 20000) {
  double lo = 0.0;
  for (std::size_t i = 1; i < grid; ++i) {
    double hi = static_cast<double>(i) / static_cast<double>(grid);
    if (f(hi) - hi <= 0.0) {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) - mid > 0.0 ? lo : hi) = mid;
        if (hi - lo < 1e-15) break;
      }
      return 0.5 * (lo + hi);
    }
    lo = hi;
  }
  return NAN;
}

// Binomial standard error of a proportion p over n draws.
inline double se(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace oracle
