#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgw/environment.hpp"
#include "dgw/offspring.hpp"
#include "dgw/parallel.hpp"
#include "dgw/rng.hpp"
#include "dgw/state.hpp"

namespace dgw {

enum class Mode { Direct, Coupled };

inline const char* to_string(Mode m) { return m == Mode::Direct ? "direct" : "coupled"; }

enum class Terminal { Extinct, Absorbed, Alive, Overflow };

inline const char* to_string(Terminal t) {
  switch (t) {
    case Terminal::Extinct: return "extinct";
    case Terminal::Absorbed: return "absorbed";
    case Terminal::Alive: return "alive";
    case Terminal::Overflow: break;
  }
  return "overflow";
}

inline constexpr State::count_type kDefaultPopulationCap = 10'000'000;

struct SimOptions {
  State::count_type population_cap{kDefaultPopulationCap};
  bool keep_trajectory{true};
  unsigned threads{1};
};

// One trajectory Z_0..Z_T. Extinct and Absorbed carry the hitting time; Alive
// carries the value at the horizon; Overflow marks a path whose population
// passed the cap at `time` (its later fate is unknown and it is excluded from
// conditional statistics).
struct PathSample {
  std::vector<State> trajectory;  // empty unless kept
  Terminal terminal{Terminal::Alive};
  std::size_t time{0};
  State final_state{1};
  Mode mode{Mode::Direct};
  std::optional<double> w_at_horizon;  // Z_T / mu_T on Alive paths
};

// Laws prepared once for many replicates.
struct PreparedEnvironment {
  std::size_t horizon{0};
  std::vector<OffspringLaw> laws;        // f_1..f_T
  std::vector<double> log_keep;          // log f_n(1)
  std::vector<double> log_mu;            // log mu_n, n = 0..T

  PreparedEnvironment(const Environment& env, std::size_t T) : horizon{T}, laws{env.laws(T)} {
    log_keep.reserve(T);
    log_mu.assign(T + 1, 0.0);
    for (std::size_t i = 1; i <= T; ++i) {
      log_keep.push_back(std::log1p(-laws[i - 1].defect()));
      log_mu[i] = log_mu[i - 1] + std::log(laws[i - 1].first_derivative(1.0));
    }
  }
};

namespace detail {

inline PathSample run_path(const PreparedEnvironment& pe, Mode mode, const RandomStream& stream,
                           const SimOptions& opt) {
  PathSample out;
  out.mode = mode;
  if (opt.keep_trajectory) {
    out.trajectory.reserve(pe.horizon + 1);
    out.trajectory.push_back(State{1});
  }
  State z{1};
  for (std::size_t n = 1; n <= pe.horizon; ++n) {
    RandomStream rng = stream.fork(n);
    const OffspringLaw& f = pe.laws[n - 1];
    if (mode == Mode::Direct) {
      z = sample_sum(f, z.count(), rng);
    } else {
      // kill with probability 1 - f_n(1)^{Z~_{n-1}}, then evolve Z~ under g_n
      const double prev = static_cast<double>(z.count());
      const bool killed = rng.bernoulli(-std::expm1(prev * pe.log_keep[n - 1]));
      const State::count_type next = sample_proper_sum(f, z.count(), rng);
      z = killed ? State::graveyard() : State{next};
    }
    if (opt.keep_trajectory) out.trajectory.push_back(z);
    if (z.is_graveyard() || z.is_extinct()) {
      out.terminal = z.is_graveyard() ? Terminal::Absorbed : Terminal::Extinct;
      out.time = n;
      out.final_state = z;
      if (opt.keep_trajectory) out.trajectory.resize(pe.horizon + 1, z);
      return out;
    }
    if (z.count() > opt.population_cap) {
      out.terminal = Terminal::Overflow;
      out.time = n;
      out.final_state = z;
      return out;
    }
  }
  out.terminal = Terminal::Alive;
  out.time = pe.horizon;
  out.final_state = z;
  out.w_at_horizon = std::exp(std::log(static_cast<double>(z.count())) - pe.log_mu[pe.horizon]);
  return out;
}

}  // namespace detail

// One path of the direct recursion (sum of per-individual defective draws) or
// of the coupled construction (normalized process killed at rate 1 - f_n(1)^k).
// Generation n draws from rng.fork(n).
inline PathSample run_path(const Environment& env, std::size_t horizon, Mode mode, const RandomStream& rng,
                           const SimOptions& opt = {}) {
  const PreparedEnvironment pe(env, horizon);
  return detail::run_path(pe, mode, rng, opt);
}

// Replicate r uses base.fork(r). Paths are returned in replicate order
// regardless of the thread count.
inline std::vector<PathSample> simulate_paths(const Environment& env, std::size_t horizon, std::size_t reps, Mode mode,
                                              const RandomStream& base, const SimOptions& opt = {}) {
  if (reps < 1) throw std::invalid_argument("reps: must be >= 1");
  const PreparedEnvironment pe(env, horizon);
  std::vector<PathSample> paths(reps);
  detail::parallel_for(reps, opt.threads, [&](std::size_t r) { paths[r] = detail::run_path(pe, mode, base.fork(r), opt); });
  return paths;
}

struct Estimate {
  double value{0.0};
  double se{0.0};
};

struct McSummary {
  std::size_t reps{0};
  std::size_t horizon{0};
  Mode mode{Mode::Direct};
  std::uint64_t seed{0};
  std::size_t extinct{0};
  std::size_t absorbed_delta{0};
  std::size_t alive{0};     // includes overflow paths
  std::size_t overflow{0};
  Estimate survival;        // P[tau_a > n]
  Estimate p_ext;           // P[tau_0 <= n]
  Estimate p_delta;         // P[tau_Delta <= n]
  Estimate mean_alive;      // E[Z_n | alive], overflow excluded
  std::map<State::count_type, std::size_t> histogram;  // Z_n on alive paths, overflow excluded
  // W_n = Z_n / mu_n over non-overflow paths, with W_n = 0 off survival.
  std::size_t w_count{0};
  double w_mean{0.0};
  double w_variance{0.0};
  double w_se{0.0};
};

namespace detail {

inline Estimate proportion(std::size_t k, std::size_t n) {
  const double p = static_cast<double>(k) / static_cast<double>(n);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

}  // namespace detail

// Fixed-order reduction over replicate index.
inline McSummary summarize(const std::vector<PathSample>& paths, std::size_t horizon, Mode mode, std::uint64_t seed) {
  McSummary s;
  s.reps = paths.size();
  s.horizon = horizon;
  s.mode = mode;
  s.seed = seed;
  double z_sum = 0.0, z_sq = 0.0, w_sum = 0.0, w_sq = 0.0;
  std::size_t live = 0;
  for (const auto& p : paths) {
    switch (p.terminal) {
      case Terminal::Extinct: ++s.extinct; break;
      case Terminal::Absorbed: ++s.absorbed_delta; break;
      case Terminal::Overflow: ++s.alive; ++s.overflow; break;
      case Terminal::Alive: {
        ++s.alive;
        ++live;
        const double z = static_cast<double>(p.final_state.count());
        z_sum += z;
        z_sq += z * z;
        ++s.histogram[p.final_state.count()];
        break;
      }
    }
    if (p.terminal != Terminal::Overflow) {
      const double w = p.w_at_horizon.value_or(0.0);
      ++s.w_count;
      w_sum += w;
      w_sq += w * w;
    }
  }
  s.survival = detail::proportion(s.alive, s.reps);
  s.p_ext = detail::proportion(s.extinct, s.reps);
  s.p_delta = detail::proportion(s.absorbed_delta, s.reps);
  if (live > 0) {
    const double m = z_sum / static_cast<double>(live);
    const double var = live > 1 ? std::max(0.0, (z_sq - z_sum * m) / static_cast<double>(live - 1)) : 0.0;
    s.mean_alive = {m, std::sqrt(var / static_cast<double>(live))};
  }
  if (s.w_count > 0) {
    const double nw = static_cast<double>(s.w_count);
    s.w_mean = w_sum / nw;
    s.w_variance = s.w_count > 1 ? std::max(0.0, (w_sq - w_sum * s.w_mean) / (nw - 1.0)) : 0.0;
    s.w_se = std::sqrt(s.w_variance / nw);
  }
  return s;
}

// reps independent paths with streams RandomStream(master_seed).fork(replicate).
inline McSummary monte_carlo(const Environment& env, std::size_t horizon, std::size_t reps, Mode mode,
                             std::uint64_t master_seed, SimOptions opt = {}) {
  opt.keep_trajectory = false;
  const auto paths = simulate_paths(env, horizon, reps, mode, RandomStream(master_seed), opt);
  return summarize(paths, horizon, mode, master_seed);
}

// ---------------------------------------------------------------------------
// Distributional agreement of the two modes

inline constexpr std::size_t kAgreementBins = 12;  // 0, D, 1..9, 10+

inline std::size_t agreement_bin(const PathSample& p) {
  if (p.terminal == Terminal::Extinct) return 0;
  if (p.terminal == Terminal::Absorbed) return 1;
  if (p.terminal == Terminal::Overflow) return kAgreementBins - 1;
  return 1 + static_cast<std::size_t>(std::min<State::count_type>(p.final_state.count(), 10));
}

struct AgreementResult {
  std::vector<std::size_t> direct_counts;
  std::vector<std::size_t> coupled_counts;
  std::size_t bins_used{0};
  double tv_distance{0.0};
  double chi2_stat{0.0};
  std::size_t chi2_df{0};
  double threshold{0.0};
  bool degenerate{false};
  bool pass{false};
};

inline constexpr std::uint64_t kDirectStreamTag = 1;
inline constexpr std::uint64_t kCoupledStreamTag = 2;

// Terminal-state histograms of both modes on disjoint streams; pass when the
// total-variation distance is at most 3 sqrt(B / reps) for B nonempty bins.
inline AgreementResult mode_agreement(const Environment& env, std::size_t horizon, std::size_t reps,
                                      std::uint64_t seed, SimOptions opt = {}) {
  if (reps < 10'000) throw std::invalid_argument("reps: mode agreement needs at least 10^4 replicates");
  opt.keep_trajectory = false;
  const RandomStream root(seed);
  AgreementResult a;
  a.direct_counts.assign(kAgreementBins, 0);
  a.coupled_counts.assign(kAgreementBins, 0);
  for (const auto& p : simulate_paths(env, horizon, reps, Mode::Direct, root.fork(kDirectStreamTag), opt))
    ++a.direct_counts[agreement_bin(p)];
  for (const auto& p : simulate_paths(env, horizon, reps, Mode::Coupled, root.fork(kCoupledStreamTag), opt))
    ++a.coupled_counts[agreement_bin(p)];
  const double n = static_cast<double>(reps);
  for (std::size_t b = 0; b < kAgreementBins; ++b) {
    const double x = static_cast<double>(a.direct_counts[b]), y = static_cast<double>(a.coupled_counts[b]);
    if (x + y == 0.0) continue;
    ++a.bins_used;
    a.tv_distance += 0.5 * std::abs(x - y) / n;
    a.chi2_stat += (x - y) * (x - y) / (x + y);
  }
  a.chi2_df = a.bins_used > 0 ? a.bins_used - 1 : 0;
  a.threshold = 3.0 * std::sqrt(static_cast<double>(a.bins_used) / n);
  a.degenerate = a.bins_used <= 1;
  a.pass = a.degenerate ? a.tv_distance == 0.0 : a.tv_distance <= a.threshold;
  return a;
}

// CSV rows "replicate,n,state" for kept trajectories.
inline void write_trajectories_csv(std::ostream& os, const std::vector<PathSample>& paths) {
  os << "replicate,n,state\n";
  for (std::size_t r = 0; r < paths.size(); ++r)
    for (std::size_t n = 0; n < paths[r].trajectory.size(); ++n)
      os << r << ',' << n << ',' << paths[r].trajectory[n] << '\n';
}

}  // namespace dgw
