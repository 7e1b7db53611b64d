// Library tour on the constant environment f(s) = 0.45 + 0.45 s^2: exact
// absorption probabilities, moments, the fixed point, a Monte Carlo check and
// one tree conditioned on survival to generation 3.

#include <cstdio>

#include "dgw/dgw.hpp"

int main() {
  const auto law = dgw::OffspringLaw::finite({0.45, 0.0, 0.45});
  const auto env = dgw::Environment::constant(law);

  std::printf("defect %.2f, fixed point %.6f\n", law.defect(), dgw::fixed_point(law).value());
  std::printf("%3s %12s %12s %12s %12s\n", "n", "P[ext]", "P[Delta]", "P[survive]", "E[Z_n]");
  for (std::size_t n : {1, 2, 5, 10, 20}) {
    const auto a = dgw::absorption_profile(env, n);
    std::printf("%3zu %12.6g %12.6g %12.6g %12.6g\n", n, a.p_ext, a.p_delta, a.survival, dgw::moments(env, n).mean);
  }

  const auto mc = dgw::monte_carlo(env, 5, 100'000, dgw::Mode::Direct, 42);
  std::printf("simulated P[survive 5] = %.4f +- %.4f\n", mc.survival.value, mc.survival.se);

  dgw::RandomStream rng(7);
  const auto t = dgw::sample_conditioned(env, 3, rng);
  std::printf("conditioned tree (label,children):\n%s", dgw::serialize(t.tree).c_str());
}
