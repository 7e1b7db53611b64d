#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>

#include "dgw/offspring.hpp"
#include "oracles.hpp"

using dgw::OffspringLaw;

namespace {

OffspringLaw law_a() { return OffspringLaw::finite({0.45, 0.0, 0.45}); }
OffspringLaw law_b() { return OffspringLaw::linear_fractional(0.1, 0.4, 0.5); }

std::vector<OffspringLaw> assorted_laws() {
  return {law_a(),
          law_b(),
          OffspringLaw::identity(),
          OffspringLaw::finite({0.2, 0.3, 0.1, 0.25}),
          OffspringLaw::finite({0.0, 0.5, 0.0, 0.0, 0.3}),
          OffspringLaw::linear_fractional(0.0, 0.3, 0.7),
          OffspringLaw::linear_fractional(0.25, 0.5, 0.2)};
}

}  // namespace

TEST(Eval, LawAAtOne) { EXPECT_NEAR(dgw::eval(law_a(), 1.0, 0), 0.9, 1e-15); }

TEST(Eval, IdentityLaw) { EXPECT_DOUBLE_EQ(dgw::eval(OffspringLaw::identity(), 0.37, 0), 0.37); }

TEST(Eval, LawBDerivativeMatchesFiniteDifference) {
  const auto b = law_b();
  const double fd = (dgw::eval(b, 1.0, 0) - dgw::eval(b, 1.0 - 1e-6, 0)) / 1e-6;
  EXPECT_NEAR(dgw::eval(b, 1.0, 1), 0.8, 1e-14);
  EXPECT_NEAR(fd, 0.8, 1e-4);
}

TEST(Eval, RejectsBadArguments) {
  EXPECT_THROW(dgw::eval(law_a(), 1.5, 0), std::invalid_argument);
  EXPECT_THROW(dgw::eval(law_a(), -0.1, 0), std::invalid_argument);
  EXPECT_THROW(dgw::eval(law_a(), 0.5, 3), std::invalid_argument);
}

TEST(Eval, DerivativesMatchFiniteDifferences) {
  for (const auto& f : assorted_laws()) {
    auto v = [&](double s) { return f.value(s); };
    auto d1 = [&](double s) { return f.first_derivative(s); };
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      // one-sided at the ends of [0, 1]
      const double h = 1e-6;
      const double fd1 = s == 0.0 ? (v(h) - v(0.0)) / h : s == 1.0 ? (v(1.0) - v(1.0 - h)) / h : oracle::central_difference(v, s, h);
      const double fd2 =
          s == 0.0 ? (d1(h) - d1(0.0)) / h : s == 1.0 ? (d1(1.0) - d1(1.0 - h)) / h : oracle::central_difference(d1, s, h);
      EXPECT_NEAR(dgw::eval(f, s, 1), fd1, 1e-4) << "s=" << s;
      EXPECT_NEAR(dgw::eval(f, s, 2), fd2, 1e-4) << "s=" << s;
    }
  }
}

TEST(Eval, NondecreasingAndConvex) {
  for (const auto& f : assorted_laws()) {
    EXPECT_DOUBLE_EQ(f.value(0.0), f.mass(0));
    for (int i = 0; i < 100; ++i) {
      const double s = i / 100.0;
      EXPECT_GE(f.first_derivative(s), 0.0);
      EXPECT_GE(f.second_derivative(s), 0.0);
    }
  }
}

TEST(Construction, RejectsInvalidLaws) {
  EXPECT_THROW(OffspringLaw::finite({0.6, 0.6}), std::invalid_argument);
  EXPECT_THROW(OffspringLaw::finite({-0.1, 0.5}), std::invalid_argument);
  EXPECT_THROW(OffspringLaw::finite({0.5}), std::invalid_argument);  // f'(1) = 0
  EXPECT_THROW(OffspringLaw::finite({}), std::invalid_argument);
  EXPECT_THROW(OffspringLaw::linear_fractional(0.1, 0.4, 1.0), std::invalid_argument);
  EXPECT_THROW(OffspringLaw::linear_fractional(0.1, 0.0, 0.5), std::invalid_argument);
  EXPECT_THROW(OffspringLaw::linear_fractional(0.5, 0.4, 0.5), std::invalid_argument);  // f(1) = 1.3
}

TEST(Defect, Examples) {
  EXPECT_NEAR(dgw::defect(law_a()), 0.1, 1e-15);
  EXPECT_EQ(dgw::defect(OffspringLaw::identity()), 0.0);
  EXPECT_NEAR(dgw::defect(law_b()), 0.1, 1e-15);
}

TEST(Normalize, Examples) {
  const auto ga = dgw::normalize(law_a());
  EXPECT_NEAR(ga.mass(0), 0.5, 1e-15);
  EXPECT_NEAR(ga.mass(2), 0.5, 1e-15);
  const auto id = dgw::normalize(OffspringLaw::identity());
  EXPECT_EQ(id.mass(1), 1.0);
  const auto gb = dgw::normalize(law_b());
  ASSERT_EQ(gb.kind(), dgw::LawKind::LinearFractional);
  EXPECT_NEAR(gb.lf_params().q, 1.0 / 9.0, 1e-15);
  EXPECT_NEAR(gb.lf_params().r, 4.0 / 9.0, 1e-15);
  EXPECT_EQ(gb.lf_params().p, 0.5);
  EXPECT_NEAR(gb.value(1.0), 1.0, 1e-15);
}

TEST(Normalize, ScalesEvaluations) {
  for (const auto& f : assorted_laws()) {
    const auto g = dgw::normalize(f);
    EXPECT_LE(std::abs(dgw::defect(g)), 1e-15);
    for (double s : {0.0, 0.1, 0.5, 0.9, 1.0}) EXPECT_NEAR(g.value(s) * f.value(1.0), f.value(s), 1e-14);
  }
}

TEST(FixedPoint, Examples) {
  EXPECT_NEAR(*dgw::fixed_point(law_a()), 0.626789, 1e-6);
  EXPECT_NEAR(*dgw::fixed_point(law_b()), 0.729844, 1e-6);
  EXPECT_FALSE(dgw::fixed_point(OffspringLaw::identity()).has_value());
  EXPECT_FALSE(dgw::fixed_point_bisection(OffspringLaw::identity()).has_value());
}

TEST(FixedPoint, MatchesIndependentBisection) {
  for (const auto& f : {law_a(), law_b()}) {
    const double theta = *dgw::fixed_point(f);
    EXPECT_NEAR(theta, oracle::smallest_fixed_point([&](double s) { return f.value(s); }), 1e-10);
  }
}

TEST(FixedPoint, SmallestRootProperty) {
  for (const auto& f : {law_a(), law_b(), OffspringLaw::finite({0.2, 0.3, 0.1, 0.25})}) {
    const auto theta = dgw::fixed_point(f);
    ASSERT_TRUE(theta.has_value());
    EXPECT_LE(std::abs(f.value(*theta) - *theta), 1e-12);
    for (double s = 1e-4; s < *theta - 1e-4; s += 1e-4) EXPECT_GT(std::abs(f.value(s) - s), 1e-12);
  }
}

TEST(FixedPoint, ClosedFormAgreesWithBisectionOnRandomLaws) {
  dgw::RandomStream rng(314159);
  int binary = 0, lf = 0;
  while (binary + lf < 1200) {
    std::optional<OffspringLaw> f;
    if ((binary + lf) % 2 == 0) {
      const double p = rng.uniform(), q = rng.uniform() * (1.0 - p), r = rng.uniform() * (1.0 - p - q);
      if (p < 1e-3) continue;
      f = OffspringLaw::finite({r, q, p});
    } else {
      const double p = 0.01 + 0.98 * rng.uniform();
      const double r = rng.uniform() * (1.0 - p);
      const double q = rng.uniform() * (1.0 - r / (1.0 - p));
      if (r < 1e-3) continue;
      f = OffspringLaw::linear_fractional(q, r, p);
    }
    const auto closed = dgw::fixed_point(*f);
    const auto bisect = dgw::fixed_point_bisection(*f);
    ASSERT_EQ(closed.has_value(), bisect.has_value());
    if (closed) {
      EXPECT_NEAR(*closed, *bisect, 1e-10);
      (f->kind() == dgw::LawKind::FiniteSupport ? binary : lf)++;
    }
  }
}

TEST(Regularity, LawA) {
  const auto r = dgw::regularity(law_a(), 0);
  EXPECT_NEAR(r.m2_tail, 1.8, 1e-15);
  EXPECT_NEAR(r.m1_tail, 0.9, 1e-15);
  EXPECT_NEAR(r.cond_mean, 2.0, 1e-15);
  EXPECT_NEAR(r.c8, 1.0, 1e-15);
  EXPECT_NEAR(r.c12, 2.0, 1e-15);
}

TEST(Regularity, IdentityHasNoTail) {
  const auto r = dgw::regularity(OffspringLaw::identity(), 0);
  EXPECT_EQ(r.c8, 0.0);
  EXPECT_EQ(r.c12, 0.0);
}

TEST(Regularity, LawBMatchesDirectSeries) {
  double m1 = 0.0, m2 = 0.0;
  for (int k = 2; k <= 200; ++k) {
    const double mass = 0.4 * std::pow(0.5, k);  // f[k] = r p^k for k >= 1
    m1 += k * mass;
    m2 += static_cast<double>(k) * k * mass;
  }
  const auto r = dgw::regularity(law_b(), 200);
  EXPECT_NEAR(r.c12, m2 / m1, 1e-12 * (m2 / m1));
  EXPECT_THROW(dgw::regularity(law_b(), 10), std::invalid_argument);
}

TEST(Regularity, InvariantsOnAssortedLaws) {
  for (const auto& f : assorted_laws()) {
    const auto r = dgw::regularity(f, 400);
    EXPECT_GE(r.m2_tail, 2.0 * r.m1_tail - 1e-15);
    if (f.value(1.0) - f.mass(0) > 0) {
      EXPECT_GE(r.cond_mean, 1.0 - 1e-15);
    }
    EXPECT_LE(r.c8, r.c12 + 1e-15);
  }
}

TEST(Sample, IdentityAlwaysOne) {
  dgw::RandomStream rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(dgw::sample(OffspringLaw::identity(), rng), dgw::State{1});
}

TEST(Sample, LawAFrequencies) {
  constexpr std::size_t draws = 1'000'000;
  dgw::RandomStream rng(2024);
  std::size_t zero = 0, two = 0, delta = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto x = dgw::sample(law_a(), rng);
    if (x.is_graveyard()) ++delta;
    else if (x.count() == 0) ++zero;
    else if (x.count() == 2) ++two;
    else FAIL() << "impossible draw " << x;
  }
  for (auto [count, p] : std::array<std::pair<std::size_t, double>, 3>{{{zero, 0.45}, {two, 0.45}, {delta, 0.1}}})
    EXPECT_LE(std::abs(static_cast<double>(count) / draws - p), 4.0 * oracle::se(p, draws));
}

TEST(Sample, LawBGoodnessOfFit) {
  constexpr std::size_t draws = 400'000;
  dgw::RandomStream rng(99);
  std::map<std::uint64_t, std::size_t> counts;
  std::size_t delta = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto x = dgw::sample(law_b(), rng);
    x.is_graveyard() ? ++delta : ++counts[std::min<std::uint64_t>(x.count(), 8)];
  }
  const auto b = law_b();
  double chi2 = 0.0, tail = 1.0 - dgw::defect(b);
  for (std::uint64_t k = 0; k < 8; ++k) {
    const double e = b.mass(k) * draws;
    tail -= b.mass(k);
    chi2 += std::pow(counts[k] - e, 2) / e;
  }
  chi2 += std::pow(counts[8] - tail * draws, 2) / (tail * draws);
  chi2 += std::pow(delta - 0.1 * draws, 2) / (0.1 * draws);
  // 10 bins, 9 degrees of freedom; 27.88 is the 0.999 quantile
  EXPECT_LT(chi2, 27.88);
}

TEST(Sample, SumsRespectGraveyard) {
  dgw::RandomStream rng(5);
  const auto all_defect_heavy = OffspringLaw::finite({0.0, 0.01});
  EXPECT_TRUE(dgw::sample_sum(all_defect_heavy, 500, rng).is_graveyard());
  EXPECT_EQ(dgw::sample_sum(law_a(), 0, rng), dgw::State{0});
}

TEST(Sample, ProperSumMatchesMean) {
  dgw::RandomStream rng(17);
  const auto g = dgw::normalize(law_b());
  const std::uint64_t n = 200'000;
  const double x = static_cast<double>(dgw::sample_proper_sum(g, n, rng));
  const double mean = g.first_derivative(1.0), var = g.second_derivative(1.0) + mean - mean * mean;
  EXPECT_LE(std::abs(x - n * mean), 5.0 * std::sqrt(n * var));
}

TEST(State, GraveyardArithmetic) {
  using dgw::State;
  EXPECT_TRUE((State{3} + State::graveyard()).is_graveyard());
  EXPECT_TRUE((State::graveyard() + State{0}).is_graveyard());
  EXPECT_EQ(State{2} + State{5}, State{7});
  EXPECT_EQ(State::graveyard().to_string(), "D");
}
