#include "test_sets.hpp"

#include <gtest/gtest.h>

using namespace lipfree;

namespace {

std::vector<Norm> all_norms(int N) {
  std::vector<Norm> out{Norm::lp(N, 1.0), Norm::lp(N, 2.0), Norm::lp(N, 3.0), Norm::lp(N, std::numeric_limits<double>::infinity()),
                        Norm::custom(N, "mix")};
  if (N == 2) out.push_back(Norm::custom(2, "hex"));
  return out;
}

}  // namespace

TEST(Norm, OneDimensionalConstantIsOne) {
  EXPECT_EQ(Norm::lp(1, 2.0).K(), 1.0);
  EXPECT_EQ(Norm::lp(1, 1.0).K(), 1.0);
  auto abs_norm = Norm::from_function(1, "abs", [](const Vec& x) { return std::abs(x[0]); });
  EXPECT_EQ(abs_norm.K(), 1.0);
}

TEST(Norm, PlaneConstantsAreSqrtTwo) {
  const double s2 = std::sqrt(2.0);
  EXPECT_NEAR(Norm::lp(2, 2.0).K(), s2, 1e-15);
  EXPECT_NEAR(Norm::lp(2, 1.0).K(), s2, 1e-15);
  // sampled constants land between the exact value and the 1.01 cap
  auto l2 = Norm::from_function(2, "l2s", [](const Vec& x) { return x.norm(); });
  auto l1 = Norm::from_function(2, "l1s", [](const Vec& x) { return x.lpNorm<1>(); });
  for (const auto& nm : {l2, l1}) {
    EXPECT_GE(nm.K(), s2 * (1.0 - 1e-6));
    EXPECT_LE(nm.K(), s2 * 1.01 + 1e-12);
  }
}

TEST(Norm, DegenerateEvaluatorRejected) {
  EXPECT_THROW(Norm::from_function(2, "bad", [](const Vec& x) { return std::abs(x[0]); }), Error);
  EXPECT_THROW(Norm::lp(2, 0.5), Error);
  EXPECT_THROW(Norm::custom(3, "hex"), Error);
}

TEST(Norm, HomogeneityAndTriangleOnRandomPairs) {
  Rng rng(11);
  for (int N = 1; N <= 4; ++N)
    for (const auto& nm : all_norms(N))
      for (int t = 0; t < 10000 / 5; ++t) {
        Vec x(N), y(N);
        for (int i = 0; i < N; ++i) x[i] = rng.uniform(-3, 3), y[i] = rng.uniform(-3, 3);
        const double a = rng.uniform(-4, 4);
        EXPECT_NEAR(nm(a * x), std::abs(a) * nm(x), 1e-12 * (1.0 + std::abs(a) * nm(x)));
        EXPECT_LE(nm(x + y), nm(x) + nm(y) + 1e-12);
      }
}

TEST(Norm, EquivalenceConstantBoundsAllFourComparisons) {
  Rng rng(5);
  for (int N = 1; N <= 4; ++N)
    for (const auto& nm : all_norms(N)) {
      const double K = nm.K();
      for (int t = 0; t < 2000; ++t) {
        Vec x = rng.unit_vector(N) * rng.uniform(0.1, 5.0);
        const double v = nm(x);
        EXPECT_LE(v, K * x.lpNorm<1>() * (1 + 1e-12)) << nm.name();
        EXPECT_LE(v, K * x.norm() * (1 + 1e-12)) << nm.name();
        EXPECT_LE(x.lpNorm<1>(), K * v * (1 + 1e-12)) << nm.name();
        EXPECT_LE(x.norm(), K * v * (1 + 1e-12)) << nm.name();
      }
    }
}

TEST(Norm, DualBoundsPairing) {
  Rng rng(9);
  for (int N = 1; N <= 3; ++N)
    for (const auto& nm : all_norms(N))
      for (int t = 0; t < 500; ++t) {
        Vec g = rng.unit_vector(N) * rng.uniform(0.1, 3.0);
        Vec x = rng.unit_vector(N) * rng.uniform(0.1, 3.0);
        EXPECT_LE(std::abs(g.dot(x)), nm.dual(g) * nm(x) * (1 + 1e-9)) << nm.name();
      }
  // exact duals of the p-norms
  Vec g = make_vec({3.0, -4.0});
  EXPECT_DOUBLE_EQ(Norm::lp(2, 1.0).dual(g), 4.0);
  EXPECT_DOUBLE_EQ(Norm::lp(2, 2.0).dual(g), 5.0);
  EXPECT_DOUBLE_EQ(Norm::lp(2, std::numeric_limits<double>::infinity()).dual(g), 7.0);
}

TEST(Norm, ExactLpConstants) {
  EXPECT_NEAR(lp_equivalence_constant(3, 2.0), std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(lp_equivalence_constant(4, std::numeric_limits<double>::infinity()), 4.0, 1e-15);
  EXPECT_NEAR(lp_equivalence_constant(2, 1.0), std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(conjugate_exponent(2.0), 2.0);
  EXPECT_DOUBLE_EQ(conjugate_exponent(4.0), 4.0 / 3.0);
}
