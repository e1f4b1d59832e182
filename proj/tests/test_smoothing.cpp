#include "test_sets.hpp"

#include <gtest/gtest.h>

using namespace lipfree;
namespace ts = lipfree::testsets;

namespace {

// A_N normalizing exp(1/(|x|^2 - 1)) on the unit ball, from a 30-digit mpmath quadrature
constexpr double kA1 = 2.25228362104358101;
constexpr double kA2 = 2.14356577579223660;
constexpr double kA3 = 2.26711673960832646;

// integral of |y| eta_1(y) dy in one dimension
constexpr double kFirstMoment1 = 0.334453997709975330;

std::shared_ptr<Smoother> make_smoother(int N, double r, int nodes, const Vec& x0) { return std::make_shared<Smoother>(N, r, nodes, x0); }

ScalarFn max_affine(Rng& rng, int N, int pieces) {
  std::vector<Vec> g;
  std::vector<double> c;
  for (int j = 0; j < pieces; ++j) {
    // dual l2 norm at most 1 keeps Lip <= 1 under l2
    g.push_back(rng.unit_vector(N) * rng.uniform(0.2, 1.0));
    c.push_back(rng.uniform(-0.5, 0.5));
  }
  return [g, c](const Vec& x) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.size(); ++j) m = std::max(m, g[j].dot(x) + c[j]);
    return m;
  };
}

}  // namespace

TEST(Mollifier, NormalizationMatchesReferenceConstants) {
  const double ref[] = {kA1, kA2, kA3};
  for (int N = 1; N <= 3; ++N) EXPECT_NEAR(mollifier_constant(N), ref[N - 1], 1e-8 * ref[N - 1]) << "N = " << N;
}

TEST(Mollifier, IntegratesToOne) {
  for (int N = 1; N <= 2; ++N) {
    Smoother sm(N, 0.3, 400, Vec::Zero(N));
    EXPECT_NEAR(sm.weight_sum(Vec::Constant(N, 0.0123)), 1.0, 1e-8);
  }
}

TEST(Mollifier, SupportAndGradient) {
  Mollifier eta(2, 0.5);
  EXPECT_EQ(eta(make_vec({0.5, 0.0})), 0.0);
  EXPECT_EQ(eta(make_vec({0.4, 0.4})), 0.0);
  EXPECT_GT(eta(make_vec({0.1, 0.1})), 0.0);
  Vec x = make_vec({0.12, -0.2});
  const double h = 1e-6;
  Vec fd(2);
  for (int i = 0; i < 2; ++i) fd[i] = (eta(x + h * unit(2, i)) - eta(x - h * unit(2, i))) / (2 * h);
  EXPECT_LE((eta.grad(x) - fd).norm(), 1e-6 * fd.norm());
}

TEST(Convolution, ReproducesConstantsAndAffineFunctions) {
  for (int N = 1; N <= 3; ++N) {
    Vec x0 = Vec::Zero(N);
    Smoother sm(N, 0.2, default_quad_nodes(N), x0);
    Rng rng(N);
    Vec g = rng.unit_vector(N);
    for (int t = 0; t < 20; ++t) {
      Vec x = rng.in_box({Vec::Constant(N, -1.0), Vec::Constant(N, 1.0)});
      EXPECT_NEAR(sm.average([](const Vec&) { return 3.5; }, x), 3.5, 1e-12);
      // exact on constants; affine inputs see the first-moment defect D, which vanishes on lattice
      // nodes, so |D| <= (sqrt(N) h / 2) sup |J_D| = (sqrt(N) h / 2) (slack / 2)
      const double defect = 0.25 * std::sqrt(double(N)) * sm.h() * sm.quad_slack(1.0);
      EXPECT_NEAR(sm.average([&](const Vec& z) { return g.dot(z) + 1.0; }, x), g.dot(x) + 1.0, defect + 1e-12);
    }
  }
}

TEST(Convolution, AbsoluteValueAtOriginMatchesFirstMoment) {
  const double r = 0.1;
  const double v = convolve([](const Vec& z) { return std::abs(z[0]); }, r, make_vec({0.0}), make_vec({0.0}), 20000);
  EXPECT_NEAR(v, kFirstMoment1 * r, 1e-8);
}

TEST(Smoothed, VanishesAtBasePoint) {
  auto M = ts::square();
  auto sf = smooth([](const Vec& x) { return std::sin(3 * x[0]) + x[1]; }, make_smoother(2, 0.1, 25, M.x0), M.x0);
  EXPECT_EQ(sf(M.x0), 0.0);
}

TEST(Smoothed, GradientOfAffineInput) {
  const Vec g = make_vec({0.3, -0.7});
  auto sf = smooth([g](const Vec& x) { return g.dot(x); }, make_smoother(2, 0.1, 25, Vec::Zero(2)), Vec::Zero(2));
  Rng rng(3);
  const double slack = sf.smoother().quad_slack(1.0);
  for (int t = 0; t < 20; ++t) {
    Vec x = rng.in_box({make_vec({0, 0}), make_vec({1, 1})});
    EXPECT_LE((sf.grad(x) - g).norm(), g.norm() * slack);
  }
}

TEST(Smoothed, GradientAcrossCreaseMatchesFiniteDifferences) {
  auto sf = smooth([](const Vec& x) { return std::abs(x[0] - 0.5) + 0.5 * std::abs(x[1]); }, make_smoother(2, 0.1, 25, Vec::Zero(2)),
                   Vec::Zero(2));
  const double h = 1e-6;
  for (const Vec& x : {make_vec({0.5, 0.3}), make_vec({0.47, 0.02}), make_vec({0.55, -0.05})}) {
    Vec fd(2);
    for (int i = 0; i < 2; ++i) fd[i] = (sf(x + h * unit(2, i)) - sf(x - h * unit(2, i))) / (2 * h);
    EXPECT_LE((sf.grad(x) - fd).norm(), 1e-5) << x.transpose();
  }
}

TEST(Smoothed, IsLinearInTheInput) {
  Rng rng(4);
  auto f = max_affine(rng, 2, 5);
  auto g = max_affine(rng, 2, 3);
  auto sm = make_smoother(2, 0.15, 25, Vec::Zero(2));
  auto sf = smooth(f, sm, Vec::Zero(2));
  auto sg = smooth(g, sm, Vec::Zero(2));
  auto sh = smooth([&](const Vec& x) { return 2.0 * f(x) - 3.0 * g(x); }, sm, Vec::Zero(2));
  for (int t = 0; t < 50; ++t) {
    Vec x = rng.in_box({make_vec({-1, -1}), make_vec({1, 1})});
    EXPECT_NEAR(sh(x), 2.0 * sf(x) - 3.0 * sg(x), 1e-10);
  }
}

TEST(Smoothed, GradientMatchesFiniteDifferencesOnRandomInputs) {
  Rng rng(5);
  for (int N = 1; N <= 3; ++N)
    for (int t = 0; t < 10; ++t) {
      auto f = max_affine(rng, N, 4);
      auto sf = smooth(f, make_smoother(N, 0.2, default_quad_nodes(N), Vec::Zero(N)), Vec::Zero(N));
      Vec x = rng.in_box({Vec::Constant(N, -0.5), Vec::Constant(N, 0.5)});
      const double h = 1e-6;
      Vec fd(N);
      for (int i = 0; i < N; ++i) fd[i] = (sf(x + h * unit(N, i)) - sf(x - h * unit(N, i))) / (2 * h);
      EXPECT_LE((sf.grad(x) - fd).norm(), 1e-4 * std::max(1.0, fd.norm()));
    }
}

TEST(BoundsCheck, ZeroFunction) {
  auto M = ts::square();
  auto sf = smooth([](const Vec&) { return 0.0; }, make_smoother(2, 0.1, 25, M.x0), M.x0);
  auto pts = detail::thin_evenly(M.interior_samples, 200);
  auto rep = smoothing_bounds_check(sf, pts, Norm::lp(2, 2.0), 1.0);
  EXPECT_EQ(rep.worst_gap, 0.0);
  EXPECT_EQ(rep.lip_smoothed, 0.0);
  EXPECT_TRUE(rep.pass());
}

TEST(BoundsCheck, DiskDistanceAtSmallRadius) {
  auto M = ts::disk();
  const Norm l2 = Norm::lp(2, 2.0);
  const Vec p = make_vec({0.3, 0.1});
  auto sf = smooth([p](const Vec& x) { return (x - p).norm(); }, make_smoother(2, 0.05, 25, M.x0), M.x0);
  std::vector<Vec> pts;
  for (const auto& q : detail::thin_evenly(M.all_samples(), 400))
    if (M.clearance(q) > 0.05) pts.push_back(q);
  auto rep = smoothing_bounds_check(sf, pts, l2, 1.0);
  EXPECT_TRUE(rep.pass()) << rep.worst_gap << " vs " << rep.gap_bound;
}

TEST(BoundsCheck, RandomMaxAffineFunctions) {
  auto M = ts::square();
  const Norm l1 = Norm::lp(2, 1.0);
  auto pts = detail::thin_evenly(M.interior_samples, 150);
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    auto sf = smooth(max_affine(rng, 2, 2 + t % 5), make_smoother(2, 0.1, 25, M.x0), M.x0);
    auto rep = smoothing_bounds_check(sf, pts, l1);
    EXPECT_TRUE(rep.pass()) << "function " << t << ": gap " << rep.worst_gap << " vs " << rep.gap_bound << ", Lip " << rep.lip_smoothed
                            << " vs " << rep.lip_input;
  }
}

TEST(Modulus, HugeTargetGivesFullRadius) {
  auto dm = differentiability_modulus(2, 0.1, 1e12, Bounds{make_vec({0, 0}), make_vec({1, 1})}, std::sqrt(2.0));
  EXPECT_NEAR(dm.delta, 0.1, 1e-15);
  EXPECT_FALSE(dm.warning);
  for (std::size_t j = 1; j < dm.table_omega.size(); ++j) EXPECT_GE(dm.table_omega[j], dm.table_omega[j - 1]);
}

TEST(Modulus, OmegaScalesWithRadius) {
  // D eta_r(x) = r^{-N-1} D eta_1(x / r)
  for (int N = 1; N <= 3; ++N) {
    const double a = omega_measure(N, 1.0, 0.1);
    const double b = omega_measure(N, 0.5, 0.05);
    EXPECT_NEAR(b, a * std::pow(2.0, N + 1), 0.02 * b);
  }
}

TEST(Modulus, ResidualBelowTargetAtFirstIndex) {
  const double K = std::sqrt(2.0);
  const double r = 0.45;
  const double eps = 1.0 / (3.0 * K * K);
  Bounds bb{make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})};
  auto dm = differentiability_modulus(2, r, eps, bb, K);
  Rng rng(7);
  auto f = max_affine(rng, 2, 6);
  auto sf = smooth(f, make_smoother(2, r, 25, Vec::Zero(2)), Vec::Zero(2));
  std::vector<std::pair<Vec, Vec>> probes;
  for (int t = 0; t < 300; ++t) probes.push_back({rng.in_box(bb), rng.unit_vector(2) * dm.delta * rng.uniform(0.1, 1.0)});
  const double res = uniform_residual([&](const Vec& x) { return sf(x); }, [&](const Vec& x) { return sf.grad(x); }, probes, Norm::lp(2, 2.0));
  EXPECT_LE(res, eps);
}
