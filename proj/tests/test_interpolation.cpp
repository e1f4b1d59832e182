#include "test_sets.hpp"

#include <gtest/gtest.h>

using namespace lipfree;

namespace {

Hypercube random_cube(Rng& rng, int N) {
  Hypercube C;
  C.w = rng.in_box({Vec::Constant(N, -2.0), Vec::Constant(N, 2.0)});
  C.delta = rng.uniform(0.01, 1.0);
  return C;
}

Vec point_in(Rng& rng, const Hypercube& C) {
  Vec x = C.w;
  for (int i = 0; i < C.dim(); ++i) x[i] += C.delta * rng.uniform();
  return x;
}

std::vector<double> vertex_values(const Hypercube& C, const std::function<double(const Vec&)>& f) {
  std::vector<double> v(C.vertex_count());
  for (int g = 0; g < C.vertex_count(); ++g) v[g] = f(C.vertex(g));
  return v;
}

/// sum over subsets S of c_S prod_{i in S} x_i
std::function<double(const Vec&)> random_multilinear(Rng& rng, int N) {
  std::vector<double> c(1u << N);
  for (auto& v : c) v = rng.uniform(-1, 1);
  return [c, N](const Vec& x) {
    double s = 0.0;
    for (unsigned S = 0; S < c.size(); ++S) {
      double p = c[S];
      for (int i = 0; i < N; ++i)
        if (S >> i & 1u) p *= x[i];
      s += p;
    }
    return s;
  };
}

Mesh interval_mesh() { return build_mesh(Box(make_vec({-0.1}), make_vec({1.1})), 0.05, 0.01, make_vec({0.003})); }

}  // namespace

TEST(Lambda, HandEvaluatedValues) {
  Hypercube sq{make_vec({0.0, 0.0}), 1.0};
  // vertices (0,0), (1,0), (0,1), (1,1)
  std::vector<double> vals{0.0, 1.0, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(lambda_eval(vals, sq, make_vec({0.5, 0.5})), 1.75);
  EXPECT_DOUBLE_EQ(lambda_eval(vals, sq, make_vec({1.0, 0.0})), 1.0);
  EXPECT_DOUBLE_EQ(lambda_eval(vals, sq, make_vec({0.25, 1.0})), 2.5);
  Hypercube seg{make_vec({2.0}), 0.5};
  EXPECT_DOUBLE_EQ(lambda_eval({1.0, 3.0}, seg, make_vec({2.125})), 1.5);
  EXPECT_THROW(lambda_eval({1.0, 3.0}, seg, make_vec({2.6})), Error);
  EXPECT_THROW(lambda_eval({1.0}, seg, make_vec({2.1})), Error);
}

TEST(Lambda, GradientOfCoordinateSum) {
  for (int N = 1; N <= 4; ++N) {
    Hypercube C{Vec::Constant(N, 0.3), 0.2};
    auto vals = vertex_values(C, [](const Vec& x) { return x.sum(); });
    Rng rng(N);
    for (int t = 0; t < 10; ++t) EXPECT_LE((lambda_grad(vals, C, point_in(rng, C)) - Vec::Ones(N)).norm(), 1e-12);
  }
}

TEST(Lambda, ReproducesMultilinearFunctions) {
  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const int N = 1 + t % 4;
    auto f = random_multilinear(rng, N);
    auto C = random_cube(rng, N);
    auto vals = vertex_values(C, f);
    for (int s = 0; s < 10; ++s) {
      Vec x = point_in(rng, C);
      EXPECT_NEAR(lambda_eval(vals, C, x), f(x), 1e-12 * std::max(1.0, std::abs(f(x))));
    }
  }
}

TEST(Lambda, MatchesRecursiveOracle) {
  Rng rng(22);
  for (int t = 0; t < 1000; ++t) {
    const int N = 1 + t % 4;
    auto C = random_cube(rng, N);
    std::vector<double> vals(C.vertex_count());
    for (auto& v : vals) v = rng.uniform(-5, 5);
    Vec x = point_in(rng, C);
    EXPECT_NEAR(lambda_eval(vals, C, x), recursive_interp(vals, C, x), 1e-12);
  }
}

TEST(Lambda, GradientMatchesFiniteDifferences) {
  Rng rng(23);
  for (int t = 0; t < 40; ++t) {
    const int N = 1 + t % 4;
    auto C = random_cube(rng, N);
    std::vector<double> vals(C.vertex_count());
    for (auto& v : vals) v = rng.uniform(-1, 1);
    Vec x = C.w + Vec::Constant(N, 0.5 * C.delta) + 0.3 * C.delta * rng.unit_vector(N);
    const double h = 1e-7 * C.delta;
    Vec fd(N);
    for (int i = 0; i < N; ++i) fd[i] = (lambda_eval(vals, C, x + h * unit(N, i)) - lambda_eval(vals, C, x - h * unit(N, i))) / (2 * h);
    EXPECT_LE((lambda_grad(vals, C, x) - fd).norm(), 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST(Lambda, WeightsAreNonnegativeAndSumToOne) {
  Rng rng(24);
  for (int N = 1; N <= 4; ++N)
    for (int t = 0; t < 200; ++t) {
      double tt[kMaxDim], w[1 << kMaxDim];
      for (int i = 0; i < N; ++i) tt[i] = rng.uniform();
      multilinear_weights(tt, N, w);
      double s = 0.0;
      for (int g = 0; g < (1 << N); ++g) {
        EXPECT_GE(w[g], 0.0);
        s += w[g];
      }
      EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Mesh, IntervalExample) {
  // Mhat = [-0.1, 1.1], r = 0.05: cubes meeting Mhat(0.1) = (0, 1) on the lattice 0.003 + 0.01 Z
  auto mesh = interval_mesh();
  EXPECT_EQ(mesh.cube_count(), 101u);
  EXPECT_EQ(mesh.vertex_count(), 102u);
  EXPECT_TRUE(mesh.has_cube({-1}));
  EXPECT_TRUE(mesh.has_cube({99}));
  EXPECT_FALSE(mesh.has_cube({-2}));
  EXPECT_FALSE(mesh.has_cube({100}));
  mesh.for_each_cube([&](const Lattice& k) {
    auto C = mesh.cube(k);
    EXPECT_GT(C.w[0], -0.05);
    EXPECT_LT(C.w[0] + C.delta, 1.05);
  });
}

TEST(Mesh, DiskVertexCountTracksArea) {
  const double delta = 0.02;
  auto mesh = build_mesh(Ball(make_vec({0.0, 0.0}), 1.1), 0.05, delta, make_vec({0.0, 0.0}));
  // cubes meet the unit disk Mhat(0.1)
  const double expected = std::numbers::pi / (delta * delta);
  EXPECT_NEAR(static_cast<double>(mesh.vertex_count()), expected, 0.2 * expected);
  EXPECT_GT(mesh.vertex_count(), mesh.cube_count());
}

TEST(Mesh, EmptyWhenErosionIsEmpty) {
  auto mesh = build_mesh(Ball(make_vec({0.0, 0.0}), 0.1), 0.1, 0.01, make_vec({0.0, 0.0}));
  EXPECT_EQ(mesh.cube_count(), 0u);
  VertexTable table(mesh, 1, [](const Vec&, double* out) { out[0] = 1.0; });
  EXPECT_THROW(table.eval(make_vec({0.0, 0.0})), Error);
}

TEST(Mesh, RejectsDeltaTooLargeForR) {
  EXPECT_THROW(build_mesh(Box(make_vec({0.0, 0.0}), make_vec({1.0, 1.0})), 0.1, 0.5, make_vec({0.0, 0.0})), Error);
  EXPECT_THROW(build_mesh(Box(make_vec({0.0}), make_vec({1.0})), 0.1, 0.0, make_vec({0.0})), Error);
}

TEST(Mesh, LocateTieBreakIsLexicographic) {
  auto mesh = interval_mesh();
  // x = 0.053 is the vertex shared by cubes 4 and 5
  EXPECT_EQ((*mesh.locate(make_vec({0.053})))[0], 4);
  EXPECT_EQ((*mesh.locate(make_vec({0.0531})))[0], 5);
  EXPECT_FALSE(mesh.locate(make_vec({-0.5})).has_value());
  auto sq = build_mesh(Box(make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})), 0.1, 0.05, make_vec({0.0, 0.0}));
  auto k = sq.locate(make_vec({0.5, 0.5}));
  ASSERT_TRUE(k.has_value());
  EXPECT_EQ((*k)[0], 9);
  EXPECT_EQ((*k)[1], 9);
}

TEST(Mesh, FaceConsistency) {
  auto mesh = build_mesh(Box(make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})), 0.1, 0.05, make_vec({0.0, 0.0}));
  VertexTable table(mesh, 1, [](const Vec& v, double* out) { out[0] = std::sin(3 * v[0]) * std::cos(2 * v[1]); });
  Rng rng(25);
  int checked = 0;
  mesh.for_each_cube([&](const Lattice& k) {
    for (int axis = 0; axis < 2; ++axis) {
      Lattice k2 = k;
      k2[axis] += 1;
      if (!mesh.has_cube(k2)) continue;
      auto fc = face_consistency_check(table, k, axis, rng);
      EXPECT_TRUE(fc.pass) << fc.worst;
      ++checked;
    }
  });
  EXPECT_GT(checked, 100);
}

TEST(Hats, HandEvaluatedValues) {
  auto mesh = interval_mesh();
  EXPECT_NEAR(hat_eval(mesh, make_vec({0.053}), {5}), 1.0, 1e-12);
  EXPECT_NEAR(hat_eval(mesh, make_vec({0.058}), {5}), 0.5, 1e-12);
  EXPECT_NEAR(hat_eval(mesh, make_vec({0.058}), {6}), 0.5, 1e-12);
  EXPECT_EQ(hat_eval(mesh, make_vec({0.058}), {7}), 0.0);
  EXPECT_NEAR(hat_eval(mesh, make_vec({0.0505}), {5}), 0.75, 1e-12);
}

TEST(Hats, SumToOne) {
  auto mesh = build_mesh(Box(make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})), 0.1, 0.05, make_vec({0.0, 0.0}));
  Rng rng(26);
  for (int t = 0; t < 500; ++t) {
    Vec x = rng.in_box({make_vec({0.1, 0.1}), make_vec({0.9, 0.9})});
    double s = 0.0;
    for (const auto& [v, w] : hat_weights(mesh, x)) {
      EXPECT_GT(w, 0.0);
      EXPECT_NEAR(w, hat_eval(mesh, x, v), 1e-15);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(Hats, InterpolantIsHatExpansionOfCoefficients) {
  auto mesh = build_mesh(Box(make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})), 0.1, 0.05, make_vec({0.0, 0.0}));
  auto f = [](const Vec& v) { return std::exp(v[0]) - v[1] * v[1]; };
  VertexTable table(mesh, 1, [&](const Vec& v, double* out) { out[0] = f(v); });
  table.fill_all();
  EXPECT_EQ(table.computed(), mesh.vertex_count());
  Rng rng(27);
  for (int t = 0; t < 300; ++t) {
    Vec x = rng.in_box({make_vec({0.1, 0.1}), make_vec({0.9, 0.9})});
    double s = 0.0;
    for (const auto& [v, w] : hat_weights(mesh, x)) s += w * f(mesh.point(v));
    EXPECT_NEAR(table.eval(x), s, 1e-13);
  }
  // vertex values are reproduced
  mesh.for_each_vertex([&](const Lattice& v) {
    Vec p = mesh.point(v);
    if (mesh.locate(p)) {
      EXPECT_NEAR(table.eval(p), f(p), 1e-13);
    }
  });
}

TEST(BoundsCheck, AffineInputIsExact) {
  auto mesh = build_mesh(Box(make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})), 0.1, 0.05, make_vec({0.0, 0.0}));
  const Norm l1 = Norm::lp(2, 1.0);
  const Vec g = make_vec({0.4, -0.9});
  auto f = [g](const Vec& x) { return g.dot(x) + 0.25; };
  VertexTable table(mesh, 1, [&](const Vec& v, double* out) { out[0] = f(v); });
  std::vector<Lattice> cubes;
  mesh.for_each_cube([&](const Lattice& k) { cubes.push_back(k); });
  Rng rng(28);
  auto rep = interp_bounds_check(table, f, cubes, 0.0, l1.dual(g), l1, 1e-12, rng);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.gap_measured, 1e-13);
  EXPECT_NEAR(rep.lip_measured, 0.9, 1e-9);
}

TEST(BoundsCheck, SmoothedMaxAffineUnderL1) {
  // under l1 each partial derivative of Lambda is an average of difference quotients,
  // so per-cube Lip(Lambda(g)) <= Lip(g)
  auto mesh = build_mesh(Box(make_vec({-0.1, -0.1}), make_vec({1.1, 1.1})), 0.1, 0.02, make_vec({0.0, 0.0}));
  const Norm l1 = Norm::lp(2, 1.0);
  Rng rng(29);
  for (int t = 0; t < 5; ++t) {
    std::vector<Vec> gs;
    double lip = 0.0;
    for (int j = 0; j < 4; ++j) {
      gs.push_back(make_vec({rng.uniform(-1, 1), rng.uniform(-1, 1)}));
      lip = std::max(lip, l1.dual(gs.back()));
    }
    ScalarFn f = [gs](const Vec& x) {
      double m = -1e300;
      for (const auto& g : gs) m = std::max(m, g.dot(x));
      return m;
    };
    auto sm = std::make_shared<Smoother>(2, 0.1, 25, Vec::Zero(2));
    SmoothedFunction sf(f, sm, Vec::Zero(2));
    const double lip_g = lip * (1.0 + 1e-3) + sm->quad_slack(l1.K());
    VertexTable table(mesh, 1, [&](const Vec& v, double* out) { out[0] = sf(v); });
    std::vector<Lattice> cubes;
    mesh.for_each_cube([&](const Lattice& k) {
      if (cubes.size() < 400 && rng.uniform() < 0.3) cubes.push_back(k);
    });
    auto rep = interp_bounds_check(table, [&](const Vec& x) { return sf(x); }, cubes, 0.0, lip_g, l1, 1e-6, rng);
    EXPECT_TRUE(rep.pass) << "Lip " << rep.lip_measured << " vs " << rep.lip_bound << ", gap " << rep.gap_measured << " vs " << rep.gap_bound;
  }
}
