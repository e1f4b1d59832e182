#pragma once

#include "enlargement.hpp"
#include "interpolation.hpp"
#include "smoothing.hpp"

#include <chrono>

namespace lipfree {

// ---------------------------------------------------------------------------------------------
// Schedule

struct Schedule {
  int n = 1;
  int N = 1;
  double K = 1.0;
  double xi = 0.5;
  /// target of the uniform differentiability condition, 1 / (3 n K^2)
  double eps = 0.0;
  double margin = 0.0;
  double r = 0.0;
  std::string r_bound;  // "n" or "margin"
  double delta_mesh = 0.0;
  double delta_modulus = 0.0;
  bool modulus_warning = false;
  double delta = 0.0;
  std::string delta_bound;  // "mesh", "modulus" or "empirical"
  bool empirical = false;
  double A_M = 0.0;
  /// measured residual constant of the uniform differentiability condition at the chosen delta
  double residual = -1.0;
};

inline double enlargement_xi(int n) { return 1.0 / (2.0 * n); }

/// Lattice cells a mesh of edge delta over the box would need.
inline double mesh_cells(const Bounds& b, double delta) {
  double c = 1.0;
  for (int i = 0; i < b.lo.size(); ++i) c *= (b.hi[i] - b.lo[i]) / delta + 3.0;
  return c;
}

/// r_n = min(0.9/(n+1), margin/(K/2 + 2)); delta_n = min(0.9 r_n / (2 sqrt(N) K (3n+1)), modulus delta).
/// The modulus delta is accepted only when the resulting mesh fits the cell cap; otherwise the
/// delta stays open (delta_bound "empirical") for resolve_empirical_delta.
inline Schedule make_schedule(int n, int N, double K, double margin, const Bounds& mhat_bbox, std::size_t cap = kMeshCellCap) {
  if (n < 1) throw Error("pipeline", "n must be positive");
  if (!(margin > 0.0)) throw Error("pipeline", "enlargement margin must be positive");
  Schedule s;
  s.n = n;
  s.N = N;
  s.K = K;
  s.xi = enlargement_xi(n);
  s.eps = 1.0 / (3.0 * n * K * K);
  s.margin = margin;
  const double rn = 0.9 / (n + 1.0);
  const double rm = margin / (0.5 * K + 2.0);
  s.r = std::min(rn, rm);
  s.r_bound = rn <= rm ? "n" : "margin";
  s.delta_mesh = 0.9 * s.r / (2.0 * std::sqrt(static_cast<double>(N)) * K * (3.0 * n + 1.0));
  auto dm = differentiability_modulus(N, s.r, s.eps, mhat_bbox, K);
  s.A_M = dm.A_M;
  s.delta_modulus = dm.delta;
  s.modulus_warning = dm.warning;
  if (!dm.warning && dm.delta >= s.delta_mesh) {
    s.delta = s.delta_mesh;
    s.delta_bound = "mesh";
  } else if (!dm.warning && mesh_cells(mhat_bbox, dm.delta) <= static_cast<double>(cap)) {
    s.delta = dm.delta;
    s.delta_bound = "modulus";
  } else {
    s.delta = s.delta_mesh;
    s.delta_bound = "empirical";
    s.empirical = true;
  }
  return s;
}

// ---------------------------------------------------------------------------------------------
// Q, test suite

/// Qf = f o Psi - f(Psi(x0)).
struct RetractionOperator {
  VecMap Psi;
  Vec x0;
  Vec psi_x0;
  RetractionOperator(VecMap psi, Vec x0_) : Psi(std::move(psi)), x0(std::move(x0_)) { psi_x0 = Psi(x0); }
  double apply(const ScalarFn& f, const Vec& x) const { return f(Psi(x)) - f(psi_x0); }
  ScalarFn lift(ScalarFn f) const {
    VecMap P = Psi;
    Vec p0 = psi_x0;
    return [f = std::move(f), P, p0](const Vec& x) { return f(P(x)) - f(p0); };
  }
};

inline double apply_Q(const RetractionOperator& Q, const ScalarFn& f, const Vec& x) { return Q.apply(f, x); }

/// Functions of Lipschitz constant at most 1 vanishing at x0.
struct TestSuite {
  std::vector<std::string> names;
  std::vector<ScalarFn> fns;
  std::size_t size() const { return fns.size(); }
};

/// Shifted distance functions, max and min of 2 to 5 affine functions with dual-normalized
/// slopes, and coordinate functionals divided by K.
inline TestSuite make_suite(const SetModel& set, const Norm& norm, std::uint64_t seed, int distances = 10, int lattices = 5) {
  TestSuite s;
  Rng rng(seed);
  const int N = set.dim();
  const Vec x0 = set.x0;
  const Bounds box = set.bbox().inflated(0.25 * std::max(1e-9, set.bbox().diameter()));
  const auto samples = set.all_samples();
  for (int i = 0; i < distances; ++i) {
    Vec p = (i % 2 == 0 && !samples.empty()) ? samples[rng.index(samples.size())] : rng.in_box(box);
    const double d0 = norm(x0 - p);
    Norm nm = norm;
    s.fns.push_back([nm, p, d0](const Vec& x) { return nm(x - p) - d0; });
    s.names.push_back("dist" + std::to_string(i));
  }
  for (int kind = 0; kind < 2; ++kind)
    for (int i = 0; i < lattices; ++i) {
      const int m = 2 + rng.integer(0, 3);
      std::vector<Vec> a;
      std::vector<double> b;
      for (int j = 0; j < m; ++j) {
        Vec v(N);
        for (int c = 0; c < N; ++c) v[c] = rng.normal();
        v /= norm.dual(v);
        a.push_back(v);
        b.push_back(rng.uniform(-0.5, 0.5));
      }
      const bool is_max = kind == 0;
      auto raw = [a, b, is_max](const Vec& x) {
        double best = is_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < a.size(); ++j) {
          double v = a[j].dot(x) + b[j];
          best = is_max ? std::max(best, v) : std::min(best, v);
        }
        return best;
      };
      const double v0 = raw(x0);
      s.fns.push_back([raw, v0](const Vec& x) { return raw(x) - v0; });
      s.names.push_back(std::string(is_max ? "max" : "min") + "affine" + std::to_string(i));
    }
  const double K = norm.K();
  for (int c = 0; c < N; ++c) {
    const double c0 = x0[c];
    s.fns.push_back([c, c0, K](const Vec& x) { return (x[c] - c0) / K; });
    s.names.push_back("coord" + std::to_string(c));
  }
  return s;
}

// ---------------------------------------------------------------------------------------------
// T_n

/// T_n f = Lambda(S_r(Q f), C) for a fixed family of functions, with vertex coefficients
/// computed on first use. Column j of every table is function j.
class FiniteRankOperator {
 public:
  FiniteRankOperator(const Enlargement& E, const Schedule& sched, std::vector<ScalarFn> fns, int quad_nodes = 0, std::size_t cap = kMeshCellCap)
      : sched_(sched), Q_(E.Psi, E.M.x0), fns_(std::move(fns)) {
    const int N = E.M.dim();
    x0_ = E.M.x0;
    smoother_ = std::make_shared<Smoother>(N, sched.r, quad_nodes > 0 ? quad_nodes : default_quad_nodes(N), x0_);
    quad_slack_ = smoother_->quad_slack(sched.K);
    mesh_ = std::make_unique<Mesh>(build_mesh(*E.Mhat, sched.r, sched.delta, x0_, cap));
    const int F = static_cast<int>(fns_.size());
    q0_.resize(F);
    for (int j = 0; j < F; ++j) q0_[j] = fns_[j](Q_.psi_x0);
    cache_ = std::make_unique<NodeCache>(F, [this, F](const Vec& z, double* out) {
      const Vec p = Q_.Psi(z);
      for (int j = 0; j < F; ++j) out[j] = fns_[j](p) - q0_[j];
    });
    fr_x0_.resize(F);
    smoother_->average_batch(*cache_, x0_, fr_x0_.data());
    table_ = std::make_unique<VertexTable>(*mesh_, F, [this, F](const Vec& v, double* out) {
      smoother_->average_batch(*cache_, v, out);
      for (int j = 0; j < F; ++j) out[j] -= fr_x0_[j];
    });
  }

  FiniteRankOperator(const FiniteRankOperator&) = delete;
  FiniteRankOperator& operator=(const FiniteRankOperator&) = delete;

  int width() const { return static_cast<int>(fns_.size()); }
  std::size_t rank() const { return mesh_->vertex_count(); }
  const Mesh& mesh() const { return *mesh_; }
  const Schedule& schedule() const { return sched_; }
  const Smoother& smoother() const { return *smoother_; }
  const RetractionOperator& Q() const { return Q_; }
  VertexTable& table() { return *table_; }
  double quad_slack() const { return quad_slack_; }
  const std::vector<ScalarFn>& functions() const { return fns_; }

  /// T_n f_j(x) for every j.
  void apply(const Vec& x, double* out) { table_->eval(x, out); }
  std::vector<double> apply(const Vec& x) {
    std::vector<double> out(width());
    apply(x, out.data());
    return out;
  }
  /// S_r(Q f_j)(x) for every j.
  void smoothed(const Vec& x, double* out) {
    smoother_->average_batch(*cache_, x, out);
    for (int j = 0; j < width(); ++j) out[j] -= fr_x0_[j];
  }
  /// Q f_j(x) for every j.
  void retracted(const Vec& x, double* out) const {
    const Vec p = Q_.Psi(x);
    for (int j = 0; j < width(); ++j) out[j] = fns_[j](p) - q0_[j];
  }
  /// The smoothed retraction of column j as a standalone function with gradient.
  SmoothedFunction smoothed_function(int j) const { return SmoothedFunction(Q_.lift(fns_[j]), smoother_, x0_); }

 private:
  Schedule sched_;
  RetractionOperator Q_;
  std::vector<ScalarFn> fns_;
  Vec x0_;
  std::shared_ptr<Smoother> smoother_;
  double quad_slack_ = 0.0;
  std::unique_ptr<Mesh> mesh_;
  std::vector<double> q0_, fr_x0_;
  std::unique_ptr<NodeCache> cache_;
  std::unique_ptr<VertexTable> table_;
};

// ---------------------------------------------------------------------------------------------
// Samples

struct PairSample {
  std::vector<Vec> points;
  std::vector<std::pair<int, int>> pairs;
};

/// Anchors in M (half near the boundary), each with satellites at distances 3 delta, r/3, r and 3r,
/// paired with their satellites and with every other anchor. Pairs closer than min_sep are dropped.
inline PairSample sample_pairs(const SetModel& set, const Norm& norm, double r, double delta, int anchors, std::uint64_t seed,
                               double min_sep = 1e-4) {
  Rng rng(seed);
  PairSample ps;
  const Bounds box = set.bbox();
  std::vector<Vec> anc;
  const auto& bnd = set.boundary_samples;
  for (int i = 0; i < anchors; ++i) {
    if (i % 2 == 0 && !bnd.empty()) {
      anc.push_back(bnd[rng.index(bnd.size())]);
      continue;
    }
    for (int tries = 0; tries < 1000; ++tries) {
      Vec p = rng.in_box(box);
      if (set.contains(p)) {
        anc.push_back(p);
        break;
      }
    }
  }
  if (anc.empty()) anc.push_back(set.x0);
  // coarse spatial order keeps quadrature node reuse local
  const double cell = std::max(4.0 * r, 1e-6);
  auto cell_of = [&](const Vec& p) {
    std::array<long, kMaxDim> c{};
    for (int i = 0; i < p.size(); ++i) c[i] = static_cast<long>(std::floor((p[i] - box.lo[i]) / cell));
    return c;
  };
  std::stable_sort(anc.begin(), anc.end(), [&](const Vec& a, const Vec& b) { return cell_of(a) < cell_of(b); });
  const double scales[] = {3.0 * delta, r / 3.0, r, 3.0 * r};
  std::vector<int> anchor_idx;
  for (const auto& a : anc) {
    const int ai = static_cast<int>(ps.points.size());
    ps.points.push_back(a);
    anchor_idx.push_back(ai);
    std::vector<int> sats;
    for (double s : scales) {
      s = std::max(s, 2.0 * min_sep);
      for (int tries = 0; tries < 8; ++tries) {
        Vec u = rng.unit_vector(set.dim());
        Vec y = a + (s / norm(u)) * u;
        if (!set.contains(y)) continue;
        const int yi = static_cast<int>(ps.points.size());
        ps.points.push_back(y);
        for (int o : sats)
          if (norm(ps.points[o] - y) >= min_sep) ps.pairs.push_back({o, yi});
        ps.pairs.push_back({ai, yi});
        sats.push_back(yi);
        break;
      }
    }
  }
  for (std::size_t a = 0; a < anchor_idx.size(); ++a)
    for (std::size_t b = a + 1; b < anchor_idx.size(); ++b)
      if (norm(ps.points[anchor_idx[a]] - ps.points[anchor_idx[b]]) >= min_sep) ps.pairs.push_back({anchor_idx[a], anchor_idx[b]});
  return ps;
}

/// Values T_n f_j at every point, row-major (point, function).
inline std::vector<double> evaluate_all(FiniteRankOperator& T, const std::vector<Vec>& pts) {
  const int F = T.width();
  std::vector<double> out(pts.size() * F);
  for (std::size_t p = 0; p < pts.size(); ++p) T.apply(pts[p], out.data() + p * F);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Verification

struct NormReport {
  double measured = 0.0;
  double near_worst = 0.0;  // pairs closer than r_n
  double far_worst = 0.0;   // pairs at least r_n apart
  double bound = 0.0;
  int worst_f = -1;
  Vec worst_x, worst_y;
  long pairs = 0;
  bool pass = false;
};

/// max over functions and pairs of |T f(x) - T f(y)| / |x - y| against (1 + 1/n)(1 + sigma) + q.
inline NormReport verify_norm(const std::vector<double>& vals, int F, const PairSample& ps, const Norm& norm, int n, double r,
                              double sigma, double q) {
  NormReport rep;
  rep.bound = (1.0 + 1.0 / n) * (1.0 + sigma) + q;
  for (const auto& [a, b] : ps.pairs) {
    const double d = norm(ps.points[a] - ps.points[b]);
    if (!(d > 0.0)) continue;
    ++rep.pairs;
    for (int j = 0; j < F; ++j) {
      const double ratio = std::abs(vals[a * F + j] - vals[b * F + j]) / d;
      double& regime = d >= r ? rep.far_worst : rep.near_worst;
      regime = std::max(regime, ratio);
      if (ratio > rep.measured) {
        rep.measured = ratio;
        rep.worst_f = j;
        rep.worst_x = ps.points[a];
        rep.worst_y = ps.points[b];
      }
    }
  }
  rep.pass = rep.measured <= rep.bound;
  return rep;
}

struct UniformReport {
  double measured = 0.0;
  double bound = 0.0;
  // three-term split: |T f - S Q f|, |S Q f - Q f|, |Q f - f|
  double interp = 0.0, interp_bound = 0.0;
  double smooth = 0.0, smooth_bound = 0.0;
  double retract = 0.0, retract_bound = 0.0;
  int worst_f = -1;
  Vec worst_x;
  bool terms_pass = false;
  bool pass = false;
};

inline double uniform_bound(int n, double K) { return 1.0 / (6.0 * n * (n + 1.0)) + (2.0 * K + 1.0) / n; }

/// sup |T f - f| against 1/(6n(n+1)) + (2K+1)/n + q, with each stage checked against its own bound.
/// Only the first `count` columns are checked (all when negative).
inline UniformReport verify_uniform(FiniteRankOperator& T, const std::vector<double>& vals, const std::vector<Vec>& pts, const Norm& norm,
                                    double sigma, int count = -1) {
  const Schedule& s = T.schedule();
  const int W = T.width();
  const int F = count < 0 ? W : std::min(count, W);
  const double q = T.quad_slack();
  const double K = norm.K();
  UniformReport rep;
  rep.bound = uniform_bound(s.n, K) + q;
  const double lipQ = 1.0 + s.xi;
  rep.interp_bound = std::sqrt(static_cast<double>(s.N)) * K * lipQ * s.delta * (1.0 + sigma) + q * s.delta;
  rep.smooth_bound = 2.0 * K * lipQ * s.r * (1.0 + sigma) + q;
  rep.retract_bound = 2.0 * s.xi * (1.0 + sigma);
  std::vector<double> sq(W), qf(W);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    T.smoothed(pts[p], sq.data());
    T.retracted(pts[p], qf.data());
    for (int j = 0; j < F; ++j) {
      const double tf = vals[p * W + j];
      const double f = T.functions()[j](pts[p]);
      const double err = std::abs(tf - f);
      if (err > rep.measured) {
        rep.measured = err;
        rep.worst_f = j;
        rep.worst_x = pts[p];
      }
      rep.interp = std::max(rep.interp, std::abs(tf - sq[j]));
      rep.smooth = std::max(rep.smooth, std::abs(sq[j] - qf[j]));
      rep.retract = std::max(rep.retract, std::abs(qf[j] - f));
    }
  }
  rep.terms_pass = rep.interp <= rep.interp_bound && rep.smooth <= rep.smooth_bound && rep.retract <= rep.retract_bound;
  rep.pass = rep.measured <= rep.bound;
  return rep;
}

/// Probes (x, h) with x in M and |h| = scale times a random fraction in [1/4, 1], x + h in Mhat(r).
inline std::vector<std::pair<Vec, Vec>> residual_probes(const SetModel& set, const Region& Mhat, const Norm& norm, double r, double scale,
                                                         int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<Vec, Vec>> out;
  const auto pts = set.all_samples();
  for (int tries = 0; static_cast<int>(out.size()) < count && tries < 50 * count; ++tries) {
    const Vec& x = pts[rng.index(pts.size())];
    Vec u = rng.unit_vector(set.dim());
    Vec h = (scale * rng.uniform(0.25, 1.0) / norm(u)) * u;
    if (Mhat.clearance(x + h) > r) out.push_back({x, h});
  }
  return out;
}

/// Largest measured residual constant |g(x+h) - g(x) - Dg(x)h| / |h| over probes and smoothed columns.
inline double measured_residual(const FiniteRankOperator& T, const std::vector<std::pair<Vec, Vec>>& probes, const Norm& norm,
                                const std::vector<int>& cols) {
  double worst = 0.0;
  for (int j : cols) {
    auto g = T.smoothed_function(j);
    worst = std::max(worst, uniform_residual([&](const Vec& x) { return g.raw(x); }, [&](const Vec& x) { return g.grad(x); }, probes, norm));
  }
  return worst;
}

/// Finite functional f -> T_n f(x): hat weights on the vertices of the cube containing x.
struct PredualAction {
  Vec x;
  std::vector<std::pair<Vec, double>> weights;
  /// sup over the family of |T f(x) - f(x)|, a lower bound on |(T_n)_* delta_x - delta_x|
  double gap = 0.0;
};

/// The gap is taken over the first `count` columns (all when negative).
inline PredualAction predual_action(FiniteRankOperator& T, const Vec& x, int count = -1) {
  PredualAction a;
  a.x = x;
  for (const auto& [v, w] : hat_weights(T.mesh(), x)) a.weights.push_back({T.mesh().point(v), w});
  auto tv = T.apply(x);
  const int F = count < 0 ? T.width() : std::min(count, T.width());
  for (int j = 0; j < F; ++j) a.gap = std::max(a.gap, std::abs(tv[j] - T.functions()[j](x)));
  return a;
}

/// Fixed point of M at which the predual gap is tracked across n: the sample farthest from x0.
inline Vec predual_point(const SetModel& set) {
  Vec best = set.x0;
  for (const auto& p : set.all_samples())
    if ((p - set.x0).norm() > (best - set.x0).norm()) best = p;
  return best;
}

// ---------------------------------------------------------------------------------------------
// Experiment

struct RunConfig {
  int n_min = 1;
  int n_max = 4;
  std::uint64_t suite_seed = 1;
  int quad_nodes = 0;
  int anchors = 700;
  int residual_probes = 40;
  double sigma = 1e-3;
  std::size_t mesh_cap = kMeshCellCap;
  EnlargeOptions enlarge;
};

struct ReportRow {
  int n = 0;
  std::string status = "ok";  // ok, infeasible, error
  std::string message;
  Schedule sched;
  std::size_t rank = 0;
  std::size_t cubes = 0;
  std::size_t coefficients = 0;
  double quad_slack = 0.0;
  // enlargement certificate summary
  std::string strategy;
  double enl_lip = 0.0, enl_disp = 0.0, enl_margin = 0.0;
  bool enl_pass = false;
  NormReport norm;
  UniformReport uniform;
  double residual_bound = 0.0;
  bool residual_pass = false;
  bool x0_zero = false;
  double linearity_error = 0.0;
  bool linear_pass = false;
  double predual_gap = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

struct Report {
  std::string set_name;
  std::string norm_name;
  int N = 0;
  double K = 1.0;
  std::vector<std::string> suite;
  std::vector<ReportRow> rows;
  bool monotone = true;
  bool pass() const {
    if (!monotone) return false;
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
};

/// enlarge -> schedule -> smoothing -> mesh -> T_n -> verification for each n.
inline Report run_experiment(const SetModel& set, const Norm& norm, const RunConfig& cfg) {
  if (cfg.n_min < 1 || cfg.n_max < cfg.n_min) throw Error("pipeline", "need 1 <= n_min <= n_max");
  if (norm.dim() != set.dim()) throw Error("pipeline", "norm and set dimensions differ");
  Report rep;
  rep.set_name = set.name;
  rep.norm_name = norm.name();
  rep.N = set.dim();
  rep.K = norm.K();
  const TestSuite suite = make_suite(set, norm, cfg.suite_seed);
  rep.suite = suite.names;
  // two extra columns for the linearity check
  std::vector<ScalarFn> cols = suite.fns;
  const int F0 = static_cast<int>(suite.size());
  const double al = 0.7, be = -1.3;
  cols.push_back([f = suite.fns[0], g = suite.fns[F0 - 1], al, be](const Vec& x) { return al * f(x) + be * g(x); });

  for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
    ReportRow row;
    row.n = n;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Enlargement E = enlarge(set, enlargement_xi(n), norm, cfg.enlarge);
      row.strategy = E.parts.empty() ? "" : E.parts[0].strategy;
      row.enl_lip = E.lip_measured;
      row.enl_disp = E.disp_measured;
      row.enl_margin = E.margin;
      row.enl_pass = E.pass();
      if (!row.enl_pass) throw Error("enlargement", "enlargement certificates failed");
      row.sched = make_schedule(n, set.dim(), norm.K(), E.margin, E.Mhat->bounds(), cfg.mesh_cap);
      Schedule& s = row.sched;
      auto probes_at = [&](double d) { return residual_probes(set, *E.Mhat, norm, s.r, d, cfg.residual_probes, cfg.suite_seed + 17); };
      // residual columns: distance and lattice functions carry the curvature
      std::vector<int> rcols;
      for (int j = 0; j < F0; j += 3) rcols.push_back(j);
      auto build = [&]() { return std::make_unique<FiniteRankOperator>(E, s, cols, cfg.quad_nodes, cfg.mesh_cap); };
      std::unique_ptr<FiniteRankOperator> T;
      if (s.empirical) {
        // largest delta (halving from the mesh bound) whose measured residual meets eps;
        // the residual involves only the smoothed functions, so the first operator serves all probes
        auto probe_op = build();
        for (int it = 0; it < 30; ++it) {
          s.residual = measured_residual(*probe_op, probes_at(s.delta), norm, rcols);
          if (s.residual <= s.eps) break;
          s.delta *= 0.5;
        }
        T = s.delta != probe_op->schedule().delta ? build() : std::move(probe_op);
      } else {
        T = build();
        s.residual = measured_residual(*T, probes_at(s.delta), norm, rcols);
      }
      row.residual_bound = s.eps;
      row.residual_pass = s.residual <= s.eps;
      row.rank = T->rank();
      row.cubes = T->mesh().cube_count();
      row.quad_slack = T->quad_slack();

      PairSample ps = sample_pairs(set, norm, s.r, s.delta, cfg.anchors, cfg.suite_seed + 1000 * n);
      const int F = T->width();
      auto vals = evaluate_all(*T, ps.points);
      std::vector<double> suite_vals(ps.points.size() * F0);
      for (std::size_t p = 0; p < ps.points.size(); ++p)
        for (int j = 0; j < F0; ++j) suite_vals[p * F0 + j] = vals[p * F + j];
      row.norm = verify_norm(suite_vals, F0, ps, norm, n, s.r, cfg.sigma, row.quad_slack);
      row.uniform = verify_uniform(*T, vals, ps.points, norm, cfg.sigma, F0);
      // linearity and T f(x0) = 0
      row.linearity_error = 0.0;
      for (std::size_t p = 0; p < ps.points.size(); p += 7)
        row.linearity_error = std::max(row.linearity_error, std::abs(vals[p * F + F0] - (al * vals[p * F] + be * vals[p * F + F0 - 1])));
      row.linear_pass = row.linearity_error <= 1e-10;
      auto at0 = T->apply(set.x0);
      row.x0_zero = std::all_of(at0.begin(), at0.end(), [](double v) { return v == 0.0; });
      row.predual_gap = predual_action(*T, predual_point(set), F0).gap;
      row.coefficients = T->table().computed();
      row.pass = row.enl_pass && row.norm.pass && row.uniform.pass && row.uniform.terms_pass && row.residual_pass && row.linear_pass &&
                 row.x0_zero;
    } catch (const Error& e) {
      row.status = std::string(e.what()).find("mesh infeasible") != std::string::npos ? "infeasible" : "error";
      row.message = e.what();
      row.pass = false;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(row);
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    if (a.status != "ok" || b.status != "ok") continue;
    if (b.uniform.measured > a.uniform.measured * (1.0 + cfg.sigma) + b.quad_slack) rep.monotone = false;
  }
  return rep;
}

}  // namespace lipfree
