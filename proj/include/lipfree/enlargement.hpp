#pragma once

#include "geometry.hpp"

#include <sstream>

namespace lipfree {

using VecMap = std::function<Vec(const Vec&)>;
using ScalarFn = std::function<double(const Vec&)>;

/// y + (theta - 1)((y - x).u + r) u
struct ShearMap {
  double theta = 1.0;
  Vec x;
  double r = 0.0;
  Vec u;

  Vec apply(const Vec& y) const { return y + ((theta - 1.0) * ((y - x).dot(u) + r)) * u; }
  Vec operator()(const Vec& y) const { return apply(y); }
};

inline Vec shear_apply(const ShearMap& m, const Vec& y) { return m.apply(y); }

struct ShearEstimates {
  double lip_minus_I = 0.0;
  double sup_minus_I = 0.0;
  double lip_bound = 0.0;
  double sup_bound = 0.0;
};

/// Sampled Lip(T - I) over all pairs of E and sup |T - I| over E, checked against
/// K^2 (theta - 1) and K (K P + r)(theta - 1).
inline ShearEstimates shear_estimates(const ShearMap& m, const std::vector<Vec>& E, const Norm& norm) {
  ShearEstimates est;
  const double K = norm.K();
  double P = 0.0;
  std::vector<Vec> d(E.size());
  for (std::size_t i = 0; i < E.size(); ++i) {
    P = std::max(P, norm(E[i] - m.x));
    d[i] = m.apply(E[i]) - E[i];
    est.sup_minus_I = std::max(est.sup_minus_I, norm(d[i]));
  }
  for (std::size_t i = 0; i < E.size(); ++i)
    for (std::size_t j = i + 1; j < E.size(); ++j) {
      double den = norm(E[i] - E[j]);
      if (den > 0.0) est.lip_minus_I = std::max(est.lip_minus_I, norm(d[i] - d[j]) / den);
    }
  est.lip_bound = K * K * (m.theta - 1.0);
  est.sup_bound = K * (K * P + m.r) * (m.theta - 1.0);
  const double tol = 1e-12 * (1.0 + est.sup_bound);
  if (est.lip_minus_I > est.lip_bound * (1.0 + 1e-12) + 1e-15 || est.sup_minus_I > est.sup_bound + tol)
    throw Error("enlargement", "shear exceeds its analytic estimate; the norm constant K is wrong");
  return est;
}

// ---------------------------------------------------------------------------------------------
// Ball covers

struct CoverBall {
  Vec x;
  double r = 0.0;
  Vec u;
  DownwardsCertificate cert;
};

struct CoverOptions {
  /// "radial" (u = (p - c)/|p - c| about the set's radial center), "probe" (estimated normal and
  /// sphere directions) or "auto" (radial when the set declares a center, probe otherwise).
  std::string family = "auto";
  std::vector<double> radii{0.45, 0.3, 0.2, 0.1, 0.05, 0.025};
  /// Certificate grid resolution; 0 means h_geo / 2.
  double resolution = 0.0;
  std::size_t max_balls = 10000;
};

struct BallCover {
  std::vector<CoverBall> balls;
  std::string family;
};

namespace detail {

inline Vec estimated_normal(const SetModel& set, const Vec& p) {
  Vec acc = Vec::Zero(set.dim());
  int cnt = 0;
  const double reach = 3.0 * set.h_geo;
  for (const auto& q : set.interior_samples)
    if ((q - p).norm() < reach) {
      acc += q;
      ++cnt;
    }
  if (cnt == 0) return unit(set.dim(), 0);
  Vec nrm = p - acc / cnt;
  if (nrm.norm() < 1e-12) return unit(set.dim(), 0);
  return nrm / nrm.norm();
}

inline std::vector<Vec> candidate_directions(const SetModel& set, const Vec& p, const std::string& family) {
  const int n = set.dim();
  if (family == "radial") {
    Vec c;
    if (set.radial_center) {
      c = *set.radial_center;
    } else {
      c = Vec::Zero(n);
      for (const auto& q : set.interior_samples) c += q;
      c /= std::max<std::size_t>(1, set.interior_samples.size());
    }
    Vec u = p - c;
    if (u.norm() < 1e-12) return {};
    return {u / u.norm()};
  }
  Vec nrm = estimated_normal(set, p);
  std::vector<Vec> out{nrm};
  auto dirs = sphere_directions(n, n == 1 ? 2 : 16);
  for (int i = 0; i < n; ++i) {
    dirs.push_back(unit(n, i));
    dirs.push_back(-unit(n, i));
  }
  std::sort(dirs.begin(), dirs.end(), [&](const Vec& a, const Vec& b) { return a.dot(nrm) > b.dot(nrm); });
  for (const auto& d : dirs)
    if (d.dot(nrm) > 0.0) out.push_back(d);
  return out;
}

}  // namespace detail

/// Greedy cover of the boundary cloud by balls U(x_i, r_i) with passing certificates on U(x_i, 2 r_i).
/// A sample q counts as covered by ball i when |q - x_i|_2 < r_i - h_geo, so that the true boundary
/// near q is covered too.
inline BallCover build_ball_cover(const SetModel& set, const CoverOptions& opt = {}) {
  BallCover cover;
  cover.family = opt.family == "auto" ? (set.radial_center ? "radial" : "probe") : opt.family;
  if (cover.family != "radial" && cover.family != "probe") throw Error("enlargement", "unknown cover family '" + opt.family + "'");
  const double res = opt.resolution > 0.0 ? opt.resolution : 0.5 * set.h_geo;
  std::vector<char> covered(set.boundary_samples.size(), 0);
  for (std::size_t idx = 0; idx < set.boundary_samples.size(); ++idx) {
    if (covered[idx]) continue;
    const Vec& p = set.boundary_samples[idx];
    bool placed = false;
    for (double r : opt.radii) {
      if (r <= set.h_geo || r >= 1.0) continue;
      for (const auto& u : detail::candidate_directions(set, p, cover.family)) {
        auto cert = is_downwards_closed_relative(set, p, r, u, res);
        if (!cert.pass) continue;
        cover.balls.push_back({p, r, u, cert});
        for (std::size_t j = 0; j < set.boundary_samples.size(); ++j)
          if ((set.boundary_samples[j] - p).norm() < r - set.h_geo) covered[j] = 1;
        covered[idx] = 1;
        placed = true;
        break;
      }
      if (placed) break;
    }
    if (!placed) throw Error("enlargement", "not locally downwards closed at p (" + cover.family + " candidates)", p);
    if (cover.balls.size() > opt.max_balls) throw Error("enlargement", "ball cover exceeds the configured size cap", p);
  }
  return cover;
}

// ---------------------------------------------------------------------------------------------
// Partition of unity

/// f_j = g_j / sum g, where g_j >= 0 vanishes outside U_j.
class PartitionOfUnity {
 public:
  explicit PartitionOfUnity(std::vector<ScalarFn> g) : g_(std::move(g)) {
    if (g_.empty()) throw Error("enlargement", "partition of unity needs at least one function");
  }

  std::size_t size() const { return g_.size(); }

  /// Writes f_1..f_m at x; false when x lies outside every U_j.
  bool weights(const Vec& x, std::vector<double>& f) const {
    f.resize(g_.size());
    double s = 0.0;
    for (std::size_t j = 0; j < g_.size(); ++j) s += (f[j] = std::max(0.0, g_[j](x)));
    if (!(s > 0.0)) return false;
    for (auto& v : f) v /= s;
    return true;
  }

  std::vector<double> weights(const Vec& x) const {
    std::vector<double> f;
    if (!weights(x, f)) throw Error("enlargement", "point is not covered by the partition of unity", x);
    return f;
  }

  /// Sampled common Lipschitz bound H of the f_j and the weighted quantity
  /// G = sup sum_j s_j |f_j(x) - f_j(y)| / |x - y| over all pairs of pts.
  void measure(const std::vector<Vec>& pts, const Norm& norm, const std::vector<double>& s = {}) {
    std::vector<std::vector<double>> F(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) F[i] = weights(pts[i]);
    double h = 0.0, g = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        double d = norm(pts[a] - pts[b]);
        if (d == 0.0) continue;
        double sum = 0.0, mx = 0.0;
        for (std::size_t j = 0; j < g_.size(); ++j) {
          double df = std::abs(F[a][j] - F[b][j]);
          mx = std::max(mx, df);
          if (j < s.size()) sum += s[j] * df;
        }
        h = std::max(h, mx / d);
        g = std::max(g, sum / d);
      }
    H_measured = h;
    G_measured = g;
  }

  double H_measured = 0.0;
  double G_measured = 0.0;

 private:
  std::vector<ScalarFn> g_;
};

/// g_i = max(0, r_i - |x - x_i|_2) for the cover balls and g_{k+1} = d_2(x, complement of M).
inline PartitionOfUnity build_partition_of_unity(const BallCover& cover, RegionPtr M) {
  std::vector<ScalarFn> g;
  for (const auto& b : cover.balls) {
    Vec c = b.x;
    double r = b.r;
    g.push_back([c, r](const Vec& x) { return std::max(0.0, r - (x - c).norm()); });
  }
  g.push_back([M](const Vec& x) { return M->clearance(x); });
  return PartitionOfUnity(std::move(g));
}

// ---------------------------------------------------------------------------------------------
// Gluing

/// psi = sum_j f_j psi_j, with certified bounds on Lip(psi - I) and sup |psi - I|.
class GluedMap {
 public:
  GluedMap(std::vector<VecMap> pieces, std::shared_ptr<const PartitionOfUnity> pou)
      : pieces_(std::move(pieces)), pou_(std::move(pou)) {
    if (pieces_.size() != pou_->size()) throw Error("enlargement", "glue: one piece per partition function required");
  }

  /// psi(x), or nullopt when x is outside U.
  std::optional<Vec> try_apply(const Vec& x) const {
    thread_local std::vector<double> f;
    if (!pou_->weights(x, f)) return std::nullopt;
    Vec out = Vec::Zero(x.size());
    for (std::size_t j = 0; j < pieces_.size(); ++j)
      if (f[j] > 0.0) out += f[j] * pieces_[j](x);
    return out;
  }

  Vec operator()(const Vec& x) const {
    auto y = try_apply(x);
    if (!y) throw Error("enlargement", "glued map evaluated outside U", x);
    return *y;
  }

  double xi_lip = 0.0;
  double xi_unif = 0.0;
  double measured_lip = 0.0;
  double measured_unif = 0.0;

  const PartitionOfUnity& partition() const { return *pou_; }

 private:
  std::vector<VecMap> pieces_;
  std::shared_ptr<const PartitionOfUnity> pou_;
};

/// Glues pieces psi_j with Lip(psi_j - I) <= lip_j and |psi_j - I| <= local_sup_j on supp f_j.
/// Certified bounds: xi_lip = max_j lip_j + G and xi_unif = max_j local_sup_j, where
/// G = 1.2 * sup sum_j local_sup_j |f_j(x) - f_j(y)| / |x - y| measured over samples. Both are
/// re-checked by a pair sweep over the samples.
inline GluedMap glue(std::vector<VecMap> pieces, std::shared_ptr<PartitionOfUnity> pou, const std::vector<double>& lip,
                     const std::vector<double>& local_sup, const std::vector<Vec>& samples, const Norm& norm) {
  if (lip.size() != pieces.size() || local_sup.size() != pieces.size()) throw Error("enlargement", "glue: bound vectors have the wrong size");
  pou->measure(samples, norm, local_sup);
  GluedMap m(std::move(pieces), pou);
  m.xi_lip = *std::max_element(lip.begin(), lip.end()) + 1.2 * pou->G_measured;
  m.xi_unif = *std::max_element(local_sup.begin(), local_sup.end());
  std::vector<Vec> d(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    d[i] = m(samples[i]) - samples[i];
    m.measured_unif = std::max(m.measured_unif, norm(d[i]));
  }
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      double den = norm(samples[a] - samples[b]);
      if (den > 0.0) m.measured_lip = std::max(m.measured_lip, norm(d[a] - d[b]) / den);
    }
  // floors absorb rounding in sum_j f_j x - x, which the pair quotient divides by small distances
  if (m.measured_lip > m.xi_lip * (1.0 + 1e-9) + 1e-10 || m.measured_unif > m.xi_unif * (1.0 + 1e-9) + 1e-13)
    throw Error("enlargement", "glued map violates its certified bounds (lip " + std::to_string(m.measured_lip) + " vs " + std::to_string(m.xi_lip) + ", sup " + std::to_string(m.measured_unif) + " vs " + std::to_string(m.xi_unif) + ")");
  if (m.xi_lip >= 1.0) throw Error("enlargement", "gluing failed: Lip(psi - I) bound is not below 1; shrink theta");
  return m;
}

/// theta = min{1 + eps / (2 K^2 (1 + (k+1) H)), 1 + eps / (K (K diamU + 1)), 1 + s}
inline double choose_theta(double K, int k, double H, double eps, double diamU, double s) {
  return std::min({1.0 + 0.5 * eps / (K * K * (1.0 + (k + 1) * H)), 1.0 + eps / (K * (K * diamU + 1.0)), 1.0 + s});
}

struct InversionResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
  bool left_U = false;
};

/// Fixed point iteration x <- y - (psi(x) - x) from x = y.
inline InversionResult invert_glued(const GluedMap& psi, const Vec& y, const Norm& norm, double tol = 1e-10, int max_iter = 200) {
  InversionResult res;
  res.x = y;
  const double stop = tol * (1.0 - psi.xi_lip);
  for (int it = 1; it <= max_iter; ++it) {
    auto px = psi.try_apply(res.x);
    if (!px) {
      res.left_U = true;
      res.iterations = it;
      return res;
    }
    Vec next = y - (*px - res.x);
    double step = norm(next - res.x);
    res.x = next;
    res.iterations = it;
    if (step <= stop) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

/// psi(M), with membership decided by inverting psi.
class ImageRegion : public Region {
 public:
  /// settle maps a preimage rounded just outside M back into M when it can.
  ImageRegion(std::shared_ptr<const GluedMap> psi, RegionPtr M, Norm norm, VecMap settle = {})
      : psi_(std::move(psi)), M_(std::move(M)), norm_(std::move(norm)), settle_(std::move(settle)) {}
  int dim() const override { return M_->dim(); }
  bool contains(const Vec& y) const override {
    auto inv = invert_glued(*psi_, y, norm_);
    if (!inv.converged) return false;
    return M_->contains(inv.x) || (settle_ && M_->contains(settle_(inv.x)));
  }
  Bounds bounds() const override { return M_->bounds().inflated(norm_.K() * psi_->xi_unif + 1e-9); }
  std::string kind() const override { return "image"; }
  std::optional<Vec> preimage(const Vec& y) const {
    auto inv = invert_glued(*psi_, y, norm_);
    if (!inv.converged) return std::nullopt;
    return inv.x;
  }

 private:
  std::shared_ptr<const GluedMap> psi_;
  RegionPtr M_;
  Norm norm_;
  VecMap settle_;
};

// ---------------------------------------------------------------------------------------------
// Enlargement

enum class Strategy { Auto, Fastpath, General };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "auto") return Strategy::Auto;
  if (s == "fastpath" || s == "convex-fastpath") return Strategy::Fastpath;
  if (s == "general") return Strategy::General;
  throw Error("enlargement", "unknown strategy '" + s + "'");
}

struct EnlargeOptions {
  Strategy strategy = Strategy::Auto;
  /// Grid resolution for certificates and segment tests; 0 means h_geo / 2.
  double resolution = 0.0;
  CoverOptions cover;
  /// Cap on the number of samples used in pair sweeps.
  std::size_t max_pair_samples = 1200;
};

/// Per-component record of how the enlargement was built.
struct PartReport {
  std::string name;
  std::string strategy;
  std::string fastpath_note;
  double xi = 0.0;
  // fast path
  Vec w;
  double rho = 0.0, t = 0.0, R = 0.0;
  // general
  std::vector<CoverBall> cover;
  std::string cover_family;
  int k = 0;
  double H = 0.0, G = 0.0, eps = 0.0, diamU = 0.0, s = 0.0;
  double theta_schedule = 1.0, theta = 1.0;
  double xi_lip = 0.0, xi_unif = 0.0;
  double margin = 0.0;
};

struct Enlargement {
  SetModel M;
  RegionPtr Mhat;
  /// Retraction from Mhat onto M.
  VecMap Psi;
  double xi = 0.0;
  Norm norm;
  double margin = 0.0;

  std::vector<PartReport> parts;
  double alpha = std::numeric_limits<double>::infinity();
  double alpha_eff = 0.99;
  double xi_component = 0.0;

  // certificates
  double lip_measured = 0.0;
  double disp_measured = 0.0;
  double margin_measured = 0.0;
  bool lip_pass = false, disp_pass = false, retract_pass = false, margin_pass = false;
  long pairs_checked = 0;
  std::vector<Vec> mhat_samples;

  bool pass() const { return lip_pass && disp_pass && retract_pass && margin_pass; }
  /// True when Mhat's clearance is exact (all fast path parts over exact regions).
  bool exact() const { return Mhat->exact_clearance(); }
};

namespace detail {

inline std::vector<Vec> thin_evenly(const std::vector<Vec>& pts, std::size_t cap) {
  if (pts.size() <= cap) return pts;
  std::vector<Vec> out;
  out.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) out.push_back(pts[i * pts.size() / cap]);
  return out;
}

struct PartResult {
  RegionPtr Mhat;
  VecMap Psi;
  /// Pairs (y, Psi(y)) with y in Mhat, from images of M's samples.
  std::vector<std::pair<Vec, Vec>> samples;
  PartReport report;
};

inline double sup_distance(const SetModel& set, const Vec& w, const Norm& norm) {
  double R = 0.0;
  for (const auto& p : set.boundary_samples) R = std::max(R, norm(p - w));
  for (const auto& p : set.interior_samples) R = std::max(R, norm(p - w));
  for (const auto& p : set.region->feature_points())
    if (set.contains(p)) R = std::max(R, norm(p - w));
  return R;
}

inline std::optional<PartResult> try_fastpath(const SetModel& set, double xi, const Norm& norm, double res, std::string& note) {
  std::vector<Vec> cands;
  if (set.radial_center && set.contains(*set.radial_center)) cands.push_back(*set.radial_center);
  Vec centroid = Vec::Zero(set.dim());
  for (const auto& q : set.interior_samples) centroid += q;
  if (!set.interior_samples.empty()) {
    centroid /= static_cast<double>(set.interior_samples.size());
    if (set.contains(centroid)) cands.push_back(centroid);
  }
  std::vector<std::pair<double, Vec>> ranked;
  for (const auto& q : set.interior_samples) ranked.push_back({set.clearance(q), q});
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [c, q] : ranked) {
    if (cands.size() >= 14 || !(c > 0.0)) break;
    bool far = true;
    for (const auto& e : cands)
      if ((e - q).norm() < 2.0 * set.h_geo) far = false;
    if (far) cands.push_back(q);
  }
  double best_score = 0.0;
  std::optional<PartResult> best;
  for (const auto& w : cands) {
    if (!(set.clearance(w) > 0.0)) continue;
    auto sk = star_kernel_contains(set, w, res);
    if (!sk.pass) {
      if (sk.witness) {
        std::ostringstream os;
        os << "star-kernel segment left the set near (" << sk.witness->transpose() << ")";
        note = os.str();
      }
      continue;
    }
    const double R = sup_distance(set, w, norm);
    const double score = sk.margin / R;
    if (score <= best_score) continue;
    best_score = score;
    // shaved so the displacement bound survives rounding
    const double t = xi / R * (1.0 - 1e-9);
    PartResult pr;
    pr.report.strategy = "fastpath";
    pr.report.w = w;
    pr.report.rho = sk.margin;
    pr.report.t = t;
    pr.report.R = R;
    pr.report.margin = 0.999 * t * sk.margin;
    auto dil = std::make_shared<Dilated>(set.region, w, 1.0 + t);
    pr.Mhat = dil;
    RegionPtr M = set.region;
    // points rounded just outside M are pulled toward the star center w
    auto inward = [w, M](Vec x) {
      for (double f = 1e-15; !M->contains(x) && f < 1e-9; f *= 4.0) x = w + (1.0 - f) * (x - w);
      return x;
    };
    pr.Psi = [dil, inward](const Vec& x) -> Vec { return inward(dil->pre(x)); };
    for (const auto* cloud : {&set.interior_samples, &set.boundary_samples})
      for (const auto& m : *cloud) {
        Vec y = w + (1.0 + t) * (m - w);
        for (double f = 1e-15; !dil->contains(y) && f < 1e-9; f *= 4.0) y = w + (1.0 - f) * (y - w);
        pr.samples.push_back({y, m});
      }
    best = std::move(pr);
  }
  if (best) note.clear();
  else if (note.empty()) note = "no star-kernel center found";
  return best;
}

inline PartResult general_part(const SetModel& set, double xi, const Norm& norm, const EnlargeOptions& opt, double res) {
  PartResult pr;
  PartReport& rep = pr.report;
  rep.strategy = "general";
  const double K = norm.K();
  CoverOptions copt = opt.cover;
  if (copt.resolution <= 0.0) copt.resolution = res;
  BallCover cover = build_ball_cover(set, copt);
  rep.cover = cover.balls;
  rep.cover_family = cover.family;
  rep.k = static_cast<int>(cover.balls.size());

  auto pou = std::make_shared<PartitionOfUnity>(build_partition_of_unity(cover, set.region));
  auto pair_pts = thin_evenly(set.all_samples(), opt.max_pair_samples);
  std::vector<double> radii;
  double rmax = 0.0, rmin = 1.0;
  for (const auto& b : cover.balls) {
    radii.push_back(b.r);
    rmax = std::max(rmax, b.r);
    rmin = std::min(rmin, b.r);
  }
  radii.push_back(0.0);
  pou->measure(pair_pts, norm, radii);
  rep.H = 1.2 * pou->H_measured;
  rep.G = 1.2 * pou->G_measured;

  // interior point w with B(w, eps) inside M
  Vec w = set.x0;
  double wc = set.clearance(w);
  for (const auto& q : set.interior_samples) {
    double c = set.clearance(q);
    if (c > wc) {
      wc = c;
      w = q;
    }
  }
  rep.w = w;
  rep.eps = std::min(0.99 * std::min(1.0, xi), 0.99 * wc);
  rep.diamU = K * set.bbox().inflated(rmax).diameter();
  rep.s = rep.k > 0 ? rmin / (2.0 * rmax) : 1.0;
  rep.theta_schedule = choose_theta(K, rep.k, rep.H, rep.eps, rep.diamU, rep.s);
  rep.theta = std::min(rep.theta_schedule, 1.0 + 0.5 * rep.eps / (K * K + 2.0 * K * rep.G));

  std::vector<VecMap> pieces;
  std::vector<double> lip, sup;
  for (const auto& b : cover.balls) {
    ShearMap sm{rep.theta, b.x, b.r, b.u};
    pieces.push_back([sm](const Vec& y) { return sm.apply(y); });
    lip.push_back(K * K * (rep.theta - 1.0));
    sup.push_back(2.0 * K * b.r * (rep.theta - 1.0));
  }
  pieces.push_back([](const Vec& y) { return y; });
  lip.push_back(0.0);
  sup.push_back(0.0);
  auto psi = std::make_shared<GluedMap>(glue(pieces, pou, lip, sup, pair_pts, norm));
  rep.xi_lip = psi->xi_lip;
  rep.xi_unif = psi->xi_unif;

  RegionPtr M = set.region;
  std::vector<CoverBall> balls = cover.balls;
  // preimages rounded just outside M are moved down along a covering ball's direction
  VecMap settle = [M, balls](const Vec& x) -> Vec {
    if (M->contains(x)) return x;
    for (const auto& b : balls) {
      if ((x - b.x).norm() >= b.r) continue;
      for (double t = 1e-15; t < 1e-9; t *= 4.0)
        if (M->contains(x - t * b.u)) return Vec(x - t * b.u);
    }
    return x;
  };
  auto image = std::make_shared<ImageRegion>(psi, set.region, norm, settle);
  pr.Mhat = image;
  Norm nm = norm;
  pr.Psi = [psi, nm, settle](const Vec& y) -> Vec {
    auto inv = invert_glued(*psi, y, nm);
    if (!inv.converged) throw Error("enlargement", "retraction evaluated outside the enlarged set", y);
    return settle(inv.x);
  };
  for (const auto* cloud : {&set.interior_samples, &set.boundary_samples})
    for (const auto& m : *cloud) pr.samples.push_back({(*psi)(m), m});

  // margin: half the smallest ray clearance of Mhat over M's near-boundary samples
  double mc = std::numeric_limits<double>::infinity();
  for (const auto& p : set.boundary_samples) mc = std::min(mc, ray_clearance(*image, p, 1e-9));
  rep.margin = 0.5 * mc;
  return pr;
}

inline PartResult enlarge_connected(const SetModel& set, double xi, const Norm& norm, const EnlargeOptions& opt) {
  const double res = opt.resolution > 0.0 ? opt.resolution : 0.5 * set.h_geo;
  std::string note;
  if (opt.strategy != Strategy::General) {
    auto fp = try_fastpath(set, xi, norm, res, note);
    if (fp) {
      fp->report.name = set.name;
      fp->report.xi = xi;
      return std::move(*fp);
    }
    if (opt.strategy == Strategy::Fastpath) throw Error("enlargement", "fast path rejected: " + note);
  }
  PartResult pr = general_part(set, xi, norm, opt, res);
  pr.report.name = set.name;
  pr.report.xi = xi;
  pr.report.fastpath_note = note;
  return pr;
}

}  // namespace detail

/// Enlarged set and retraction with certificates Lip(Psi) <= 1 + xi, |x - Psi(x)| <= xi,
/// Psi(Mhat) in M and M inside the erosion Mhat(margin).
inline Enlargement enlarge(const SetModel& set, double xi, const Norm& norm, const EnlargeOptions& opt = {}) {
  if (!(xi > 0.0)) throw Error("enlargement", "xi must be positive");
  if (norm.dim() != set.dim()) throw Error("enlargement", "norm and set dimensions differ");
  Enlargement E;
  E.M = set;
  E.xi = xi;
  E.norm = norm;
  auto split = connected_components(set, norm, 0.5 * set.h_geo);
  E.alpha = split.alpha;
  E.alpha_eff = split.alpha_eff;
  const bool multi = split.parts.size() > 1;
  E.xi_component = multi ? std::min(0.5 * xi * split.alpha_eff, 0.25 * split.alpha_eff) : xi;

  std::vector<detail::PartResult> parts;
  for (const auto& part : split.parts) parts.push_back(detail::enlarge_connected(part, E.xi_component, norm, opt));

  std::vector<std::pair<Vec, Vec>> samples;
  E.margin = std::numeric_limits<double>::infinity();
  for (auto& p : parts) {
    E.parts.push_back(p.report);
    E.margin = std::min(E.margin, p.report.margin);
    samples.insert(samples.end(), p.samples.begin(), p.samples.end());
  }
  if (!multi) {
    E.Mhat = parts[0].Mhat;
    E.Psi = parts[0].Psi;
  } else {
    std::vector<RegionPtr> regions;
    std::vector<VecMap> maps;
    for (auto& p : parts) {
      regions.push_back(p.Mhat);
      maps.push_back(p.Psi);
    }
    // components of Mhat lie within xi' <= alpha/4 of distinct components of M
    for (std::size_t i = 0; i < parts.size(); ++i)
      for (const auto& [y, m] : parts[i].samples)
        for (std::size_t j = 0; j < parts.size(); ++j)
          if (j != i && regions[j]->contains(y)) throw Error("enlargement", "enlarged components overlap", y);
    E.Mhat = std::make_shared<Union>(regions, true);
    E.Psi = [regions, maps](const Vec& x) -> Vec {
      for (std::size_t i = 0; i < regions.size(); ++i)
        if (regions[i]->contains(x)) return maps[i](x);
      throw Error("enlargement", "retraction evaluated outside the enlarged set", x);
    };
  }

  // certificates over the images of M's samples
  const Norm& nm = norm;
  std::vector<std::pair<Vec, Vec>> sweep;
  {
    const std::size_t cap = opt.max_pair_samples;
    for (std::size_t i = 0; i < std::min(cap, samples.size()); ++i) sweep.push_back(samples[i * samples.size() / std::min(cap, samples.size())]);
  }
  E.retract_pass = true;
  E.disp_measured = 0.0;
  for (const auto& [y, m] : samples) {
    if (!set.contains(m)) E.retract_pass = false;
    E.disp_measured = std::max(E.disp_measured, nm(y - m));
  }
  // the explicit retraction must agree with the sample correspondence
  for (const auto& [y, m] : sweep) {
    Vec py = E.Psi(y);
    if (nm(py - m) > 1e-8 || !set.contains(py)) E.retract_pass = false;
    E.mhat_samples.push_back(y);
  }
  E.lip_measured = 0.0;
  for (std::size_t a = 0; a < sweep.size(); ++a)
    for (std::size_t b = a + 1; b < sweep.size(); ++b) {
      double den = nm(sweep[a].first - sweep[b].first);
      if (den <= 0.0) continue;
      E.lip_measured = std::max(E.lip_measured, nm(sweep[a].second - sweep[b].second) / den);
      ++E.pairs_checked;
    }
  E.lip_pass = E.lip_measured <= 1.0 + xi;
  E.disp_pass = E.disp_measured <= xi;

  // margin: M's samples must have clearance above the declared margin in Mhat
  E.margin_measured = std::numeric_limits<double>::infinity();
  bool margin_ok = E.margin > 0.0;
  for (const auto* cloud : {&set.boundary_samples, &set.interior_samples})
    for (const auto& p : *cloud) {
      if (!E.Mhat->contains(p)) {
        margin_ok = false;
        continue;
      }
      // deep points are covered by M itself
      if (set.clearance(p) > 2.0 * E.margin + set.h_geo) continue;
      double c = E.Mhat->exact_clearance() ? E.Mhat->clearance(p) : ray_clearance(*E.Mhat, p, 1e-9);
      E.margin_measured = std::min(E.margin_measured, c);
      if (!(c >= E.margin)) margin_ok = false;
    }
  E.margin_pass = margin_ok;
  return E;
}

}  // namespace lipfree
