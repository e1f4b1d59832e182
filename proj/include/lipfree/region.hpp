#pragma once

#include "core.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace lipfree {

/// A closed bounded subset of R^N given by a membership oracle.
class Region {
 public:
  virtual ~Region() = default;

  virtual int dim() const = 0;
  virtual bool contains(const Vec& x) const = 0;
  /// Euclidean distance from x to the complement of the set, 0 for points outside.
  virtual double clearance(const Vec& x) const;
  virtual bool interior_contains(const Vec& x) const { return clearance(x) > 0.0; }
  virtual Bounds bounds() const = 0;
  /// Points that a grid sampler would miss, e.g. corners.
  virtual std::vector<Vec> feature_points() const { return {}; }
  /// Euclidean distance from x to the set, when it can be computed exactly.
  virtual std::optional<double> distance_to(const Vec&) const { return std::nullopt; }
  /// True when clearance() is exact rather than a ray estimate.
  virtual bool exact_clearance() const { return false; }
  virtual std::string kind() const = 0;
};

using RegionPtr = std::shared_ptr<const Region>;

namespace detail {
inline const std::vector<Vec>& cached_directions(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<Vec>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, sphere_directions(n, default_direction_count(n))).first;
  return it->second;
}
}  // namespace detail

/// Distance to the complement by marching along sampled rays and bisecting the first exit to tol.
/// The best ray is then refined by a pattern search over nearby directions. The returned value is
/// the last verified inside distance, so it never exceeds the true exit distance along any tried ray.
inline double ray_clearance(const Region& reg, const Vec& x, double tol = 1e-6, int directions = 0) {
  if (!reg.contains(x)) return 0.0;
  const int n = reg.dim();
  std::vector<Vec> custom;
  if (directions > 0) custom = sphere_directions(n, directions);
  const auto& dirs = directions > 0 ? custom : detail::cached_directions(n);
  const Bounds b = reg.bounds();
  double best = b.diameter() + 1.0;
  const double step = std::max(b.diameter() / 256.0, 4.0 * tol);
  // verified inside distance along d if the exit comes before cap, else cap
  auto exit_along = [&](const Vec& d, double cap) {
    double t_in = 0.0, t_out = -1.0;
    for (double t = step; t_in < cap; t += step) {
      double tt = std::min(t, cap);
      if (!reg.contains(x + tt * d)) {
        t_out = tt;
        break;
      }
      t_in = tt;
      if (tt >= cap) break;
    }
    if (t_out < 0.0) return cap;
    while (t_out - t_in > tol) {
      double mid = 0.5 * (t_in + t_out);
      if (reg.contains(x + mid * d))
        t_in = mid;
      else
        t_out = mid;
    }
    return t_in;
  };
  Vec best_d;
  for (const Vec& d : dirs) {
    double e = exit_along(d, best);
    if (e < best) {
      best = e;
      best_d = d;
    }
  }
  if (n == 1 || best_d.size() == 0) return best;
  // tangent basis at best_d
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  Q.col(0) = best_d;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Q);
  Eigen::MatrixXd basis = qr.householderQ();
  const double spacing = n == 2 ? 2.0 * std::numbers::pi / double(dirs.size()) : std::pow(double(dirs.size()), -1.0 / (n - 1)) * 4.0;
  for (double s = spacing; s > 1e-5 && best > tol;) {
    bool improved = false;
    for (int j = 1; j < n && !improved; ++j)
      for (double sign : {1.0, -1.0}) {
        Vec d = (best_d + sign * s * basis.col(j)).normalized();
        double e = exit_along(d, best);
        if (e < best) {
          best = e;
          best_d = d;
          improved = true;
          break;
        }
      }
    if (improved) {
      Q.col(0) = best_d;
      basis = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ();
    } else {
      s *= 0.5;
    }
  }
  return best;
}

inline double Region::clearance(const Vec& x) const { return ray_clearance(*this, x); }

/// Closed Euclidean ball.
class Ball : public Region {
 public:
  Ball(Vec c, double radius) : c_(std::move(c)), rad_(radius) {
    if (!(radius > 0.0)) throw Error("geometry", "ball radius must be positive");
  }
  int dim() const override { return static_cast<int>(c_.size()); }
  bool contains(const Vec& x) const override { return (x - c_).norm() <= rad_; }
  bool interior_contains(const Vec& x) const override { return (x - c_).norm() < rad_; }
  double clearance(const Vec& x) const override { return std::max(0.0, rad_ - (x - c_).norm()); }
  std::optional<double> distance_to(const Vec& x) const override { return std::max(0.0, (x - c_).norm() - rad_); }
  bool exact_clearance() const override { return true; }
  Bounds bounds() const override { return Bounds{c_, c_}.inflated(rad_); }
  std::vector<Vec> feature_points() const override {
    if (dim() != 1) return {};
    return {c_.array() - rad_, c_.array() + rad_};
  }
  std::string kind() const override { return "ball"; }
  const Vec& center() const { return c_; }
  double radius() const { return rad_; }

 private:
  Vec c_;
  double rad_;
};

/// Closed axis-aligned box.
class Box : public Region {
 public:
  Box(Vec lo, Vec hi) : b_{std::move(lo), std::move(hi)} {
    if (((b_.hi - b_.lo).array() <= 0.0).any()) throw Error("geometry", "box must have positive extent in every axis");
  }
  int dim() const override { return b_.dim(); }
  bool contains(const Vec& x) const override { return b_.contains(x); }
  bool interior_contains(const Vec& x) const override {
    for (int i = 0; i < dim(); ++i)
      if (!(x[i] > b_.lo[i] && x[i] < b_.hi[i])) return false;
    return true;
  }
  double clearance(const Vec& x) const override {
    if (!contains(x)) return 0.0;
    return std::min((x - b_.lo).minCoeff(), (b_.hi - x).minCoeff());
  }
  std::optional<double> distance_to(const Vec& x) const override {
    Vec d = (b_.lo - x).cwiseMax(x - b_.hi).cwiseMax(0.0);
    return d.norm();
  }
  bool exact_clearance() const override { return true; }
  Bounds bounds() const override { return b_; }
  std::vector<Vec> feature_points() const override {
    std::vector<Vec> out;
    for (int m = 0; m < (1 << dim()); ++m) {
      Vec v(dim());
      for (int i = 0; i < dim(); ++i) v[i] = (m >> i & 1) ? b_.hi[i] : b_.lo[i];
      out.push_back(v);
    }
    return out;
  }
  std::string kind() const override { return "box"; }
  const Bounds& box() const { return b_; }

 private:
  Bounds b_;
};

/// Convex polytope {x : A x <= b}, bounded.
class Polytope : public Region {
 public:
  Polytope(Eigen::MatrixXd A, Eigen::VectorXd b) : A_(std::move(A)), b_(std::move(b)) {
    if (A_.rows() != b_.size() || A_.rows() == 0) throw Error("geometry", "polytope needs matching nonempty A and b");
    if (A_.cols() < 1 || A_.cols() > kMaxDim) throw Error("geometry", "polytope dimension must be in 1..4");
    for (int i = 0; i < A_.rows(); ++i) {
      double nrm = A_.row(i).norm();
      if (nrm == 0.0) throw Error("geometry", "polytope has a zero constraint row");
      A_.row(i) /= nrm;
      b_[i] /= nrm;
    }
    compute_vertices();
    if (verts_.empty()) throw Error("geometry", "polytope is empty or unbounded");
    bounds_ = Bounds::of_points(verts_);
  }

  /// Convex hull of 2D points, counterclockwise.
  static std::shared_ptr<Polytope> from_vertices_2d(std::vector<Vec> pts) {
    if (pts.size() < 3) throw Error("geometry", "polygon needs at least three vertices");
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) { return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]); });
    auto cross = [](const Vec& o, const Vec& a, const Vec& b) { return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]); };
    std::vector<Vec> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
      h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
      while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
      h[k++] = pts[i - 1];
    }
    h.resize(k - 1);
    if (h.size() < 3) throw Error("geometry", "polygon vertices are collinear");
    Eigen::MatrixXd A(h.size(), 2);
    Eigen::VectorXd b(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      const Vec& p = h[i];
      const Vec& q = h[(i + 1) % h.size()];
      // outward normal of a counterclockwise edge
      A(i, 0) = q[1] - p[1];
      A(i, 1) = p[0] - q[0];
      b[i] = A(i, 0) * p[0] + A(i, 1) * p[1];
    }
    return std::make_shared<Polytope>(A, b);
  }

  int dim() const override { return static_cast<int>(A_.cols()); }
  bool contains(const Vec& x) const override { return slack(x) >= 0.0; }
  bool interior_contains(const Vec& x) const override { return slack(x) > 0.0; }
  double clearance(const Vec& x) const override { return std::max(0.0, slack(x)); }
  bool exact_clearance() const override { return true; }
  Bounds bounds() const override { return bounds_; }
  std::vector<Vec> feature_points() const override { return verts_; }
  std::string kind() const override { return "polytope"; }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }

 private:
  double slack(const Vec& x) const {
    double s = std::numeric_limits<double>::infinity();
    for (int i = 0; i < A_.rows(); ++i) {
      double v = b_[i];
      for (int j = 0; j < A_.cols(); ++j) v -= A_(i, j) * x[j];
      s = std::min(s, v);
    }
    return s;
  }

  void compute_vertices() {
    const int n = dim();
    const int m = static_cast<int>(A_.rows());
    std::vector<int> idx(n);
    std::function<void(int, int)> rec = [&](int start, int depth) {
      if (depth == n) {
        Eigen::MatrixXd S(n, n);
        Eigen::VectorXd t(n);
        for (int i = 0; i < n; ++i) {
          S.row(i) = A_.row(idx[i]);
          t[i] = b_[idx[i]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
        if (lu.rank() < n) return;
        Eigen::VectorXd sol = lu.solve(t);
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = sol[i];
        if (slack(v) < -1e-9) return;
        for (const auto& w : verts_)
          if ((w - v).norm() < 1e-9) return;
        verts_.push_back(v);
        return;
      }
      for (int i = start; i < m; ++i) {
        idx[depth] = i;
        rec(i + 1, depth + 1);
      }
    };
    rec(0, 0);
  }

  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  std::vector<Vec> verts_;
  Bounds bounds_;
};

namespace detail {
/// Positive lower bound on the distance between two simple regions, or 0 if unknown.
inline double separation(const Region& a, const Region& b) {
  auto ba = dynamic_cast<const Ball*>(&a);
  auto bb = dynamic_cast<const Ball*>(&b);
  auto xa = dynamic_cast<const Box*>(&a);
  auto xb = dynamic_cast<const Box*>(&b);
  if (ba && bb) return std::max(0.0, (ba->center() - bb->center()).norm() - ba->radius() - bb->radius());
  if (xa && xb) {
    Vec gap = (xa->box().lo - xb->box().hi).cwiseMax(xb->box().lo - xa->box().hi).cwiseMax(0.0);
    return gap.norm();
  }
  if (ba && xb) return std::max(0.0, *xb->distance_to(ba->center()) - ba->radius());
  if (xa && bb) return std::max(0.0, *xa->distance_to(bb->center()) - bb->radius());
  return 0.0;
}
}  // namespace detail

/// Finite union of regions.
class Union : public Region {
 public:
  explicit Union(std::vector<RegionPtr> members) : Union(std::move(members), false) {}
  /// known_disjoint asserts that members are pairwise separated when the geometric test cannot tell.
  Union(std::vector<RegionPtr> members, bool known_disjoint) : members_(std::move(members)) {
    if (members_.empty()) throw Error("geometry", "union needs at least one member");
    disjoint_ = true;
    if (known_disjoint) return;
    for (std::size_t i = 0; i < members_.size(); ++i)
      for (std::size_t j = i + 1; j < members_.size(); ++j)
        if (detail::separation(*members_[i], *members_[j]) <= 0.0) disjoint_ = false;
  }
  int dim() const override { return members_[0]->dim(); }
  bool contains(const Vec& x) const override {
    for (const auto& m : members_)
      if (m->contains(x)) return true;
    return false;
  }
  double clearance(const Vec& x) const override {
    double lower = 0.0;
    for (const auto& m : members_) lower = std::max(lower, m->clearance(x));
    if (disjoint_) return lower;
    return std::max(lower, ray_clearance(*this, x));
  }
  bool exact_clearance() const override {
    if (!disjoint_) return false;
    for (const auto& m : members_)
      if (!m->exact_clearance()) return false;
    return true;
  }
  std::optional<double> distance_to(const Vec& x) const override {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : members_) {
      auto d = m->distance_to(x);
      if (!d) return std::nullopt;
      best = std::min(best, *d);
    }
    return best;
  }
  Bounds bounds() const override {
    Bounds b = members_[0]->bounds();
    for (const auto& m : members_) b = Bounds::hull(b, m->bounds());
    return b;
  }
  std::vector<Vec> feature_points() const override {
    std::vector<Vec> out;
    for (const auto& m : members_)
      for (auto& p : m->feature_points()) out.push_back(p);
    return out;
  }
  std::string kind() const override { return "union"; }
  const std::vector<RegionPtr>& members() const { return members_; }
  bool disjoint() const { return disjoint_; }

 private:
  std::vector<RegionPtr> members_;
  bool disjoint_ = false;
};

/// base with the interior of minus removed; closed when base is closed.
class Difference : public Region {
 public:
  Difference(RegionPtr base, RegionPtr minus) : base_(std::move(base)), minus_(std::move(minus)) {}
  int dim() const override { return base_->dim(); }
  bool contains(const Vec& x) const override { return base_->contains(x) && !minus_->interior_contains(x); }
  double clearance(const Vec& x) const override {
    if (!contains(x)) return 0.0;
    auto d = minus_->distance_to(x);
    if (!d) return ray_clearance(*this, x);
    return std::min(base_->clearance(x), *d);
  }
  bool exact_clearance() const override { return base_->exact_clearance() && minus_->distance_to(Vec::Zero(dim())).has_value(); }
  Bounds bounds() const override { return base_->bounds(); }
  std::vector<Vec> feature_points() const override {
    std::vector<Vec> out;
    for (auto& p : base_->feature_points())
      if (contains(p)) out.push_back(p);
    for (auto& p : minus_->feature_points())
      if (contains(p)) out.push_back(p);
    return out;
  }
  std::string kind() const override { return "difference"; }

 private:
  RegionPtr base_, minus_;
};

/// Homothetic image w + s (M - w).
class Dilated : public Region {
 public:
  Dilated(RegionPtr inner, Vec w, double s) : inner_(std::move(inner)), w_(std::move(w)), s_(s) {
    if (!(s > 0.0)) throw Error("enlargement", "dilation factor must be positive");
  }
  int dim() const override { return inner_->dim(); }
  bool contains(const Vec& x) const override { return inner_->contains(pre(x)); }
  bool interior_contains(const Vec& x) const override { return inner_->interior_contains(pre(x)); }
  double clearance(const Vec& x) const override { return s_ * inner_->clearance(pre(x)); }
  std::optional<double> distance_to(const Vec& x) const override {
    auto d = inner_->distance_to(pre(x));
    if (!d) return std::nullopt;
    return s_ * *d;
  }
  bool exact_clearance() const override { return inner_->exact_clearance(); }
  Bounds bounds() const override {
    Bounds b = inner_->bounds();
    return {w_ + s_ * (b.lo - w_), w_ + s_ * (b.hi - w_)};
  }
  std::vector<Vec> feature_points() const override {
    std::vector<Vec> out;
    for (auto& p : inner_->feature_points()) out.push_back(w_ + s_ * (p - w_));
    return out;
  }
  std::string kind() const override { return "dilated"; }
  Vec pre(const Vec& x) const { return w_ + (x - w_) / s_; }

 private:
  RegionPtr inner_;
  Vec w_;
  double s_;
};

/// Erosion {x : d_2(x, complement) > r}; an open set.
class Eroded : public Region {
 public:
  Eroded(RegionPtr parent, double r) : parent_(std::move(parent)), r_(r) {
    if (!(r > 0.0)) throw Error("geometry", "erosion radius must be positive");
  }
  int dim() const override { return parent_->dim(); }
  bool contains(const Vec& x) const override { return parent_->clearance(x) > r_; }
  bool interior_contains(const Vec& x) const override { return contains(x); }
  double clearance(const Vec& x) const override { return std::max(0.0, parent_->clearance(x) - r_); }
  bool exact_clearance() const override { return parent_->exact_clearance(); }
  Bounds bounds() const override { return parent_->bounds(); }
  std::string kind() const override { return "eroded"; }
  double radius() const { return r_; }
  const RegionPtr& parent() const { return parent_; }

 private:
  RegionPtr parent_;
  double r_;
};

inline std::shared_ptr<Eroded> erode(RegionPtr set, double r) { return std::make_shared<Eroded>(std::move(set), r); }

/// Union of closed grid cells marked in a boolean array (first axis fastest).
/// Closed union of the filled cells of a regular grid; cells are indexed with the first axis fastest.
class ImplicitGrid : public Region {
 public:
  ImplicitGrid(Vec lo, Vec hi, std::vector<int> shape, std::vector<bool> cells)
      : b_{std::move(lo), std::move(hi)}, shape_(std::move(shape)), cells_(std::move(cells)) {
    long total = 1;
    for (int s : shape_) {
      if (s <= 0) throw Error("geometry", "implicit grid shape must be positive");
      total *= s;
    }
    if (static_cast<int>(shape_.size()) != b_.dim() || static_cast<long>(cells_.size()) != total)
      throw Error("geometry", "implicit grid cell count does not match its shape");
    for (long idx = 0; idx < total; ++idx) (cells_[idx] ? on_ : off_).push_back(cell_box(idx));
  }
  int dim() const override { return b_.dim(); }
  bool contains(const Vec& x) const override {
    if (!b_.contains(x)) return false;
    // every cell whose closed box holds x (at most two per axis)
    const int n = dim();
    std::vector<int> k0(n), k1(n);
    for (int i = 0; i < n; ++i) {
      const double h = (b_.hi[i] - b_.lo[i]) / shape_[i];
      const double s = (x[i] - b_.lo[i]) / h;
      k1[i] = std::min(shape_[i] - 1, static_cast<int>(std::floor(s)));
      k0[i] = (k1[i] > 0 && s <= k1[i]) ? k1[i] - 1 : k1[i];
    }
    std::vector<int> k = k0;
    while (true) {
      long idx = 0, stride = 1;
      for (int i = 0; i < n; ++i) {
        idx += k[i] * stride;
        stride *= shape_[i];
      }
      if (cells_[idx]) return true;
      int i = 0;
      while (i < n && ++k[i] > k1[i]) k[i] = k0[i], ++i;
      if (i == n) return false;
    }
  }
  double clearance(const Vec& x) const override {
    if (!contains(x)) return 0.0;
    double c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i) c = std::min({c, x[i] - b_.lo[i], b_.hi[i] - x[i]});
    for (const auto& cb : off_) c = std::min(c, box_distance(cb, x));
    return c;
  }
  std::optional<double> distance_to(const Vec& x) const override {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& cb : on_) d = std::min(d, box_distance(cb, x));
    return d;
  }
  bool exact_clearance() const override { return true; }
  Bounds bounds() const override { return b_; }
  std::string kind() const override { return "implicit-grid"; }

 private:
  Bounds cell_box(long idx) const {
    Bounds c{b_.lo, b_.lo};
    for (int i = 0; i < dim(); ++i) {
      const int k = static_cast<int>(idx % shape_[i]);
      idx /= shape_[i];
      const double h = (b_.hi[i] - b_.lo[i]) / shape_[i];
      c.lo[i] = b_.lo[i] + k * h;
      c.hi[i] = b_.lo[i] + (k + 1) * h;
    }
    return c;
  }
  static double box_distance(const Bounds& c, const Vec& x) {
    return (x - x.cwiseMax(c.lo).cwiseMin(c.hi)).norm();
  }

  Bounds b_;
  std::vector<int> shape_;
  std::vector<bool> cells_;
  std::vector<Bounds> on_, off_;
};

}  // namespace lipfree
