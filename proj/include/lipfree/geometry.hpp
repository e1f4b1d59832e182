#pragma once

#include "norm.hpp"
#include "set_model.hpp"

#include <queue>

namespace lipfree {

/// Result of the grid test for downwards closure relative to U(x, 2r) and u.
struct DownwardsCertificate {
  Vec x;
  double r = 0.0;
  Vec u;
  double resolution = 0.0;
  bool pass = false;
  long tested = 0;
  /// On failure: y in U and M, and t > 0 with y - t u in U but not in the interior of M.
  std::optional<Vec> witness_y;
  double witness_t = 0.0;
};

/// Orthonormal basis whose first vector is u.
inline std::vector<Vec> frame_from(const Vec& u) {
  const int n = static_cast<int>(u.size());
  std::vector<Vec> basis{u};
  for (int i = 0; i < n && static_cast<int>(basis.size()) < n; ++i) {
    Vec e = unit(n, i);
    for (const auto& b : basis) e -= e.dot(b) * b;
    if (e.norm() > 1e-6) basis.push_back(e / e.norm());
  }
  return basis;
}

/// Grid test of Def. "downwards closed": scan lines parallel to u through U(x, 2r) at spacing
/// `resolution`; once a line has met M, every later point (further along -u) inside U must be an
/// interior point of M.
inline DownwardsCertificate is_downwards_closed_relative(const SetModel& set, const Vec& x, double r, const Vec& u,
                                                         double resolution) {
  if (std::abs(u.norm() - 1.0) > 1e-12) throw Error("geometry", "direction u must be a Euclidean unit vector");
  if (!(r > 0.0)) throw Error("geometry", "certificate radius must be positive");
  if (!(resolution > 0.0) || resolution > set.h_geo)
    throw Error("geometry", "certificate resolution must be positive and no coarser than h_geo");
  DownwardsCertificate cert;
  cert.x = x;
  cert.r = r;
  cert.u = u;
  cert.resolution = resolution;
  const int n = set.dim();
  const double R = 2.0 * r;
  const auto frame = frame_from(u);
  const int m = static_cast<int>(std::floor(R / resolution));

  // offsets in the hyperplane orthogonal to u
  std::vector<int> k(std::max(0, n - 1), -m);
  while (true) {
    Vec off = Vec::Zero(n);
    double off2 = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      off += (k[i] * resolution) * frame[i + 1];
      off2 += std::pow(k[i] * resolution, 2);
    }
    if (off2 < R * R) {
      const double half = std::sqrt(R * R - off2);
      const int steps = static_cast<int>(std::floor(half / resolution));
      std::optional<Vec> first_in;
      double first_s = 0.0;
      for (int j = steps; j >= -steps; --j) {
        const double s = j * resolution;
        if (std::abs(s) >= half) continue;
        Vec p = x + off + s * u;
        ++cert.tested;
        if (first_in) {
          if (!set.region->interior_contains(p)) {
            cert.pass = false;
            cert.witness_y = first_in;
            cert.witness_t = first_s - s;
            return cert;
          }
        } else if (set.contains(p)) {
          first_in = p;
          first_s = s;
        }
      }
    }
    int i = 0;
    while (i < n - 1 && ++k[i] > m) k[i++] = -m;
    if (i >= n - 1) break;
  }
  // lines through boundary samples: a u tangent to a flat piece of the boundary keeps points of
  // that piece on the boundary, which lattice lines offset from it never see
  for (const auto& b : set.boundary_samples) {
    if ((b - x).norm() >= R || !set.contains(b)) continue;
    for (double t : {0.25 * resolution, 0.5 * resolution}) {
      for (double tt = t; (b - tt * u - x).norm() < R; tt += resolution) {
        ++cert.tested;
        if (!set.region->interior_contains(b - tt * u)) {
          cert.pass = false;
          cert.witness_y = b;
          cert.witness_t = tt;
          return cert;
        }
      }
    }
  }
  cert.pass = true;
  return cert;
}

struct StarKernelResult {
  bool pass = false;
  /// Largest verified radius rho with B(w, rho) inside the star kernel.
  double margin = 0.0;
  std::optional<Vec> witness;
};

/// Tests segments from points of a small ball around w to every boundary sample.
inline StarKernelResult star_kernel_contains(const SetModel& set, const Vec& w, double resolution) {
  if (!set.contains(w)) throw Error("geometry", "star kernel center is not in the set", w);
  if (!(resolution > 0.0)) throw Error("geometry", "star kernel resolution must be positive");
  const int n = set.dim();
  const auto dirs = sphere_directions(n, n == 1 ? 2 : (n == 2 ? 16 : 32));
  StarKernelResult res;
  auto segment_ok = [&](const Vec& a, const Vec& b) -> bool {
    const double len = (b - a).norm();
    const int steps = std::max(1, static_cast<int>(std::ceil(len / resolution)));
    for (int s = 0; s < steps; ++s) {
      Vec p = a + (static_cast<double>(s) / steps) * (b - a);
      if (!set.contains(p)) {
        res.witness = p;
        return false;
      }
    }
    return true;
  };
  double rho = 0.99 * set.clearance(w);
  for (int attempt = 0; attempt < 8 && rho > 0.0; ++attempt, rho *= 0.5) {
    std::vector<Vec> starts{w};
    for (const auto& d : dirs) starts.push_back(w + rho * d);
    bool ok = true;
    for (const auto& y : set.boundary_samples) {
      for (const auto& a : starts)
        if (!segment_ok(a, y)) {
          ok = false;
          break;
        }
      if (!ok) break;
    }
    if (ok) {
      res.pass = true;
      res.margin = rho;
      res.witness.reset();
      return res;
    }
  }
  return res;
}

/// Region restricted to one flood-fill label of a parent region.
class ComponentRegion : public Region {
 public:
  ComponentRegion(RegionPtr parent, Bounds grid, double spacing, std::shared_ptr<const std::vector<int>> labels,
                  std::vector<long> counts, int id, Bounds own)
      : parent_(std::move(parent)), grid_(std::move(grid)), h_(spacing), labels_(std::move(labels)), counts_(std::move(counts)),
        id_(id), own_(std::move(own)) {}
  int dim() const override { return parent_->dim(); }
  bool contains(const Vec& x) const override { return parent_->contains(x) && label_near(x) == id_; }
  double clearance(const Vec& x) const override { return contains(x) ? parent_->clearance(x) : 0.0; }
  bool exact_clearance() const override { return parent_->exact_clearance(); }
  Bounds bounds() const override { return own_; }
  std::vector<Vec> feature_points() const override {
    std::vector<Vec> out;
    for (auto& p : parent_->feature_points())
      if (contains(p)) out.push_back(p);
    return out;
  }
  std::string kind() const override { return "component"; }

 private:
  int label_near(const Vec& x) const {
    const int n = dim();
    std::vector<long> base(n);
    for (int i = 0; i < n; ++i) base[i] = static_cast<long>(std::floor((x[i] - grid_.lo[i]) / h_));
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int reach = 2;
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 2 * reach + 2;
    for (int c = 0; c < total; ++c) {
      int rem = c;
      long idx = 0, stride = 1;
      double d2 = 0.0;
      bool inside = true;
      for (int i = 0; i < n; ++i) {
        long k = base[i] - reach + rem % (2 * reach + 2);
        rem /= 2 * reach + 2;
        if (k < 0 || k >= counts_[i]) {
          inside = false;
          break;
        }
        d2 += std::pow(grid_.lo[i] + k * h_ - x[i], 2);
        idx += k * stride;
        stride *= counts_[i];
      }
      if (!inside) continue;
      int lab = (*labels_)[idx];
      if (lab >= 0 && d2 < best_d) {
        best_d = d2;
        best = lab;
      }
    }
    return best;
  }

  RegionPtr parent_;
  Bounds grid_;
  double h_;
  std::shared_ptr<const std::vector<int>> labels_;
  std::vector<long> counts_;
  int id_;
  Bounds own_;
};

struct ComponentSplit {
  std::vector<SetModel> parts;
  /// Minimum working-norm distance between boundary samples of different components (inf if one).
  double alpha = std::numeric_limits<double>::infinity();
  /// min(alpha, 0.99), the separation used by cross-component gluing.
  double alpha_eff = 0.99;
  double resolution = 0.0;
};

/// Flood fill of the membership grid with axis neighbours.
inline ComponentSplit connected_components(const SetModel& set, const Norm& norm, double resolution, int max_components = 64) {
  if (!(resolution > 0.0)) throw Error("geometry", "component resolution must be positive");
  const int n = set.dim();
  const Bounds grid = set.region->bounds().inflated(resolution);
  std::vector<long> counts(n);
  long total = 1;
  for (int i = 0; i < n; ++i) {
    counts[i] = static_cast<long>(std::floor((grid.hi[i] - grid.lo[i]) / resolution + 1e-9)) + 1;
    total *= counts[i];
  }
  if (total > 50'000'000) throw Error("geometry", "component grid too large for this resolution");
  std::vector<char> in(total, 0);
  std::vector<long> stride(n, 1);
  for (int i = 1; i < n; ++i) stride[i] = stride[i - 1] * counts[i - 1];
  auto coords = [&](long idx) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      x[i] = grid.lo[i] + resolution * ((idx / stride[i]) % counts[i]);
    }
    return x;
  };
  for (long idx = 0; idx < total; ++idx) in[idx] = set.contains(coords(idx)) ? 1 : 0;

  auto labels = std::make_shared<std::vector<int>>(total, -1);
  int ncomp = 0;
  std::vector<Bounds> own;
  for (long start = 0; start < total; ++start) {
    if (!in[start] || (*labels)[start] >= 0) continue;
    if (ncomp >= max_components)
      throw Error("geometry", "more than " + std::to_string(max_components) + " components; resolution too coarse or set pathological",
                  coords(start));
    std::queue<long> q;
    q.push(start);
    (*labels)[start] = ncomp;
    Bounds b{coords(start), coords(start)};
    while (!q.empty()) {
      long idx = q.front();
      q.pop();
      Vec p = coords(idx);
      b.lo = b.lo.cwiseMin(p);
      b.hi = b.hi.cwiseMax(p);
      for (int i = 0; i < n; ++i) {
        long ki = (idx / stride[i]) % counts[i];
        for (int s : {-1, 1}) {
          long kj = ki + s;
          if (kj < 0 || kj >= counts[i]) continue;
          long nb = idx + s * stride[i];
          if (in[nb] && (*labels)[nb] < 0) {
            (*labels)[nb] = ncomp;
            q.push(nb);
          }
        }
      }
    }
    own.push_back(b.inflated(resolution));
    ++ncomp;
  }
  if (ncomp == 0) throw Error("geometry", "no components: the set has no grid points at this resolution");

  ComponentSplit out;
  out.resolution = resolution;
  if (ncomp == 1) {
    out.parts.push_back(set);
    return out;
  }

  // Disjoint unions whose members line up with the flood-fill labels keep their exact members.
  std::vector<RegionPtr> regions(ncomp);
  if (auto u = std::dynamic_pointer_cast<const Union>(set.region); u && u->disjoint() && static_cast<int>(u->members().size()) == ncomp) {
    for (const auto& mem : u->members()) {
      for (long idx = 0; idx < total; ++idx)
        if ((*labels)[idx] >= 0 && mem->contains(coords(idx))) {
          regions[(*labels)[idx]] = mem;
          break;
        }
    }
  }
  for (int c = 0; c < ncomp; ++c)
    if (!regions[c]) regions[c] = std::make_shared<ComponentRegion>(set.region, grid, resolution, labels, counts, c, own[c]);

  for (int c = 0; c < ncomp; ++c) {
    Vec x0;
    if (regions[c]->contains(set.x0)) {
      x0 = set.x0;
    } else {
      double best = -1.0;
      for (long idx = 0; idx < total; ++idx) {
        if ((*labels)[idx] != c) continue;
        Vec p = coords(idx);
        double cl = set.clearance(p);
        if (cl > best) {
          best = cl;
          x0 = p;
        }
      }
    }
    auto part = SetModel::build(regions[c], x0, set.h_geo, set.name + "#" + std::to_string(c));
    if (set.radial_center && regions[c]->contains(*set.radial_center)) part.radial_center = set.radial_center;
    out.parts.push_back(std::move(part));
  }
  for (int a = 0; a < ncomp; ++a)
    for (int b = a + 1; b < ncomp; ++b)
      for (const auto& p : out.parts[a].boundary_samples)
        for (const auto& q : out.parts[b].boundary_samples) out.alpha = std::min(out.alpha, norm(p - q));
  out.alpha_eff = std::min(out.alpha, 0.99);
  return out;
}

/// max over pairs of |f(x) - f(y)| / |x - y|.
inline double estimate_lipschitz(const std::function<double(const Vec&)>& f, const std::vector<Vec>& points, const Norm& norm) {
  if (points.size() < 2) throw Error("geometry", "estimate_lipschitz needs at least two points");
  std::vector<double> v(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    v[i] = f(points[i]);
    if (!std::isfinite(v[i])) throw Error("geometry", "function is not finite at a sample point", points[i]);
  }
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      double d = norm(points[i] - points[j]);
      double df = std::abs(v[i] - v[j]);
      if (d == 0.0) {
        if (df != 0.0) throw Error("geometry", "coincident points with different values", points[i]);
        continue;
      }
      best = std::max(best, df / d);
    }
  return best;
}

/// One randomized instance of the convex-hull avoidance property: for a set downwards closed
/// relative to a convex ball U and directions us, points x + t_i u_i outside M (x outside int M)
/// have convex hulls missing M. Returns the first convex combination found in M, if any.
inline std::optional<Vec> convex_avoidance_trial(const SetModel& set, const Vec& center, double radius, const std::vector<Vec>& us,
                                                 Rng& rng, int combos = 20) {
  const int n = set.dim();
  auto in_U = [&](const Vec& p) { return (p - center).norm() < radius; };
  Vec x;
  for (int tries = 0;; ++tries) {
    if (tries > 10000) throw Error("geometry", "could not sample x in U outside the interior of M");
    x = rng.in_ball(center, radius);
    if (in_U(x) && !set.region->interior_contains(x)) break;
  }
  std::vector<Vec> pts;
  for (const auto& u : us) {
    for (int tries = 0; tries < 200; ++tries) {
      double t = rng.uniform(0.0, 2.0 * radius);
      Vec xi = x + t * u;
      if (t > 0.0 && in_U(xi) && !set.contains(xi)) {
        pts.push_back(xi);
        break;
      }
    }
  }
  if (pts.empty()) return std::nullopt;
  for (int c = 0; c < combos; ++c) {
    std::vector<double> lam(pts.size());
    double s = 0.0;
    for (auto& l : lam) s += (l = -std::log(rng.uniform(1e-12, 1.0)));
    Vec y = Vec::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i) y += (lam[i] / s) * pts[i];
    if (set.contains(y)) return y;
  }
  return std::nullopt;
}

}  // namespace lipfree
