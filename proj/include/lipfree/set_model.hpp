#pragma once

#include "region.hpp"

#include <map>
#include <set>
#include <unordered_set>

namespace lipfree {

/// Compact set M with distinguished point x0 and sample clouds at spacing h_geo.
struct SetModel {
  RegionPtr region;
  Vec x0;
  double h_geo = 0.05;
  std::vector<Vec> interior_samples;
  /// Points of M with a point of the complement within h_geo.
  std::vector<Vec> boundary_samples;
  /// Center used by the radial candidate family for ball covers, when the set has one.
  std::optional<Vec> radial_center;
  std::string name;

  int dim() const { return region->dim(); }
  bool contains(const Vec& x) const { return region->contains(x); }
  double clearance(const Vec& x) const { return region->clearance(x); }

  /// Region bounds grown to contain every sample.
  Bounds bbox() const {
    Bounds b = region->bounds();
    for (const auto* cloud : {&interior_samples, &boundary_samples})
      for (const auto& p : *cloud) {
        b.lo = b.lo.cwiseMin(p);
        b.hi = b.hi.cwiseMax(p);
      }
    return b;
  }

  std::vector<Vec> all_samples() const {
    std::vector<Vec> out = interior_samples;
    out.insert(out.end(), boundary_samples.begin(), boundary_samples.end());
    return out;
  }

  static SetModel build(RegionPtr region, Vec x0, double h_geo, std::string name = "");
};

namespace detail {

/// Keeps at most one point per cell of a grid with the given cell size, and rejects points
/// closer than half a cell to a kept point in a neighboring cell.
class PointThinner {
 public:
  explicit PointThinner(double cell) : cell_(cell) {}
  bool insert(const Vec& p) {
    const int n = static_cast<int>(p.size());
    std::vector<long> k(n);
    for (int i = 0; i < n; ++i) k[i] = static_cast<long>(std::floor(p[i] / cell_));
    if (cells_.count(k)) return false;
    std::vector<long> q(n);
    std::vector<int> o(n, -1);
    while (true) {
      for (int i = 0; i < n; ++i) q[i] = k[i] + o[i];
      auto it = cells_.find(q);
      if (it != cells_.end() && (it->second - p).norm() < 0.5 * cell_) return false;
      int i = 0;
      while (i < n && ++o[i] > 1) o[i++] = -1;
      if (i == n) break;
    }
    cells_.emplace(k, p);
    return true;
  }

 private:
  double cell_;
  std::map<std::vector<long>, Vec> cells_;
};

}  // namespace detail

inline SetModel SetModel::build(RegionPtr region, Vec x0, double h_geo, std::string name) {
  if (!region) throw Error("geometry", "set model without region");
  if (!(h_geo > 0.0)) throw Error("geometry", "h_geo must be positive");
  if (x0.size() != region->dim()) throw Error("geometry", "x0 has the wrong dimension");
  if (!region->contains(x0)) throw Error("geometry", "x0 is not a point of the set", x0);
  SetModel m;
  m.region = region;
  m.x0 = x0;
  m.h_geo = h_geo;
  m.name = std::move(name);
  const int n = region->dim();
  const Bounds grid = region->bounds().inflated(h_geo);

  for_each_grid_point(grid, h_geo, [&](const Vec& x) {
    bool in = region->contains(x);
    if (in) m.interior_samples.push_back(x);
    for (int i = 0; i < n; ++i) {
      Vec y = x;
      y[i] += h_geo;
      if (y[i] > grid.hi[i] + 1e-12) continue;
      bool in_y = region->contains(y);
      if (in == in_y) continue;
      Vec a = in ? x : y;  // inside
      Vec b = in ? y : x;  // outside
      for (int it = 0; it < 30; ++it) {
        Vec mid = 0.5 * (a + b);
        if (region->contains(mid))
          a = mid;
        else
          b = mid;
      }
      m.boundary_samples.push_back(a);
    }
  });

  detail::PointThinner thin(0.5 * h_geo);
  std::vector<Vec> kept;
  for (const auto& p : region->feature_points())
    if (region->contains(p) && thin.insert(p)) kept.push_back(p);
  for (const auto& p : m.boundary_samples)
    if (thin.insert(p)) kept.push_back(p);
  m.boundary_samples = std::move(kept);
  // a grid point that is also a boundary sample would give near-coincident pairs
  std::set<std::vector<long>> dup;
  for (const auto& p : m.boundary_samples) {
    std::vector<long> k(n);
    Vec g(n);
    for (int i = 0; i < n; ++i) {
      k[i] = std::lround((p[i] - grid.lo[i]) / h_geo);
      g[i] = grid.lo[i] + h_geo * k[i];
    }
    if ((p - g).norm() < 1e-6 * h_geo) dup.insert(k);
  }
  if (!dup.empty()) {
    std::vector<Vec> interior;
    for (const auto& p : m.interior_samples) {
      std::vector<long> k(n);
      for (int i = 0; i < n; ++i) k[i] = std::lround((p[i] - grid.lo[i]) / h_geo);
      if (!dup.count(k)) interior.push_back(p);
    }
    m.interior_samples = std::move(interior);
  }
  if (m.interior_samples.empty() && m.boundary_samples.empty()) throw Error("geometry", "set has no samples at this h_geo");
  return m;
}

}  // namespace lipfree
