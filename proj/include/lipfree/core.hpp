#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipfree {

/// Point in R^N, N <= 4. Fixed capacity so small vectors never touch the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 4, 1>;

inline constexpr int kMaxDim = 4;

/// Error carrying the pipeline stage that raised it and an optional witness point.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what, std::optional<Vec> witness = std::nullopt)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), witness_(std::move(witness)) {}

  const std::string& stage() const { return stage_; }
  const std::optional<Vec>& witness() const { return witness_; }

 private:
  std::string stage_;
  std::optional<Vec> witness_;
};

inline Vec zeros(int n) { return Vec::Zero(n); }

inline Vec unit(int n, int i) {
  Vec e = Vec::Zero(n);
  e[i] = 1.0;
  return e;
}

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Vec make_vec(const std::vector<double>& xs) {
  Vec v(static_cast<int>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<int>(i)] = xs[i];
  return v;
}

/// Axis-aligned box [lo, hi].
struct Bounds {
  Vec lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& x, double tol = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }

  Bounds inflated(double by) const {
    Bounds b = *this;
    b.lo.array() -= by;
    b.hi.array() += by;
    return b;
  }

  double volume() const { return (hi - lo).prod(); }
  double diameter() const { return (hi - lo).norm(); }
  Vec center() const { return 0.5 * (lo + hi); }

  static Bounds of_points(const std::vector<Vec>& pts) {
    if (pts.empty()) throw Error("geometry", "bounds of empty point list");
    Bounds b{pts[0], pts[0]};
    for (const auto& p : pts) {
      b.lo = b.lo.cwiseMin(p);
      b.hi = b.hi.cwiseMax(p);
    }
    return b;
  }

  static Bounds hull(const Bounds& a, const Bounds& b) { return {a.lo.cwiseMin(b.lo), a.hi.cwiseMax(b.hi)}; }
};

/// Deterministic random source used by every sampler in the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : gen_(seed) {}

  double uniform(double a = 0.0, double b = 1.0) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }

  Vec in_box(const Bounds& b) {
    Vec x(b.dim());
    for (int i = 0; i < b.dim(); ++i) x[i] = uniform(b.lo[i], b.hi[i]);
    return x;
  }

  Vec unit_vector(int n) {
    Vec v(n);
    do {
      for (int i = 0; i < n; ++i) v[i] = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

  /// Uniform point in the Euclidean ball B(c, rad).
  Vec in_ball(const Vec& c, double rad) {
    const int n = static_cast<int>(c.size());
    return c + rad * std::pow(uniform(), 1.0 / n) * unit_vector(n);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

/// Roughly uniform directions on the Euclidean unit sphere of R^n.
inline std::vector<Vec> sphere_directions(int n, int count) {
  std::vector<Vec> out;
  if (n == 1) {
    out.push_back(make_vec({1.0}));
    out.push_back(make_vec({-1.0}));
    return out;
  }
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      double a = 2.0 * std::numbers::pi * (k + 0.5) / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return out;
  }
  if (n == 3) {
    // Fibonacci lattice
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      double z = 1.0 - 2.0 * (k + 0.5) / count;
      double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      out.push_back(make_vec({rho * std::cos(golden * k), rho * std::sin(golden * k), z}));
    }
    return out;
  }
  Rng rng(0x5eed + n);
  for (int k = 0; k < count; ++k) out.push_back(rng.unit_vector(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(unit(n, i));
    out.push_back(-unit(n, i));
  }
  return out;
}

/// Default direction counts for ray-based distance probes.
inline int default_direction_count(int n) {
  switch (n) {
    case 1: return 2;
    case 2: return 256;
    case 3: return 600;
    default: return 1200;
  }
}

/// Visit every point lo + spacing * k (k integer) inside the box.
inline void for_each_grid_point(const Bounds& b, double spacing, const std::function<void(const Vec&)>& fn) {
  const int n = b.dim();
  std::vector<long> count(n);
  for (int i = 0; i < n; ++i) count[i] = static_cast<long>(std::floor((b.hi[i] - b.lo[i]) / spacing + 1e-9)) + 1;
  std::vector<long> k(n, 0);
  Vec x(n);
  while (true) {
    for (int i = 0; i < n; ++i) x[i] = b.lo[i] + spacing * k[i];
    fn(x);
    int i = 0;
    while (i < n && ++k[i] == count[i]) k[i++] = 0;
    if (i == n) break;
  }
}

inline long grid_point_count(const Bounds& b, double spacing) {
  long total = 1;
  for (int i = 0; i < b.dim(); ++i) total *= static_cast<long>(std::floor((b.hi[i] - b.lo[i]) / spacing + 1e-9)) + 1;
  return total;
}

}  // namespace lipfree
