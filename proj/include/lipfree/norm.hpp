#pragma once

#include "core.hpp"

#include <memory>
#include <sstream>

namespace lipfree {

/// A norm on R^N together with its dual norm and the equivalence constant K,
/// the smallest K with (1/K)|x| <= |x|_1, |x|_2 <= K|x|.
class Norm {
 public:
  using Fn = std::function<double(const Vec&)>;

  Norm() = default;

  /// p-norm, p in [1, inf]; pass INFINITY for the max norm.
  static Norm lp(int dim, double p);

  /// Named custom norms: "hex" (N = 2, hexagonal unit ball) and "mix" (0.5 l1 + 0.5 l2).
  static Norm custom(int dim, const std::string& id);

  /// Arbitrary positively homogeneous convex evaluator. K and the dual are sampled.
  static Norm from_function(int dim, std::string name, Fn eval);

  double operator()(const Vec& x) const { return eval_(x); }
  double dual(const Vec& g) const { return dual_(g); }

  int dim() const { return dim_; }
  double K() const { return K_; }
  const std::string& name() const { return name_; }
  /// p for l_p norms, NaN otherwise.
  double p() const { return p_; }
  bool is_l1() const { return p_ == 1.0; }

 private:
  int dim_ = 0;
  double K_ = 1.0;
  double p_ = std::numeric_limits<double>::quiet_NaN();
  std::string name_;
  Fn eval_;
  Fn dual_;
};

inline double lp_value(const Vec& x, double p) {
  if (p == 1.0) return x.lpNorm<1>();
  if (p == 2.0) return x.norm();
  if (std::isinf(p)) return x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0;
  double m = x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0;
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]) / m, p);
  return m * std::pow(s, 1.0 / p);
}

inline double conjugate_exponent(double p) {
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(p)) return 1.0;
  return p / (p - 1.0);
}

/// Exact equivalence constant of the p-norm against l1 and l2.
inline double lp_equivalence_constant(int n, double p) {
  const double N = n;
  const double ip = std::isinf(p) ? 0.0 : 1.0 / p;
  double k = std::max(1.0, std::pow(N, 1.0 - ip));
  if (p < 2.0) k = std::max(k, std::pow(N, ip - 0.5));
  if (p > 2.0) k = std::max(k, std::pow(N, 0.5 - ip));
  return k;
}

/// Directions on the l2 sphere at roughly the given angular spacing.
inline std::vector<Vec> sphere_sample(int n, double resolution) {
  if (n == 1) return sphere_directions(1, 2);
  int count;
  if (n == 2) {
    count = static_cast<int>(std::ceil(2.0 * std::numbers::pi / resolution));
  } else {
    double surface = n == 3 ? 4.0 * std::numbers::pi : 2.0 * std::numbers::pi * std::numbers::pi;
    count = static_cast<int>(std::min(2.0e6, std::ceil(surface / std::pow(resolution, n - 1))));
  }
  return sphere_directions(n, std::max(count, 8));
}

/// Smallest sampled K satisfying the four comparisons against l1 and l2, times 1.01.
/// In one dimension the sphere {-1, 1} is sampled exhaustively and no safety factor is applied.
inline double equivalence_constant(const Norm::Fn& eval, int n, double resolution) {
  if (resolution <= 0.0) throw Error("geometry", "equivalence_constant: resolution must be positive");
  double k = 1.0;
  auto dirs = sphere_sample(n, resolution);
  // coordinate axes catch evaluators that vanish exactly on a subspace the sample may miss
  for (int i = 0; i < n; ++i) dirs.push_back(unit(n, i));
  for (const Vec& d : dirs) {
    double e = eval(d);
    if (!(e > 1e-300) || !std::isfinite(e)) throw Error("geometry", "degenerate norm: eval vanishes on the unit sphere", d);
    double l1 = d.lpNorm<1>();
    k = std::max({k, e / l1, e, l1 / e, 1.0 / e});
  }
  return n == 1 ? k : 1.01 * k;
}

inline double equivalence_constant(const Norm& norm, double resolution) {
  return equivalence_constant([&](const Vec& x) { return norm(x); }, norm.dim(), resolution);
}

/// sup over the unit sphere of g.x / |x|, sampled, times 1.01.
inline double sampled_dual(const Norm::Fn& eval, const Vec& g, const std::vector<Vec>& dirs) {
  double best = 0.0;
  for (const Vec& d : dirs) best = std::max(best, g.dot(d) / eval(d));
  return 1.01 * best;
}

inline Norm Norm::lp(int dim, double p) {
  if (dim < 1 || dim > kMaxDim) throw Error("geometry", "dimension must be in 1..4");
  if (!(p >= 1.0)) throw Error("geometry", "p-norm requires p >= 1");
  Norm nm;
  nm.dim_ = dim;
  nm.p_ = p;
  nm.K_ = lp_equivalence_constant(dim, p);
  if (std::isinf(p)) {
    nm.name_ = "linf";
  } else {
    std::ostringstream os;
    os << "l" << p;
    nm.name_ = os.str();
  }
  nm.eval_ = [p](const Vec& x) { return lp_value(x, p); };
  const double q = conjugate_exponent(p);
  nm.dual_ = [q](const Vec& g) { return lp_value(g, q); };
  return nm;
}

inline Norm Norm::from_function(int dim, std::string name, Fn eval) {
  if (dim < 1 || dim > kMaxDim) throw Error("geometry", "dimension must be in 1..4");
  Norm nm;
  nm.dim_ = dim;
  nm.name_ = std::move(name);
  nm.eval_ = eval;
  nm.K_ = equivalence_constant(eval, dim, 1e-3);
  auto dirs = std::make_shared<std::vector<Vec>>(sphere_sample(dim, dim <= 2 ? 1e-3 : 0.05));
  nm.dual_ = [eval, dirs](const Vec& g) { return sampled_dual(eval, g, *dirs); };
  return nm;
}

inline Norm Norm::custom(int dim, const std::string& id) {
  if (id == "hex") {
    if (dim != 2) throw Error("geometry", "hex norm is defined in dimension 2 only");
    return from_function(2, "hex", [](const Vec& x) {
      double m = 0.0;
      for (int k = 0; k < 3; ++k) {
        double a = k * std::numbers::pi / 3.0;
        m = std::max(m, std::abs(std::cos(a) * x[0] + std::sin(a) * x[1]));
      }
      return m;
    });
  }
  if (id == "mix") return from_function(dim, "mix", [](const Vec& x) { return 0.5 * x.lpNorm<1>() + 0.5 * x.norm(); });
  throw Error("geometry", "unknown custom norm id '" + id + "'");
}

}  // namespace lipfree
