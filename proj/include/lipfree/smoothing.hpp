#pragma once

#include "norm.hpp"

#include <array>
#include <unordered_map>

namespace lipfree {

using ScalarFn = std::function<double(const Vec&)>;

/// exp(1 / (rho2 - 1)) for rho2 < 1, else 0.
inline double bump(double rho2) { return rho2 < 1.0 ? std::exp(1.0 / (rho2 - 1.0)) : 0.0; }

struct Normalization {
  double A = 0.0;
  int nodes = 0;  // nodes per axis of the accepted refinement
};

/// A = 1 / integral of exp(1/(|x|^2 - 1)) over B(0,1), by tensor midpoint quadrature on [-1,1]^N
/// using orthant symmetry, doubling the node count until two refinements agree to tol (relative).
inline Normalization mollifier_normalize(int N, double tol = 1e-8, int max_nodes = 0) {
  if (N < 1 || N > kMaxDim) throw Error("smoothing", "mollifier dimension must be in 1..4");
  if (max_nodes <= 0) max_nodes = N <= 2 ? 4096 : (N == 3 ? 512 : 160);
  auto integrate = [N](int m) {
    // m nodes per axis over [-1, 1]; half of them in the positive orthant
    const int half = m / 2;
    const double h = 2.0 / m;
    std::array<int, kMaxDim> k{};
    double sum = 0.0;
    while (true) {
      double rho2 = 0.0;
      for (int i = 0; i < N; ++i) rho2 += std::pow(h * (k[i] + 0.5), 2);
      sum += bump(rho2);
      int i = 0;
      while (i < N && ++k[i] == half) k[i++] = 0;
      if (i == N) break;
    }
    return sum * std::pow(2.0, N) * std::pow(h, N);
  };
  double prev = integrate(16);
  for (int m = 32; m <= max_nodes; m *= 2) {
    double cur = integrate(m);
    if (std::abs(cur - prev) <= tol * std::abs(cur)) return {1.0 / cur, m};
    prev = cur;
  }
  throw Error("smoothing", "mollifier quadrature did not converge within the refinement cap");
}

/// Cached normalization constant for dimension N.
inline double mollifier_constant(int N) {
  static std::array<double, kMaxDim + 1> cache{};
  if (cache[N] == 0.0) cache[N] = mollifier_normalize(N).A;
  return cache[N];
}

/// eta_s(x) = s^{-N} A exp(1/(|x/s|^2 - 1)), supported in B(0, s).
class Mollifier {
 public:
  Mollifier(int N, double s) : N_(N), s_(s), A_(mollifier_constant(N)) {
    if (!(s > 0.0)) throw Error("smoothing", "mollifier scale must be positive");
    scale_ = A_ / std::pow(s, N);
  }
  double operator()(const Vec& x) const { return scale_ * bump(x.squaredNorm() / (s_ * s_)); }
  Vec grad(const Vec& x) const {
    const double rho2 = x.squaredNorm() / (s_ * s_);
    if (rho2 >= 1.0) return Vec::Zero(x.size());
    const double e = scale_ * std::exp(1.0 / (rho2 - 1.0));
    return (-2.0 * e / (s_ * s_ * (rho2 - 1.0) * (rho2 - 1.0))) * x;
  }
  int dim() const { return N_; }
  double scale() const { return s_; }
  double A() const { return A_; }

 private:
  int N_;
  double s_, A_, scale_;
};

/// Default quadrature nodes per axis across the support diameter 2r.
inline int default_quad_nodes(int N) {
  switch (N) {
    case 1:
    case 2: return 25;
    case 3: return 15;
    default: return 10;
  }
}

/// Values of a family of F functions at lattice nodes, computed on first use.
class NodeCache {
 public:
  using BatchFn = std::function<void(const Vec& z, double* out)>;
  NodeCache(int F, BatchFn fn, std::size_t capacity = 400000) : F_(F), fn_(std::move(fn)), cap_(capacity) { index_.reserve(1 << 16); }
  const double* get(std::uint64_t key, const Vec& z) {
    auto it = index_.find(key);
    if (it != index_.end()) return values_.data() + static_cast<std::size_t>(it->second) * F_;
    if (index_.size() >= cap_) clear();
    std::uint32_t slot = static_cast<std::uint32_t>(index_.size());
    values_.resize(values_.size() + F_);
    fn_(z, values_.data() + static_cast<std::size_t>(slot) * F_);
    index_.emplace(key, slot);
    ++evaluations_;
    return values_.data() + static_cast<std::size_t>(slot) * F_;
  }
  void clear() {
    index_.clear();
    values_.clear();
  }
  int width() const { return F_; }
  long evaluations() const { return evaluations_; }

 private:
  int F_;
  BatchFn fn_;
  std::size_t cap_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
  std::vector<double> values_;
  long evaluations_ = 0;
};

/// Quadrature of eta_r * f on the fixed lattice z_k = anchor + h (k + 1/2), h = 2r/m,
/// normalized by the discrete weight sum (Shepard form):
///   f_r(x) = sum_k eta_r(x - z_k) f(z_k) / sum_k eta_r(x - z_k).
/// Constants are reproduced exactly and |f_r(x) - f(x)| <= Lip(f) max_k |x - z_k|.
class Smoother {
 public:
  Smoother(int N, double r, int nodes_per_axis, Vec anchor)
      : N_(N), r_(r), m_(nodes_per_axis), anchor_(std::move(anchor)), eta_(N, r) {
    if (nodes_per_axis < 2) throw Error("smoothing", "quadrature needs at least two nodes per axis");
    if (anchor_.size() != N) throw Error("smoothing", "anchor has the wrong dimension");
    h_ = 2.0 * r / m_;
    bits_ = std::min(21, 64 / N);
  }

  int dim() const { return N_; }
  double r() const { return r_; }
  double h() const { return h_; }
  int nodes_per_axis() const { return m_; }
  const Vec& anchor() const { return anchor_; }
  const Mollifier& mollifier() const { return eta_; }

  /// Calls fn(z, key, e, de) for every node z with |x - z|_2 < r, where e = exp(1/(rho^2 - 1))
  /// (unnormalized) and de its gradient with respect to x.
  template <class Fn>
  void visit(const Vec& x, Fn&& fn) const {
    std::array<long, kMaxDim> lo{}, hi{}, k{};
    for (int i = 0; i < N_; ++i) {
      lo[i] = static_cast<long>(std::ceil((x[i] - r_ - anchor_[i]) / h_ - 0.5));
      hi[i] = static_cast<long>(std::floor((x[i] + r_ - anchor_[i]) / h_ - 0.5));
      if (hi[i] < lo[i]) return;
      k[i] = lo[i];
    }
    const double inv_r2 = 1.0 / (r_ * r_);
    Vec z(N_), de(N_);
    std::array<double, kMaxDim> d{};
    while (true) {
      double rho2 = 0.0;
      for (int i = 0; i < N_; ++i) {
        z[i] = anchor_[i] + h_ * (k[i] + 0.5);
        d[i] = x[i] - z[i];
        rho2 += d[i] * d[i];
      }
      rho2 *= inv_r2;
      if (rho2 < 1.0) {
        const double q = rho2 - 1.0;
        const double e = std::exp(1.0 / q);
        const double c = -2.0 * e * inv_r2 / (q * q);
        for (int i = 0; i < N_; ++i) de[i] = c * d[i];
        fn(z, key(k), e, de);
      }
      int i = 0;
      while (i < N_ && ++k[i] > hi[i]) {
        k[i] = lo[i];
        ++i;
      }
      if (i == N_) break;
    }
  }

  std::uint64_t key(const std::array<long, kMaxDim>& k) const {
    const long off = 1L << (bits_ - 1);
    std::uint64_t out = 0;
    for (int i = 0; i < N_; ++i) {
      long v = k[i] + off;
      if (v < 0 || v >= (1L << bits_)) throw Error("smoothing", "quadrature lattice index out of range");
      out = (out << bits_) | static_cast<std::uint64_t>(v);
    }
    return out;
  }

  /// f_r(x) for a single function.
  double average(const ScalarFn& f, const Vec& x) const {
    double num = 0.0, den = 0.0;
    visit(x, [&](const Vec& z, std::uint64_t, double e, const Vec&) {
      num += e * f(z);
      den += e;
    });
    if (!(den > 0.0)) throw Error("smoothing", "no quadrature node inside the support", x);
    return num / den;
  }

  /// Gradient of f_r: sum_k de_k (f(z_k) - f_r(x)) / sum_k e_k.
  Vec average_grad(const ScalarFn& f, const Vec& x) const {
    std::vector<double> fe;
    std::vector<Vec> des;
    double num = 0.0, den = 0.0;
    visit(x, [&](const Vec& z, std::uint64_t, double e, const Vec& de) {
      double v = f(z);
      fe.push_back(v);
      des.push_back(de);
      num += e * v;
      den += e;
    });
    if (!(den > 0.0)) throw Error("smoothing", "no quadrature node inside the support", x);
    const double s = num / den;
    Vec g = Vec::Zero(N_);
    for (std::size_t k = 0; k < fe.size(); ++k) g += (fe[k] - s) * des[k];
    return g / den;
  }

  /// f_r(x) for every function of a node cache at once.
  void average_batch(NodeCache& cache, const Vec& x, double* out) const {
    const int F = cache.width();
    std::fill(out, out + F, 0.0);
    double den = 0.0;
    visit(x, [&](const Vec& z, std::uint64_t key, double e, const Vec&) {
      const double* v = cache.get(key, z);
      for (int j = 0; j < F; ++j) out[j] += e * v[j];
      den += e;
    });
    if (!(den > 0.0)) throw Error("smoothing", "no quadrature node inside the support", x);
    for (int j = 0; j < F; ++j) out[j] /= den;
  }

  /// Quadrature of eta_r over its support: h^N A r^{-N} sum_k e_k. Equals 1 up to the quadrature error.
  double weight_sum(const Vec& x) const {
    double den = 0.0;
    visit(x, [&](const Vec&, std::uint64_t, double e, const Vec&) { den += e; });
    return den * std::pow(h_, N_) * eta_.A() / std::pow(r_, N_);
  }

  /// Jacobian of the first-moment defect x -> sum_k w_k(x) z_k - x.
  Eigen::MatrixXd moment_defect_jacobian(const Vec& x) const {
    double den = 0.0;
    Vec mom = Vec::Zero(N_);
    std::vector<Vec> zs, des;
    visit(x, [&](const Vec& z, std::uint64_t, double e, const Vec& de) {
      den += e;
      mom += e * z;
      zs.push_back(z);
      des.push_back(de);
    });
    mom /= den;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N_, N_);
    for (std::size_t k = 0; k < zs.size(); ++k) J += (zs[k] - mom) * des[k].transpose();
    J /= den;
    J -= Eigen::MatrixXd::Identity(N_, N_);
    return J;
  }

  /// Declared quadrature slack 2 K^2 sup |J_D|_F, the sup taken over a sample of one lattice cell
  /// (the scheme is periodic with the lattice).
  double quad_slack(double K) const {
    Rng rng(0x51ac);
    const int samples = N_ <= 2 ? 64 : 24;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      Vec x(N_);
      for (int i = 0; i < N_; ++i) x[i] = anchor_[i] + h_ * rng.uniform();
      worst = std::max(worst, moment_defect_jacobian(x).norm());
    }
    return 2.0 * K * K * worst;
  }

  /// max |weight_sum - 1| over a sample of one cell.
  double quad_tol() const {
    Rng rng(0x70e);
    double worst = 0.0;
    for (int s = 0; s < 16; ++s) {
      Vec x(N_);
      for (int i = 0; i < N_; ++i) x[i] = anchor_[i] + h_ * rng.uniform();
      worst = std::max(worst, std::abs(weight_sum(x) - 1.0));
    }
    return worst;
  }

 private:
  int N_;
  double r_;
  int m_;
  Vec anchor_;
  Mollifier eta_;
  double h_ = 0.0;
  int bits_ = 16;
};

/// f_r(x) with a lattice anchored at x0.
inline double convolve(const ScalarFn& f, double r, const Vec& x, const Vec& x0, int nodes_per_axis = 0) {
  const int N = static_cast<int>(x.size());
  Smoother sm(N, r, nodes_per_axis > 0 ? nodes_per_axis : default_quad_nodes(N), x0);
  return sm.average(f, x);
}

/// S_r f = f_r - f_r(x0).
class SmoothedFunction {
 public:
  SmoothedFunction(ScalarFn f, std::shared_ptr<const Smoother> sm, Vec x0) : f_(std::move(f)), sm_(std::move(sm)), x0_(std::move(x0)) {
    fr_x0_ = sm_->average(f_, x0_);
  }
  double operator()(const Vec& x) const { return sm_->average(f_, x) - fr_x0_; }
  Vec grad(const Vec& x) const { return sm_->average_grad(f_, x); }
  double raw(const Vec& x) const { return sm_->average(f_, x); }
  double fr_x0() const { return fr_x0_; }
  const Vec& x0() const { return x0_; }
  const Smoother& smoother() const { return *sm_; }
  const ScalarFn& source() const { return f_; }

 private:
  ScalarFn f_;
  std::shared_ptr<const Smoother> sm_;
  Vec x0_;
  double fr_x0_ = 0.0;
};

inline SmoothedFunction smooth(ScalarFn f, std::shared_ptr<const Smoother> sm, Vec x0) {
  return SmoothedFunction(std::move(f), std::move(sm), std::move(x0));
}

inline double smooth_eval(const SmoothedFunction& sf, const Vec& x) { return sf(x); }
inline Vec smooth_grad(const SmoothedFunction& sf, const Vec& x) { return sf.grad(x); }

struct SmoothingReport {
  double lip_input = 0.0;
  double lip_smoothed = 0.0;
  double worst_gap = 0.0;
  double gap_bound = 0.0;
  double quad_slack = 0.0;
  Vec worst_gap_at;
  bool lip_pass = false;
  bool gap_pass = false;
  bool pass() const { return lip_pass && gap_pass; }
};

/// Checks Lip(S_r f) <= Lip(f)(1 + 1e-3) + quad_slack and |S_r f - f| <= 2 Lip(f) K r (1 + 1e-3) + quad_slack
/// on the samples. lip_f <= 0 means estimate Lip(f) over the samples.
inline SmoothingReport smoothing_bounds_check(const SmoothedFunction& sf, const std::vector<Vec>& samples, const Norm& norm,
                                              double lip_f = -1.0) {
  SmoothingReport rep;
  rep.quad_slack = sf.smoother().quad_slack(norm.K());
  const auto& f = sf.source();
  std::vector<double> fv(samples.size()), sv(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    fv[i] = f(samples[i]);
    sv[i] = sf(samples[i]);
  }
  double est = 0.0;
  for (std::size_t a = 0; a < samples.size(); ++a)
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      double d = norm(samples[a] - samples[b]);
      if (d <= 0.0) continue;
      est = std::max(est, std::abs(fv[a] - fv[b]) / d);
      rep.lip_smoothed = std::max(rep.lip_smoothed, std::abs(sv[a] - sv[b]) / d);
    }
  rep.lip_input = lip_f > 0.0 ? lip_f : est;
  rep.gap_bound = 2.0 * rep.lip_input * norm.K() * sf.smoother().r();
  // compared against f - f(x0), since S_r f vanishes at x0
  const double f0 = f(sf.x0());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double gap = std::abs(sv[i] - (fv[i] - f0));
    if (gap > rep.worst_gap) {
      rep.worst_gap = gap;
      rep.worst_gap_at = samples[i];
    }
  }
  rep.lip_pass = rep.lip_smoothed <= rep.lip_input * (1.0 + 1e-3) + rep.quad_slack;
  rep.gap_pass = rep.worst_gap <= rep.gap_bound * (1.0 + 1e-3) + rep.quad_slack;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Uniform differentiability

/// sup over |a - b|_2 = delta of |D eta_r(a) - D eta_r(b)|_2, using radial symmetry: a = (rho, 0),
/// b = a + delta (cos phi, sin phi) in a coordinate plane. Times the safety factor.
inline double omega_measure(int N, double r, double delta, int rho_steps = 400, int phi_steps = 64, double safety = 1.2) {
  Mollifier eta(N, r);
  const int n2 = std::min(N, 2);
  double worst = 0.0;
  for (int i = 0; i <= rho_steps; ++i) {
    Vec a = Vec::Zero(N);
    a[0] = (r + delta) * i / rho_steps;
    const Vec ga = eta.grad(a);
    const int phis = n2 == 1 ? 1 : phi_steps;
    for (int j = 0; j <= phis; ++j) {
      double phi = std::numbers::pi * j / std::max(1, phis);
      Vec b = a;
      b[0] += delta * std::cos(phi);
      if (n2 == 2) b[1] += delta * std::sin(phi);
      worst = std::max(worst, (eta.grad(b) - ga).norm());
    }
  }
  return safety * worst;
}

struct DiffModulus {
  double r = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double A_M = 0.0;
  double K = 1.0;
  /// table of arguments t_j (Euclidean) and measured omega(t_j), nondecreasing
  std::vector<double> table_t;
  std::vector<double> table_omega;
  bool warning = false;
};

/// Largest delta = t_j / K with omega(t_j) A_M <= eps, where t_j runs over 32 log-spaced
/// values up to K r and A_M is the volume of the bounding box of the enlarged set.
inline DiffModulus differentiability_modulus(int N, double r, double eps, const Bounds& mhat_bbox, double K = 1.0) {
  if (!(eps > 0.0)) throw Error("smoothing", "differentiability target must be positive");
  DiffModulus dm;
  dm.r = r;
  dm.eps = eps;
  dm.K = K;
  dm.A_M = mhat_bbox.volume();
  const int entries = 32;
  double running = 0.0;
  for (int j = 0; j < entries; ++j) {
    double t = K * r * std::pow(10.0, -6.0 * (entries - 1 - j) / (entries - 1));
    running = std::max(running, omega_measure(N, r, t));
    dm.table_t.push_back(t);
    dm.table_omega.push_back(running);
  }
  dm.delta = -1.0;
  for (int j = entries - 1; j >= 0; --j)
    if (dm.table_omega[j] * dm.A_M <= eps) {
      dm.delta = dm.table_t[j] / K;
      break;
    }
  if (dm.delta < 0.0) {
    dm.delta = dm.table_t[0] / K;
    dm.warning = true;
  }
  return dm;
}

/// max over probes of |g(x + h) - g(x) - Dg(x)[h]| / |h|.
inline double uniform_residual(const std::function<double(const Vec&)>& g, const std::function<Vec(const Vec&)>& dg,
                               const std::vector<std::pair<Vec, Vec>>& probes, const Norm& norm) {
  double worst = 0.0;
  for (const auto& [x, h] : probes) {
    double nh = norm(h);
    if (nh <= 0.0) continue;
    worst = std::max(worst, std::abs(g(x + h) - g(x) - dg(x).dot(h)) / nh);
  }
  return worst;
}

}  // namespace lipfree
