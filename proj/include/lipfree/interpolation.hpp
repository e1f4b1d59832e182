#pragma once

#include "norm.hpp"
#include "region.hpp"

#include <array>
#include <bit>
#include <sstream>
#include <unordered_map>

namespace lipfree {

/// Cube w + [0, delta]^N. Vertex gamma (bit i set means +delta along axis i) is w + delta gamma.
struct Hypercube {
  Vec w;
  double delta = 1.0;

  int dim() const { return static_cast<int>(w.size()); }
  int vertex_count() const { return 1 << dim(); }
  Vec vertex(unsigned gamma) const {
    Vec v = w;
    for (int i = 0; i < dim(); ++i)
      if (gamma >> i & 1u) v[i] += delta;
    return v;
  }
  bool contains(const Vec& x, double tol = 1e-12) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < w[i] - tol || x[i] > w[i] + delta + tol) return false;
    return true;
  }
};

/// Multilinear weights of the 2^N vertices at local coordinates t in [0,1]^N.
inline void multilinear_weights(const double* t, int N, double* wts) {
  const int V = 1 << N;
  for (int g = 0; g < V; ++g) {
    double p = 1.0;
    for (int i = 0; i < N; ++i) p *= (g >> i & 1) ? t[i] : 1.0 - t[i];
    wts[g] = p;
  }
}

/// Interpolant at local coordinates t; vals indexed by vertex bitmask.
inline double lambda_local(const double* vals, const double* t, int N) {
  std::array<double, 1 << kMaxDim> w{};
  multilinear_weights(t, N, w.data());
  double s = 0.0;
  for (int g = 0; g < (1 << N); ++g) s += w[g] * vals[g];
  return s;
}

/// Gradient at local coordinates t, in physical units (divided by delta):
/// d/dx_j = sum over gamma with gamma_j = 0 of (f(v_{gamma + e_j}) - f(v_gamma)) / delta times the other axes' weights.
inline Vec lambda_grad_local(const double* vals, const double* t, int N, double delta) {
  Vec g = Vec::Zero(N);
  for (int j = 0; j < N; ++j) {
    double s = 0.0;
    for (int gam = 0; gam < (1 << N); ++gam) {
      if (gam >> j & 1) continue;
      double p = 1.0;
      for (int i = 0; i < N; ++i)
        if (i != j) p *= (gam >> i & 1) ? t[i] : 1.0 - t[i];
      s += p * (vals[gam | (1 << j)] - vals[gam]);
    }
    g[j] = s / delta;
  }
  return g;
}

inline std::array<double, kMaxDim> local_coords(const Hypercube& C, const Vec& x) {
  if (x.size() != C.dim()) throw Error("interpolation", "point has the wrong dimension");
  if (!C.contains(x)) throw Error("interpolation", "point outside the cube", x);
  std::array<double, kMaxDim> t{};
  for (int i = 0; i < C.dim(); ++i) t[i] = std::clamp((x[i] - C.w[i]) / C.delta, 0.0, 1.0);
  return t;
}

/// Lambda(f, C)(x) from the 2^N vertex values.
inline double lambda_eval(const std::vector<double>& vals, const Hypercube& C, const Vec& x) {
  if (static_cast<int>(vals.size()) != C.vertex_count()) throw Error("interpolation", "need one value per cube vertex");
  auto t = local_coords(C, x);
  return lambda_local(vals.data(), t.data(), C.dim());
}

inline Vec lambda_grad(const std::vector<double>& vals, const Hypercube& C, const Vec& z) {
  if (static_cast<int>(vals.size()) != C.vertex_count()) throw Error("interpolation", "need one value per cube vertex");
  auto t = local_coords(C, z);
  return lambda_grad_local(vals.data(), t.data(), C.dim(), C.delta);
}

/// Independent oracle: 1D linear interpolation applied axis by axis, last axis first.
inline double recursive_interp(std::vector<double> vals, const Hypercube& C, const Vec& x) {
  int N = C.dim();
  for (int axis = N - 1; axis >= 0; --axis) {
    const double t = (x[axis] - C.w[axis]) / C.delta;
    const std::size_t half = vals.size() / 2;
    std::vector<double> next(half);
    // vertices with bit `axis` clear occupy the lower half of the index range at this stage
    for (std::size_t g = 0; g < half; ++g) next[g] = vals[g] + t * (vals[g + half] - vals[g]);
    vals = std::move(next);
  }
  return vals[0];
}

// ---------------------------------------------------------------------------------------------
// Mesh

using Lattice = std::array<long, kMaxDim>;

/// Bitset over a box of lattice cells, allocated in tiles of 4096 cells on first write.
class TiledBits {
 public:
  TiledBits() = default;
  TiledBits(int N, const Lattice& shape) : N_(N), shape_(shape) {
    side_ = N == 1 ? 4096 : (N == 2 ? 64 : (N == 3 ? 16 : 8));
    std::size_t count = 1;
    for (int i = 0; i < N; ++i) {
      tshape_[i] = (shape[i] + side_ - 1) / side_;
      count *= static_cast<std::size_t>(tshape_[i]);
    }
    tiles_.resize(count);
  }
  bool test(const Lattice& c) const {
    auto [t, b] = split(c);
    if (t < 0 || !tiles_[t]) return false;
    return (*tiles_[t])[b >> 6] >> (b & 63) & 1u;
  }
  /// Returns true when the bit was newly set.
  bool set(const Lattice& c) {
    auto [t, b] = split(c);
    if (t < 0) throw Error("interpolation", "lattice cell outside the mesh box");
    if (!tiles_[t]) tiles_[t] = std::make_unique<std::vector<std::uint64_t>>(64, 0);
    auto& w = (*tiles_[t])[b >> 6];
    const std::uint64_t m = 1ull << (b & 63);
    if (w & m) return false;
    w |= m;
    return true;
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tiles_)
      if (t)
        for (auto w : *t) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  /// Visits set cells (offsets from the box origin), tile by tile.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t t = 0; t < tiles_.size(); ++t) {
      if (!tiles_[t]) continue;
      Lattice base{};
      std::size_t rest = t;
      for (int i = 0; i < N_; ++i) {
        base[i] = static_cast<long>(rest % static_cast<std::size_t>(tshape_[i])) * side_;
        rest /= static_cast<std::size_t>(tshape_[i]);
      }
      const auto& words = *tiles_[t];
      for (std::size_t wi = 0; wi < words.size(); ++wi) {
        std::uint64_t w = words[wi];
        while (w) {
          const int bit = std::countr_zero(w);
          w &= w - 1;
          long b = static_cast<long>(wi * 64 + bit);
          Lattice c = base;
          for (int i = 0; i < N_; ++i) {
            c[i] += b % side_;
            b /= side_;
          }
          fn(c);
        }
      }
    }
  }

 private:
  std::pair<long, long> split(const Lattice& c) const {
    long t = 0, b = 0, ts = 1, bs = 1;
    for (int i = 0; i < N_; ++i) {
      if (c[i] < 0 || c[i] >= shape_[i]) return {-1, 0};
      t += (c[i] / side_) * ts;
      b += (c[i] % side_) * bs;
      ts *= tshape_[i];
      bs *= side_;
    }
    return {t, b};
  }
  int N_ = 0;
  long side_ = 1;
  Lattice shape_{}, tshape_{};
  std::vector<std::unique_ptr<std::vector<std::uint64_t>>> tiles_;
};

/// Lattice cubes x0 + delta (k + [0,1]^N) meeting the erosion Mhat(2r), stored as a tiled bitset
/// over a box of cube indices.
class Mesh {
 public:
  int dim() const { return N_; }
  const Vec& x0() const { return x0_; }
  double delta() const { return delta_; }
  double r() const { return r_; }
  std::size_t cube_count() const { return cubes_; }
  /// |V|, the number of distinct cube vertices.
  std::size_t vertex_count() const { return vertices_; }
  const Lattice& lo() const { return lo_; }
  const Lattice& shape() const { return shape_; }

  bool has_cube(const Lattice& k) const { return cubes_bits_.test(offset(k)); }
  bool has_vertex(const Lattice& k) const { return vertex_bits_.test(offset(k)); }
  Vec point(const Lattice& k) const {
    Vec v(N_);
    for (int i = 0; i < N_; ++i) v[i] = x0_[i] + delta_ * static_cast<double>(k[i]);
    return v;
  }
  Hypercube cube(const Lattice& k) const { return {point(k), delta_}; }
  /// Dense index of a vertex in the vertex box, or -1 outside it.
  long vertex_index(const Lattice& k) const {
    long idx = 0, stride = 1;
    for (int i = 0; i < N_; ++i) {
      long c = k[i] - lo_[i];
      if (c < 0 || c > shape_[i]) return -1;
      idx += c * stride;
      stride *= shape_[i] + 1;
    }
    return idx;
  }

  /// Lexicographically smallest mesh cube containing x (faces included, 1e-12 tolerance).
  std::optional<Lattice> locate(const Vec& x) const {
    std::array<std::array<long, 2>, kMaxDim> opts{};
    std::array<int, kMaxDim> nopt{};
    for (int i = 0; i < N_; ++i) {
      const double u = (x[i] - x0_[i]) / delta_;
      const double m = std::round(u);
      if (std::abs(x[i] - (x0_[i] + delta_ * m)) <= 1e-12) {
        opts[i] = {static_cast<long>(m) - 1, static_cast<long>(m)};
        nopt[i] = 2;
      } else {
        opts[i] = {static_cast<long>(std::floor(u)), 0};
        nopt[i] = 1;
      }
    }
    std::array<int, kMaxDim> c{};
    while (true) {
      Lattice k{};
      for (int i = 0; i < N_; ++i) k[i] = opts[i][c[i]];
      if (has_cube(k)) return k;
      int i = N_ - 1;
      while (i >= 0 && ++c[i] == nopt[i]) c[i--] = 0;
      if (i < 0) return std::nullopt;
    }
  }

  /// Local coordinates of x in cube k computed from lattice offsets, exact at lattice points.
  std::array<double, kMaxDim> local(const Lattice& k, const Vec& x) const {
    std::array<double, kMaxDim> t{};
    for (int i = 0; i < N_; ++i) t[i] = std::clamp((x[i] - x0_[i]) / delta_ - static_cast<double>(k[i]), 0.0, 1.0);
    return t;
  }

  /// Visits every cube (order unspecified).
  template <class Fn>
  void for_each_cube(Fn&& fn) const {
    cubes_bits_.for_each([&](const Lattice& c) { fn(absolute(c)); });
  }
  /// Visits every vertex (order unspecified).
  template <class Fn>
  void for_each_vertex(Fn&& fn) const {
    vertex_bits_.for_each([&](const Lattice& c) { fn(absolute(c)); });
  }

 private:
  friend Mesh build_mesh(const Region& Mhat, double r, double delta, const Vec& x0, std::size_t cap);

  Lattice offset(const Lattice& k) const {
    Lattice c{};
    for (int i = 0; i < N_; ++i) c[i] = k[i] - lo_[i];
    return c;
  }
  Lattice absolute(const Lattice& c) const {
    Lattice k{};
    for (int i = 0; i < N_; ++i) k[i] = c[i] + lo_[i];
    return k;
  }

  int N_ = 0;
  Vec x0_;
  double delta_ = 0.0, r_ = 0.0;
  Lattice lo_{}, shape_{};
  TiledBits cubes_bits_, vertex_bits_;
  std::size_t cubes_ = 0, vertices_ = 0;
};

/// Default cap on the number of mesh cubes.
inline constexpr std::size_t kMeshCellCap = 300'000'000;
/// Cap on the number of bitset tiles over the mesh box.
inline constexpr double kMeshTileCap = 2e7;

/// Cubes of the lattice anchored at x0 with edge delta that meet Mhat(2r). Blocks of cubes are
/// accepted or rejected wholesale from Mhat's clearance at the block center (clearance is
/// 1-Lipschitz); undecided single cubes are probed on a 3^N sub-grid, vertices included. Every
/// accepted cube must lie in Mhat(r) at all probes.
inline Mesh build_mesh(const Region& Mhat, double r, double delta, const Vec& x0, std::size_t cap = kMeshCellCap) {
  if (!(delta > 0.0) || !(r > 0.0)) throw Error("interpolation", "mesh needs positive delta and r");
  const int N = Mhat.dim();
  if (x0.size() != N) throw Error("interpolation", "x0 has the wrong dimension");
  Mesh mesh;
  mesh.N_ = N;
  mesh.x0_ = x0;
  mesh.delta_ = delta;
  mesh.r_ = r;
  const Bounds b = Mhat.bounds();
  double cells = 1.0;
  Lattice vshape{};
  for (int i = 0; i < N; ++i) {
    mesh.lo_[i] = static_cast<long>(std::floor((b.lo[i] - x0[i]) / delta)) - 1;
    long hi = static_cast<long>(std::ceil((b.hi[i] - x0[i]) / delta)) + 1;
    mesh.shape_[i] = hi - mesh.lo_[i];
    vshape[i] = mesh.shape_[i] + 1;
    cells *= static_cast<double>(vshape[i]);
  }
  auto infeasible = [&](const std::string& what) {
    std::ostringstream os;
    os << "mesh infeasible: " << what << " (delta " << delta << ", cap " << cap << " cubes)";
    throw Error("interpolation", os.str());
  };
  if (cells / 4096.0 > kMeshTileCap) infeasible("lattice box too large");
  mesh.cubes_bits_ = TiledBits(N, mesh.shape_);
  mesh.vertex_bits_ = TiledBits(N, vshape);

  const double two_r = 2.0 * r;
  auto accept = [&](const Lattice& k) {
    if (mesh.cubes_bits_.set(mesh.offset(k)) && ++mesh.cubes_ > cap) infeasible("too many cubes");
  };
  // probe a single undecided cube
  auto probe_cube = [&](const Lattice& k) {
    bool meets = false;
    std::array<int, kMaxDim> s{};
    Vec p(N);
    std::vector<Vec> probes;
    while (true) {
      for (int i = 0; i < N; ++i) p[i] = x0[i] + delta * (static_cast<double>(k[i]) + 0.5 * s[i]);
      probes.push_back(p);
      if (Mhat.clearance(p) > two_r) meets = true;
      int i = 0;
      while (i < N && ++s[i] == 3) s[i++] = 0;
      if (i == N) break;
    }
    if (!meets) return;
    for (const auto& q : probes)
      if (!(Mhat.clearance(q) > r)) throw Error("interpolation", "mesh cube leaves Mhat(r): delta too large for r", q);
    accept(k);
  };
  // recursive block classification; block = cubes lo + [0, size)^N clipped to the box
  std::function<void(const Lattice&, long)> classify = [&](const Lattice& blo, long size) {
    Lattice ext{};
    Vec c(N);
    double hd2 = 0.0;
    for (int i = 0; i < N; ++i) {
      ext[i] = std::min(size, mesh.lo_[i] + mesh.shape_[i] - blo[i]);
      if (ext[i] <= 0) return;
      c[i] = x0[i] + delta * (static_cast<double>(blo[i]) + 0.5 * static_cast<double>(ext[i]));
      hd2 += std::pow(0.5 * delta * static_cast<double>(ext[i]), 2);
    }
    const double hd = std::sqrt(hd2);
    const double cl = Mhat.clearance(c);
    if (cl + hd <= two_r) return;
    if (cl - hd > two_r) {
      Lattice off{};
      while (true) {
        Lattice k{};
        for (int i = 0; i < N; ++i) k[i] = blo[i] + off[i];
        accept(k);
        int i = 0;
        while (i < N && ++off[i] == ext[i]) off[i++] = 0;
        if (i == N) break;
      }
      return;
    }
    bool single = true;
    for (int i = 0; i < N; ++i)
      if (ext[i] > 1) single = false;
    if (single) {
      probe_cube(blo);
      return;
    }
    const long half = (size + 1) / 2;
    std::array<int, kMaxDim> sub{};
    while (true) {
      Lattice nlo{};
      for (int i = 0; i < N; ++i) nlo[i] = blo[i] + sub[i] * half;
      classify(nlo, half);
      int i = 0;
      while (i < N && ++sub[i] == 2) sub[i++] = 0;
      if (i == N) break;
    }
  };
  long top = 1;
  for (int i = 0; i < N; ++i)
    while (top < mesh.shape_[i]) top *= 2;
  classify(mesh.lo_, top);

  mesh.cubes_bits_.for_each([&](const Lattice& c) {
    for (unsigned g = 0; g < (1u << N); ++g) {
      Lattice v = c;
      for (int i = 0; i < N; ++i) v[i] += (g >> i) & 1u;
      if (mesh.vertex_bits_.set(v)) ++mesh.vertices_;
    }
  });
  return mesh;
}

/// Coefficient table over the mesh vertices with F columns, filled on first access.
class VertexTable {
 public:
  using Factory = std::function<void(const Vec& v, double* out)>;
  VertexTable(const Mesh& mesh, int F, Factory fn) : mesh_(&mesh), F_(F), fn_(std::move(fn)) {}

  const double* at(const Lattice& k) {
    long idx = mesh_->vertex_index(k);
    if (idx < 0 || !mesh_->has_vertex(k)) throw Error("interpolation", "not a mesh vertex", mesh_->point(k));
    auto it = index_.find(idx);
    if (it != index_.end()) return values_.data() + it->second * F_;
    std::size_t slot = index_.size();
    values_.resize(values_.size() + F_);
    fn_(mesh_->point(k), values_.data() + slot * F_);
    index_.emplace(idx, slot);
    return values_.data() + slot * F_;
  }
  void fill_all() {
    mesh_->for_each_vertex([&](const Lattice& k) { at(k); });
  }
  std::size_t computed() const { return index_.size(); }
  int width() const { return F_; }
  const Mesh& mesh() const { return *mesh_; }

  /// Interpolant of every column at x; x must lie in the union of the cubes.
  void eval(const Vec& x, double* out) {
    auto k = mesh_->locate(x);
    if (!k) throw Error("interpolation", "point outside the mesh", x);
    eval_in(*k, x, out);
  }
  void eval_in(const Lattice& k, const Vec& x, double* out) {
    const int N = mesh_->dim();
    auto t = mesh_->local(k, x);
    std::array<double, 1 << kMaxDim> w{};
    multilinear_weights(t.data(), N, w.data());
    std::fill(out, out + F_, 0.0);
    for (unsigned g = 0; g < (1u << N); ++g) {
      if (w[g] == 0.0) continue;
      Lattice v = k;
      for (int i = 0; i < N; ++i) v[i] += (g >> i) & 1u;
      const double* c = at(v);
      for (int j = 0; j < F_; ++j) out[j] += w[g] * c[j];
    }
  }
  double eval(const Vec& x, int col = 0) {
    std::vector<double> out(F_);
    eval(x, out.data());
    return out[col];
  }
  /// The 2^N vertex values of column col on cube k.
  std::vector<double> cube_values(const Lattice& k, int col = 0) {
    const int N = mesh_->dim();
    std::vector<double> vals(1u << N);
    for (unsigned g = 0; g < vals.size(); ++g) {
      Lattice v = k;
      for (int i = 0; i < N; ++i) v[i] += (g >> i) & 1u;
      vals[g] = at(v)[col];
    }
    return vals;
  }

 private:
  const Mesh* mesh_;
  int F_;
  Factory fn_;
  std::unordered_map<long, std::size_t> index_;
  std::vector<double> values_;
};

/// Hat function of vertex v at x: its multilinear weight in the cube containing x, else 0.
inline double hat_eval(const Mesh& mesh, const Vec& x, const Lattice& v) {
  auto k = mesh.locate(x);
  if (!k) throw Error("interpolation", "point outside the mesh", x);
  const int N = mesh.dim();
  unsigned g = 0;
  for (int i = 0; i < N; ++i) {
    long d = v[i] - (*k)[i];
    if (d != 0 && d != 1) return 0.0;
    g |= static_cast<unsigned>(d) << i;
  }
  auto t = mesh.local(*k, x);
  std::array<double, 1 << kMaxDim> w{};
  multilinear_weights(t.data(), N, w.data());
  return w[g];
}

/// Nonzero hat weights at x, as (vertex, weight) pairs.
inline std::vector<std::pair<Lattice, double>> hat_weights(const Mesh& mesh, const Vec& x) {
  auto k = mesh.locate(x);
  if (!k) throw Error("interpolation", "point outside the mesh", x);
  const int N = mesh.dim();
  auto t = mesh.local(*k, x);
  std::array<double, 1 << kMaxDim> w{};
  multilinear_weights(t.data(), N, w.data());
  std::vector<std::pair<Lattice, double>> out;
  for (unsigned g = 0; g < (1u << N); ++g) {
    if (w[g] == 0.0) continue;
    Lattice v = *k;
    for (int i = 0; i < N; ++i) v[i] += (g >> i) & 1u;
    out.push_back({v, w[g]});
  }
  return out;
}

struct FaceCheck {
  bool pass = true;
  double worst = 0.0;
  Vec witness;
};

/// Interpolants of adjacent cubes k and k + e_axis agree on the shared face.
inline FaceCheck face_consistency_check(VertexTable& table, const Lattice& k, int axis, Rng& rng, int samples = 10, int col = 0) {
  const Mesh& mesh = table.mesh();
  Lattice k2 = k;
  k2[axis] += 1;
  if (!mesh.has_cube(k) || !mesh.has_cube(k2)) throw Error("interpolation", "face check needs two adjacent mesh cubes");
  auto A = mesh.cube(k), B = mesh.cube(k2);
  auto va = table.cube_values(k, col), vb = table.cube_values(k2, col);
  FaceCheck fc;
  for (int s = 0; s < samples; ++s) {
    Vec x = A.w;
    for (int i = 0; i < mesh.dim(); ++i) x[i] += (i == axis ? mesh.delta() : mesh.delta() * rng.uniform());
    x[axis] = B.w[axis];
    double d = std::abs(lambda_eval(va, A, x) - lambda_eval(vb, B, x));
    if (d > fc.worst) {
      fc.worst = d;
      fc.witness = x;
    }
  }
  fc.pass = fc.worst <= 1e-12;
  return fc;
}

struct InterpReport {
  double lip_bound = 0.0;
  double lip_measured = 0.0;
  double gap_bound = 0.0;
  double gap_measured = 0.0;
  long cubes_checked = 0;
  bool pass = false;
};

/// Per-cube sampled Lip(Lambda(g, C)) <= K^2 eps + Lip(g) and |Lambda(g, C) - g| <= sqrt(N) K Lip(g) delta,
/// each with the additive tolerance tol, over the listed cubes. Column col of the table holds g.
inline InterpReport interp_bounds_check(VertexTable& table, const std::function<double(const Vec&)>& g, const std::vector<Lattice>& cubes,
                                        double eps, double lip_g, const Norm& norm, double tol, Rng& rng, int per_cube = 12, int col = 0) {
  const Mesh& mesh = table.mesh();
  const int N = mesh.dim();
  const double K = norm.K();
  InterpReport rep;
  rep.lip_bound = K * K * eps + lip_g;
  rep.gap_bound = std::sqrt(static_cast<double>(N)) * K * lip_g * mesh.delta();
  for (const auto& k : cubes) {
    auto C = mesh.cube(k);
    auto vals = table.cube_values(k, col);
    std::vector<Vec> pts;
    for (unsigned v = 0; v < (1u << N); ++v) pts.push_back(C.vertex(v));
    for (int s = 0; s < per_cube; ++s) {
      Vec x = C.w;
      for (int i = 0; i < N; ++i) x[i] += C.delta * rng.uniform();
      pts.push_back(x);
    }
    std::vector<double> lv(pts.size());
    for (std::size_t a = 0; a < pts.size(); ++a) {
      lv[a] = lambda_eval(vals, C, pts[a]);
      rep.gap_measured = std::max(rep.gap_measured, std::abs(lv[a] - g(pts[a])));
    }
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t b = a + 1; b < pts.size(); ++b) {
        double d = norm(pts[a] - pts[b]);
        if (d > 0.0) rep.lip_measured = std::max(rep.lip_measured, std::abs(lv[a] - lv[b]) / d);
      }
    ++rep.cubes_checked;
  }
  rep.pass = rep.lip_measured <= rep.lip_bound + tol && rep.gap_measured <= rep.gap_bound + tol;
  return rep;
}

}  // namespace lipfree
