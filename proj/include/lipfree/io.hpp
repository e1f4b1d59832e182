#pragma once

#include "pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace lipfree {

using json = nlohmann::json;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Lattice& k, int N) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(k[i]);
  return a;
}

inline Vec vec_from_json(const json& j) {
  if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) throw Error("io", "expected a coordinate array of length 1..4");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("io", path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------------------------
// Sets

/// Region from a JSON record: ball {center, radius}, box {lo, hi}, polytope {vertices} (2D) or
/// {A, b}, halfspace-intersection {A, b}, union {members}, difference {base, minus},
/// implicit-grid {lo, hi, shape, cells} with the first axis fastest.
inline RegionPtr region_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ball") return std::make_shared<Ball>(vec_from_json(j.at("center")), j.at("radius").get<double>());
  if (kind == "box") return std::make_shared<Box>(vec_from_json(j.at("lo")), vec_from_json(j.at("hi")));
  if (kind == "polytope" && j.contains("vertices")) {
    std::vector<Vec> pts;
    for (const auto& p : j.at("vertices")) pts.push_back(vec_from_json(p));
    if (pts.empty() || pts[0].size() != 2) throw Error("io", "polytope vertices are supported in 2D only; use A and b");
    return Polytope::from_vertices_2d(pts);
  }
  if (kind == "polytope" || kind == "halfspace-intersection") {
    const auto& A = j.at("A");
    const auto& b = j.at("b");
    if (!A.is_array() || A.empty() || A.size() != b.size()) throw Error("io", "A and b must be nonempty with matching rows");
    const int n = static_cast<int>(A[0].size());
    Eigen::MatrixXd M(static_cast<int>(A.size()), n);
    Eigen::VectorXd v(static_cast<int>(b.size()));
    for (std::size_t r = 0; r < A.size(); ++r) {
      if (static_cast<int>(A[r].size()) != n) throw Error("io", "ragged A matrix");
      for (int c = 0; c < n; ++c) M(static_cast<int>(r), c) = A[r][c].get<double>();
      v[static_cast<int>(r)] = b[r].get<double>();
    }
    return std::make_shared<Polytope>(M, v);
  }
  if (kind == "union") {
    std::vector<RegionPtr> members;
    for (const auto& m : j.at("members")) members.push_back(region_from_json(m));
    return std::make_shared<Union>(members);
  }
  if (kind == "difference") return std::make_shared<Difference>(region_from_json(j.at("base")), region_from_json(j.at("minus")));
  if (kind == "implicit-grid") {
    std::vector<int> shape = j.at("shape").get<std::vector<int>>();
    std::vector<bool> cells;
    for (const auto& c : j.at("cells")) cells.push_back(c.is_boolean() ? c.get<bool>() : c.get<int>() != 0);
    return std::make_shared<ImplicitGrid>(vec_from_json(j.at("lo")), vec_from_json(j.at("hi")), shape, cells);
  }
  throw Error("io", "unknown set kind '" + kind + "'");
}

/// Center used for radial ball covers: explicit radial_center, else a ball's center, else the
/// center of a difference's ball base.
inline std::optional<Vec> radial_center_of(const json& j) {
  if (j.contains("radial_center")) return vec_from_json(j.at("radial_center"));
  const std::string kind = j.value("kind", "");
  if (kind == "ball") return vec_from_json(j.at("center"));
  if (kind == "difference") return radial_center_of(j.at("base"));
  return std::nullopt;
}

/// Set definition: a region record plus x0, h_geo and an optional name.
inline SetModel set_from_json(const json& j) {
  RegionPtr region = region_from_json(j);
  Vec x0 = vec_from_json(j.at("x0"));
  const double h = j.value("h_geo", 0.05);
  SetModel s = SetModel::build(region, x0, h, j.value("name", j.value("kind", "set")));
  s.radial_center = radial_center_of(j);
  return s;
}

inline SetModel load_set(const std::string& path) { return set_from_json(read_json_file(path)); }

/// Norm from a number p, a string ("l1", "l2", "linf", "lp:<p>", "hex", "mix") or {p} / {custom}.
inline Norm norm_from_json(const json& j, int dim) {
  if (j.is_number()) return Norm::lp(dim, j.get<double>());
  if (j.is_object()) {
    if (j.contains("p")) {
      const auto& p = j.at("p");
      if (p.is_string() && (p.get<std::string>() == "inf" || p.get<std::string>() == "linf")) return Norm::lp(dim, std::numeric_limits<double>::infinity());
      return Norm::lp(dim, p.get<double>());
    }
    if (j.contains("custom")) return Norm::custom(dim, j.at("custom").get<std::string>());
    throw Error("io", "norm object needs p or custom");
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "l1") return Norm::lp(dim, 1.0);
    if (s == "l2") return Norm::lp(dim, 2.0);
    if (s == "linf") return Norm::lp(dim, std::numeric_limits<double>::infinity());
    if (s.rfind("lp:", 0) == 0) return Norm::lp(dim, std::stod(s.substr(3)));
    return Norm::custom(dim, s);
  }
  throw Error("io", "unrecognized norm specification");
}

inline Norm parse_norm(const std::string& spec, int dim) {
  try {
    std::size_t used = 0;
    double p = std::stod(spec, &used);
    if (used == spec.size()) return Norm::lp(dim, p);
  } catch (const std::exception&) {
  }
  return norm_from_json(json(spec), dim);
}

// ---------------------------------------------------------------------------------------------
// Built-in functions for the smooth command

struct BuiltinFunction {
  ScalarFn f;
  double lip = 1.0;
};

/// zero, coord<i> ((x_i - x0_i)/K), dist (distance to the bounding-box center), maxaffine,
/// abs (distance to x0), suite<k> (member k of the pipeline test suite with seed 1).
inline BuiltinFunction builtin_function(const std::string& id, const SetModel& set, const Norm& norm) {
  const Vec x0 = set.x0;
  const int N = set.dim();
  if (id == "zero") return {[](const Vec&) { return 0.0; }, 0.0};
  if (id.rfind("coord", 0) == 0) {
    const int c = std::stoi(id.substr(5));
    if (c < 0 || c >= N) throw Error("io", "coordinate index out of range");
    const double K = norm.K(), c0 = x0[c];
    return {[c, c0, K](const Vec& x) { return (x[c] - c0) / K; }, 1.0};
  }
  if (id == "abs") {
    Norm nm = norm;
    return {[nm, x0](const Vec& x) { return nm(x - x0); }, 1.0};
  }
  if (id == "dist") {
    const Vec c = set.bbox().center();
    const double d0 = norm(x0 - c);
    Norm nm = norm;
    return {[nm, c, d0](const Vec& x) { return nm(x - c) - d0; }, 1.0};
  }
  if (id == "maxaffine") {
    Vec a = Vec::Ones(N), b = Vec::Ones(N);
    b[0] = -1.0;
    a /= norm.dual(a);
    b /= norm.dual(b);
    auto raw = [a, b](const Vec& x) { return std::max(a.dot(x), b.dot(x) + 0.1); };
    const double v0 = raw(x0);
    return {[raw, v0](const Vec& x) { return raw(x) - v0; }, 1.0};
  }
  if (id.rfind("suite", 0) == 0) {
    const auto suite = make_suite(set, norm, 1);
    const int k = std::stoi(id.substr(5));
    if (k < 0 || k >= static_cast<int>(suite.size())) throw Error("io", "suite index out of range");
    return {suite.fns[k], 1.0};
  }
  throw Error("io", "unknown builtin function '" + id + "'");
}

// ---------------------------------------------------------------------------------------------
// Certificates and enlargements

inline json certificate_json(const DownwardsCertificate& c) {
  json j;
  j["kind"] = "downwards-closed";
  j["x"] = to_json(c.x);
  j["r"] = c.r;
  j["u"] = to_json(c.u);
  j["resolution"] = c.resolution;
  j["verdict"] = c.pass ? "pass" : "fail";
  j["tested"] = c.tested;
  j["witness"] = c.witness_y ? to_json(*c.witness_y) : json(nullptr);
  if (c.witness_y) j["witness_t"] = c.witness_t;
  return j;
}

inline json star_kernel_json(const Vec& w, double resolution, const StarKernelResult& s) {
  json j;
  j["kind"] = "star-kernel";
  j["w"] = to_json(w);
  j["resolution"] = resolution;
  j["verdict"] = s.pass ? "pass" : "fail";
  j["margin"] = s.margin;
  j["witness"] = s.witness ? to_json(*s.witness) : json(nullptr);
  return j;
}

inline json part_json(const PartReport& p) {
  json j;
  j["name"] = p.name;
  j["strategy"] = p.strategy;
  j["xi"] = p.xi;
  j["margin"] = p.margin;
  if (!p.fastpath_note.empty()) j["fastpath_note"] = p.fastpath_note;
  if (p.strategy == "fastpath") {
    j["w"] = to_json(p.w);
    j["rho"] = p.rho;
    j["t"] = p.t;
    j["R"] = p.R;
  } else {
    json cover = json::array();
    for (const auto& b : p.cover) cover.push_back({{"x", to_json(b.x)}, {"r", b.r}, {"u", to_json(b.u)}});
    j["cover"] = cover;
    j["cover_family"] = p.cover_family;
    j["k"] = p.k;
    j["H"] = p.H;
    j["G"] = p.G;
    j["eps"] = p.eps;
    j["diamU"] = p.diamU;
    j["s"] = p.s;
    j["theta_formula"] = p.theta_schedule;
    j["theta"] = p.theta;
    j["xi_lip"] = p.xi_lip;
    j["xi_unif"] = p.xi_unif;
  }
  return j;
}

inline json enlargement_json(const Enlargement& E) {
  json j;
  j["set"] = E.M.name;
  j["norm"] = E.norm.name();
  j["K"] = E.norm.K();
  j["xi"] = E.xi;
  j["margin"] = E.margin;
  j["components"] = E.parts.size();
  j["alpha"] = std::isfinite(E.alpha) ? json(E.alpha) : json(nullptr);
  j["xi_component"] = E.xi_component;
  json parts = json::array();
  for (const auto& p : E.parts) parts.push_back(part_json(p));
  j["parts"] = parts;
  j["certificates"] = {
      {"lipschitz", {{"measured", E.lip_measured}, {"bound", 1.0 + E.xi}, {"pairs", E.pairs_checked}, {"verdict", E.lip_pass ? "pass" : "fail"}}},
      {"displacement", {{"measured", E.disp_measured}, {"bound", E.xi}, {"verdict", E.disp_pass ? "pass" : "fail"}}},
      {"retraction", {{"verdict", E.retract_pass ? "pass" : "fail"}}},
      {"margin", {{"declared", E.margin}, {"measured", E.margin_measured}, {"verdict", E.margin_pass ? "pass" : "fail"}}},
  };
  j["pass"] = E.pass();
  return j;
}

// ---------------------------------------------------------------------------------------------
// Meshes

/// {x0, delta, cubes: [lattice coords], vertices: [coords]}; refuses meshes above max_cubes.
inline json mesh_json(const Mesh& mesh, std::size_t max_cubes = 200000) {
  if (mesh.cube_count() > max_cubes) throw Error("io", "mesh too large to dump");
  const int N = mesh.dim();
  std::vector<Lattice> cubes, verts;
  mesh.for_each_cube([&](const Lattice& k) { cubes.push_back(k); });
  mesh.for_each_vertex([&](const Lattice& k) { verts.push_back(k); });
  std::sort(cubes.begin(), cubes.end());
  std::sort(verts.begin(), verts.end());
  json j;
  j["x0"] = to_json(mesh.x0());
  j["delta"] = mesh.delta();
  j["cubes"] = json::array();
  for (const auto& k : cubes) j["cubes"].push_back(to_json(k, N));
  j["vertices"] = json::array();
  for (const auto& k : verts) j["vertices"].push_back(to_json(mesh.point(k)));
  return j;
}

/// Coefficient table CSV: lattice coordinates k1..kN then value, for every mesh vertex.
inline std::string coefficients_csv(VertexTable& table, int col = 0) {
  const Mesh& mesh = table.mesh();
  const int N = mesh.dim();
  std::vector<Lattice> verts;
  mesh.for_each_vertex([&](const Lattice& k) { verts.push_back(k); });
  std::sort(verts.begin(), verts.end());
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < N; ++i) os << "k" << i + 1 << ",";
  os << "value\n";
  for (const auto& k : verts) {
    for (int i = 0; i < N; ++i) os << k[i] << ",";
    os << table.at(k)[col] << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// Pipeline configuration and reports

struct RunSpec {
  SetModel set;
  Norm norm;
  RunConfig config;
  std::string out_dir;
};

/// {set_file | set, norm, n_min, n_max, suite_seed, resolutions {quad_nodes, anchors,
/// residual_probes, enlarge, mesh_cap}, slack, strategy, out_dir}. Relative paths resolve
/// against base_dir.
inline RunSpec run_spec_from_json(const json& j, const std::string& base_dir) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (std::filesystem::path(base_dir) / fp).string();
  };
  SetModel set;
  if (j.contains("set_file")) set = load_set(resolve(j.at("set_file").get<std::string>()));
  else if (j.contains("set")) set = set_from_json(j.at("set"));
  else throw Error("io", "run config needs set_file or set");
  Norm norm = norm_from_json(j.value("norm", json("l2")), set.dim());
  RunConfig cfg;
  cfg.n_min = j.value("n_min", 1);
  cfg.n_max = j.value("n_max", 4);
  cfg.suite_seed = j.value("suite_seed", 1ull);
  cfg.sigma = j.value("slack", 1e-3);
  if (j.contains("strategy")) cfg.enlarge.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("resolutions")) {
    const auto& r = j.at("resolutions");
    cfg.quad_nodes = r.value("quad_nodes", 0);
    cfg.anchors = r.value("anchors", cfg.anchors);
    cfg.residual_probes = r.value("residual_probes", cfg.residual_probes);
    cfg.enlarge.resolution = r.value("enlarge", 0.0);
    cfg.mesh_cap = r.value("mesh_cap", cfg.mesh_cap);
  }
  std::string out = j.value("out_dir", "out");
  return {std::move(set), std::move(norm), cfg, resolve(out)};
}

inline RunSpec load_run_spec(const std::string& path) {
  return run_spec_from_json(read_json_file(path), std::filesystem::path(path).parent_path().string());
}

inline std::string report_csv(const Report& rep) {
  std::ostringstream os;
  os.precision(10);
  os << "n,r_n,delta_n,rank,norm_measured,norm_bound,err_measured,err_bound,pass\n";
  for (const auto& r : rep.rows)
    os << r.n << "," << r.sched.r << "," << r.sched.delta << "," << r.rank << "," << r.norm.measured << "," << r.norm.bound << ","
       << r.uniform.measured << "," << r.uniform.bound << "," << (r.pass ? "true" : "false") << "\n";
  return os.str();
}

inline json report_json(const Report& rep) {
  json j;
  j["set"] = rep.set_name;
  j["norm"] = rep.norm_name;
  j["N"] = rep.N;
  j["K"] = rep.K;
  j["suite"] = rep.suite;
  j["monotone_error"] = rep.monotone;
  j["pass"] = rep.pass();
  json rows = json::array();
  for (const auto& r : rep.rows) {
    const auto& s = r.sched;
    json row;
    row["n"] = r.n;
    row["status"] = r.status;
    if (!r.message.empty()) row["message"] = r.message;
    row["pass"] = r.pass;
    row["seconds"] = r.seconds;
    row["schedule"] = {{"xi", s.xi},
                       {"margin", s.margin},
                       {"r", s.r},
                       {"r_bound", s.r_bound},
                       {"delta", s.delta},
                       {"delta_bound", s.delta_bound},
                       {"delta_mesh", s.delta_mesh},
                       {"delta_modulus", s.delta_modulus},
                       {"modulus_warning", s.modulus_warning},
                       {"empirical_delta", s.empirical},
                       {"A_M", s.A_M},
                       {"eps", s.eps}};
    row["enlargement"] = {{"strategy", r.strategy}, {"lip", r.enl_lip}, {"displacement", r.enl_disp}, {"margin", r.enl_margin}, {"pass", r.enl_pass}};
    row["rank"] = r.rank;
    row["cubes"] = r.cubes;
    row["coefficients_computed"] = r.coefficients;
    row["quad_slack"] = r.quad_slack;
    json nr = {{"measured", r.norm.measured},
               {"bound", r.norm.bound},
               {"near_regime", r.norm.near_worst},
               {"far_regime", r.norm.far_worst},
               {"pairs", r.norm.pairs},
               {"pass", r.norm.pass}};
    if (r.norm.worst_f >= 0) {
      nr["witness"] = {{"f", rep.suite.at(r.norm.worst_f)}, {"x", to_json(r.norm.worst_x)}, {"y", to_json(r.norm.worst_y)}};
    }
    row["norm"] = nr;
    json ur = {{"measured", r.uniform.measured},
               {"bound", r.uniform.bound},
               {"interp", r.uniform.interp},
               {"interp_bound", r.uniform.interp_bound},
               {"smooth", r.uniform.smooth},
               {"smooth_bound", r.uniform.smooth_bound},
               {"retract", r.uniform.retract},
               {"retract_bound", r.uniform.retract_bound},
               {"terms_pass", r.uniform.terms_pass},
               {"pass", r.uniform.pass}};
    if (r.uniform.worst_f >= 0) ur["witness"] = {{"f", rep.suite.at(r.uniform.worst_f)}, {"x", to_json(r.uniform.worst_x)}};
    row["uniform"] = ur;
    row["differentiability"] = {{"residual", s.residual}, {"bound", r.residual_bound}, {"pass", r.residual_pass}};
    row["linearity_error"] = r.linearity_error;
    row["x0_zero"] = r.x0_zero;
    row["predual_gap"] = r.predual_gap;
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

inline void write_report(const Report& rep, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file((std::filesystem::path(out_dir) / "report.csv").string(), report_csv(rep));
  write_text_file((std::filesystem::path(out_dir) / "report.json").string(), report_json(rep).dump(2) + "\n");
}

}  // namespace lipfree
