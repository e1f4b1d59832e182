#include "lipfree/lipfree.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

using namespace lipfree;

namespace {

void print_error(const std::exception& e) {
  std::cerr << "error: " << e.what();
  if (const auto* le = dynamic_cast<const Error*>(&e); le && le->witness()) std::cerr << " [witness " << le->witness()->transpose() << "]";
  std::cerr << "\n";
}

int cmd_enlarge(const std::string& set_file, double xi, const std::string& strategy, double resolution, const std::string& norm_spec,
                const std::string& out) {
  SetModel set = load_set(set_file);
  Norm norm = parse_norm(norm_spec, set.dim());
  EnlargeOptions opt;
  opt.strategy = parse_strategy(strategy);
  opt.resolution = resolution;
  Enlargement E = enlarge(set, xi, norm, opt);
  json j = enlargement_json(E);
  write_text_file(out, j.dump(2) + "\n");
  std::cout << "set " << set.name << ", norm " << norm.name() << ", xi " << xi << ": " << (E.pass() ? "pass" : "FAIL") << "\n"
            << "  Lip(Psi) " << E.lip_measured << " <= " << 1.0 + xi << ", displacement " << E.disp_measured << " <= " << xi << ", margin "
            << E.margin << "\n"
            << "  wrote " << out << "\n";
  return E.pass() ? 0 : 1;
}

int cmd_smooth(const std::string& set_file, double r, const std::string& fid, int quad, const std::string& norm_spec, const std::string& out) {
  SetModel set = load_set(set_file);
  Norm norm = parse_norm(norm_spec, set.dim());
  auto bf = builtin_function(fid, set, norm);
  const int N = set.dim();
  auto sm = std::make_shared<Smoother>(N, r, quad > 0 ? quad : default_quad_nodes(N), set.x0);
  SmoothedFunction sf(bf.f, sm, set.x0);
  const double q = sm->quad_slack(norm.K());
  const double bound = 2.0 * bf.lip * norm.K() * r;
  const double f0 = bf.f(set.x0);
  std::ostringstream os;
  os.precision(12);
  if (N == 1) os << "x";
  else
    for (int i = 0; i < N; ++i) os << (i ? "," : "") << "x" << i + 1;
  os << ",f,Srf,gap,bound\n";
  double worst = 0.0;
  long rows = 0;
  for (const auto& x : set.all_samples()) {
    // S_r is defined on the erosion M(r)
    if (!(set.clearance(x) > r)) continue;
    const double f = bf.f(x) - f0;
    const double s = sf(x);
    const double gap = std::abs(s - f);
    worst = std::max(worst, gap);
    for (int i = 0; i < N; ++i) os << (i ? "," : "") << x[i];
    os << "," << f << "," << s << "," << gap << "," << bound << "\n";
    ++rows;
  }
  if (out.empty() || out == "-") std::cout << os.str();
  else write_text_file(out, os.str());
  const bool pass = worst <= bound * (1.0 + 1e-3) + q;
  std::cerr << rows << " samples, worst gap " << worst << " vs bound " << bound << " + quad slack " << q << ": " << (pass ? "pass" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

int cmd_pipeline(const std::string& config, const std::string& out_dir_override) {
  RunSpec spec = load_run_spec(config);
  if (!out_dir_override.empty()) spec.out_dir = out_dir_override;
  Report rep = run_experiment(spec.set, spec.norm, spec.config);
  write_report(rep, spec.out_dir);
  std::cout << "set " << rep.set_name << ", norm " << rep.norm_name << " (K = " << rep.K << ")\n";
  std::cout << std::setw(3) << "n" << std::setw(12) << "r_n" << std::setw(12) << "delta_n" << std::setw(11) << "rank" << std::setw(11) << "|T_n|"
            << std::setw(9) << "bound" << std::setw(11) << "error" << std::setw(9) << "bound" << "  result\n";
  for (const auto& r : rep.rows) {
    std::cout << std::setw(3) << r.n << std::setw(12) << std::setprecision(4) << r.sched.r << std::setw(12) << r.sched.delta << std::setw(11)
              << r.rank << std::setw(11) << std::setprecision(5) << r.norm.measured << std::setw(9) << std::setprecision(4) << r.norm.bound
              << std::setw(11) << std::setprecision(5) << r.uniform.measured << std::setw(9) << std::setprecision(4) << r.uniform.bound << "  "
              << (r.pass ? "pass" : "FAIL") << (r.sched.empirical ? " (empirical delta)" : "");
    if (!r.message.empty()) std::cout << "  " << r.status << ": " << r.message;
    std::cout << "\n";
  }
  if (!rep.monotone) std::cout << "error sequence is not nonincreasing in n\n";
  std::cout << "wrote " << spec.out_dir << "/report.csv and report.json\n";
  return rep.pass() ? 0 : 1;
}

int cmd_mesh(const std::string& set_file, int n, const std::string& fid, const std::string& norm_spec, const std::string& out_dir) {
  SetModel set = load_set(set_file);
  Norm norm = parse_norm(norm_spec, set.dim());
  Enlargement E = enlarge(set, enlargement_xi(n), norm);
  if (!E.pass()) throw Error("enlargement", "enlargement certificates failed");
  Schedule s = make_schedule(n, set.dim(), norm.K(), E.margin, E.Mhat->bounds());
  auto bf = builtin_function(fid, set, norm);
  FiniteRankOperator T(E, s, {bf.f});
  write_text_file(out_dir + "/mesh.json", mesh_json(T.mesh()).dump() + "\n");
  write_text_file(out_dir + "/coefficients.csv", coefficients_csv(T.table()));
  std::cout << "n " << n << ": r " << s.r << ", delta " << s.delta << " (" << s.delta_bound << "), " << T.mesh().cube_count() << " cubes, rank "
            << T.rank() << "\nwrote " << out_dir << "/mesh.json and coefficients.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-rank approximation of Lipschitz functions on compact sets"};
  app.require_subcommand(1);

  std::string set_file, strategy = "auto", norm_spec = "l2", out = "enlargement.json";
  double xi = 0.1, resolution = 0.0;
  auto* en = app.add_subcommand("enlarge", "Build the enlarged set and retraction and certify them");
  en->add_option("--set", set_file, "set definition JSON")->required();
  en->add_option("--xi", xi, "enlargement tolerance")->required();
  en->add_option("--strategy", strategy, "auto, fastpath or general");
  en->add_option("--resolution", resolution, "certificate resolution (default h_geo/2)");
  en->add_option("--norm", norm_spec, "norm: l1, l2, linf, lp:<p>, hex, mix");
  en->add_option("--out", out, "output file");

  double r = 0.1;
  std::string fid = "dist", sout;
  int quad = 0;
  auto* sm = app.add_subcommand("smooth", "Smooth a builtin function and compare it with the input");
  sm->add_option("--set", set_file, "set definition JSON")->required();
  sm->add_option("--r", r, "mollifier radius")->required();
  sm->add_option("--f", fid, "zero, abs, dist, maxaffine, coord<i>, suite<k>");
  sm->add_option("--quad", quad, "quadrature nodes per axis");
  sm->add_option("--norm", norm_spec, "norm");
  sm->add_option("--out", sout, "CSV file (default stdout)");

  std::string config, out_dir;
  auto* pl = app.add_subcommand("pipeline", "Run the full construction and verification for a range of n");
  pl->add_option("--config", config, "run configuration JSON")->required();
  pl->add_option("--out-dir", out_dir, "override the configured output directory");

  int n = 1;
  std::string mesh_dir = "mesh_out";
  auto* me = app.add_subcommand("mesh", "Dump the mesh and vertex coefficients of T_n f");
  me->add_option("--set", set_file, "set definition JSON")->required();
  me->add_option("--n", n, "index n");
  me->add_option("--f", fid, "builtin function");
  me->add_option("--norm", norm_spec, "norm");
  me->add_option("--out-dir", mesh_dir, "output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*en) return cmd_enlarge(set_file, xi, strategy, resolution, norm_spec, out);
    if (*sm) return cmd_smooth(set_file, r, fid, quad, norm_spec, sout);
    if (*pl) return cmd_pipeline(config, out_dir);
    if (*me) return cmd_mesh(set_file, n, fid, norm_spec, mesh_dir);
  } catch (const std::exception& e) {
    print_error(e);
    return 2;
  }
  return 0;
}
