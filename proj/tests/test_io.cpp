#include "test_sets.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace lipfree;
namespace ts = lipfree::testsets;
namespace fs = std::filesystem;

namespace {

std::string set_path(const std::string& name) { return ts::demo_dir() + "/sets/" + name + ".json"; }

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("lipfree_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(SetFiles, EveryDemoSetParses) {
  struct Expect {
    std::string name;
    int dim;
    Vec inside, outside;
  };
  const std::vector<Expect> cases{
      {"interval", 1, make_vec({0.5}), make_vec({1.2})},
      {"square", 2, make_vec({0.5, 0.5}), make_vec({1.2, 0.5})},
      {"disk", 2, make_vec({0.6, 0.6}), make_vec({0.8, 0.8})},
      {"lshape", 2, make_vec({0.25, 0.75}), make_vec({0.75, 0.75})},
      {"two_squares", 2, make_vec({3.5, 3.5}), make_vec({2.0, 2.0})},
      {"annulus", 2, make_vec({0.75, 0.0}), make_vec({0.2, 0.0})},
      {"halfplane", 2, make_vec({0.5, -0.5}), make_vec({0.0, 0.5})},
      {"triangle", 2, make_vec({0.2, 0.2}), make_vec({0.6, 0.6})},
      {"grid_plus", 2, make_vec({1.5, 2.5}), make_vec({0.5, 0.5})},
  };
  for (const auto& c : cases) {
    SetModel s = load_set(set_path(c.name));
    EXPECT_EQ(s.name, c.name);
    EXPECT_EQ(s.dim(), c.dim) << c.name;
    EXPECT_TRUE(s.contains(c.inside)) << c.name;
    EXPECT_FALSE(s.contains(c.outside)) << c.name;
    EXPECT_TRUE(s.contains(s.x0)) << c.name;
    EXPECT_FALSE(s.boundary_samples.empty()) << c.name;
  }
  EXPECT_TRUE(load_set(set_path("disk")).radial_center.has_value());
  EXPECT_TRUE(load_set(set_path("annulus")).radial_center.has_value());
  EXPECT_FALSE(load_set(set_path("square")).radial_center.has_value());
}

TEST(SetFiles, MalformedInputRejected) {
  EXPECT_THROW(set_from_json(json::parse(R"({"kind": "blob", "x0": [0]})")), Error);
  EXPECT_THROW(set_from_json(json::parse(R"({"kind": "box", "lo": [0, 0], "hi": [1, 1]})")), std::exception);
  EXPECT_THROW(set_from_json(json::parse(R"({"kind": "halfspace-intersection", "A": [[1, 0], [0]], "b": [1, 1], "x0": [0, 0]})")), Error);
  EXPECT_THROW(vec_from_json(json::parse("[1, 2, 3, 4, 5]")), Error);
  EXPECT_THROW(load_set("/nonexistent/set.json"), Error);
}

TEST(Norms, SpecificationsParse) {
  EXPECT_EQ(parse_norm("l1", 2).K(), Norm::lp(2, 1.0).K());
  EXPECT_DOUBLE_EQ(parse_norm("l2", 2)(make_vec({3, 4})), 5.0);
  EXPECT_DOUBLE_EQ(parse_norm("linf", 2)(make_vec({3, -4})), 4.0);
  EXPECT_DOUBLE_EQ(parse_norm("1", 2)(make_vec({3, -4})), 7.0);
  EXPECT_NEAR(parse_norm("lp:3", 2)(make_vec({1, 1})), std::cbrt(2.0), 1e-14);
  EXPECT_NEAR(norm_from_json(json::parse(R"({"p": "inf"})"), 3)(make_vec({1, -2, 1})), 2.0, 1e-15);
  EXPECT_NO_THROW(parse_norm("hex", 2));
  EXPECT_THROW(parse_norm("frobnicate", 2), Error);
  EXPECT_THROW(norm_from_json(json::parse("{}"), 2), Error);
}

TEST(Builtins, FunctionsVanishAtBasePoint) {
  auto M = ts::square();
  const Norm nm = Norm::lp(2, 2.0);
  for (const std::string id : {"coord0", "coord1", "abs", "dist", "maxaffine", "suite0", "suite20"}) {
    auto bf = builtin_function(id, M, nm);
    EXPECT_NEAR(bf.f(M.x0), 0.0, 1e-15) << id;
    EXPECT_EQ(bf.lip, 1.0);
  }
  EXPECT_EQ(builtin_function("zero", M, nm).lip, 0.0);
  EXPECT_THROW(builtin_function("coord2", M, nm), Error);
  EXPECT_THROW(builtin_function("suite99", M, nm), Error);
  EXPECT_THROW(builtin_function("nope", M, nm), Error);
}

TEST(Output, EnlargementJson) {
  auto E = enlarge(ts::interval(), 0.1, Norm::lp(1, 2.0));
  json j = enlargement_json(E);
  EXPECT_EQ(j["set"], "interval");
  EXPECT_EQ(j["components"], 1);
  EXPECT_TRUE(j["pass"].get<bool>());
  for (const char* c : {"lipschitz", "displacement", "retraction", "margin"}) EXPECT_EQ(j["certificates"][c]["verdict"], "pass") << c;
  EXPECT_NEAR(j["certificates"]["lipschitz"]["bound"].get<double>(), 1.1, 1e-15);
  EXPECT_EQ(j["parts"][0]["strategy"], "fastpath");
  // round trip through text
  EXPECT_EQ(json::parse(j.dump()), j);
}

TEST(Output, CertificateJsonCarriesWitness) {
  auto M = ts::annulus();
  auto cert = is_downwards_closed_relative(M, make_vec({0.0, 0.5}), 0.2, make_vec({0.0, 1.0}), 0.01);
  ASSERT_FALSE(cert.pass);
  json j = certificate_json(cert);
  EXPECT_EQ(j["verdict"], "fail");
  EXPECT_FALSE(j["witness"].is_null());
  EXPECT_TRUE(j.contains("witness_t"));
}

TEST(Output, MeshJsonAndCoefficients) {
  auto mesh = build_mesh(Box(make_vec({-0.1}), make_vec({1.1})), 0.05, 0.01, make_vec({0.003}));
  json j = mesh_json(mesh);
  EXPECT_EQ(j["cubes"].size(), 101u);
  EXPECT_EQ(j["vertices"].size(), 102u);
  EXPECT_DOUBLE_EQ(j["delta"].get<double>(), 0.01);
  EXPECT_DOUBLE_EQ(j["x0"][0].get<double>(), 0.003);
  EXPECT_EQ(j["cubes"][0][0], -1);
  EXPECT_NEAR(j["vertices"][0][0].get<double>(), -0.007, 1e-15);
  EXPECT_THROW(mesh_json(mesh, 10), Error);

  VertexTable table(mesh, 1, [](const Vec& v, double* out) { out[0] = 2.0 * v[0]; });
  const std::string csv = coefficients_csv(table);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k1,value");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 3), "-1,");
  EXPECT_NEAR(std::stod(line.substr(3)), -0.014, 1e-15);
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 102);
}

TEST(RunSpec, DemoConfigResolvesRelativePaths) {
  auto spec = load_run_spec(ts::demo_dir() + "/runs/square_l1.json");
  EXPECT_EQ(spec.set.name, "square");
  EXPECT_EQ(spec.norm.name(), Norm::lp(2, 1.0).name());
  EXPECT_EQ(spec.config.n_min, 1);
  EXPECT_EQ(spec.config.n_max, 4);
  EXPECT_DOUBLE_EQ(spec.config.sigma, 1e-3);
  EXPECT_TRUE(fs::path(spec.out_dir).is_absolute() || spec.out_dir.find("out") != std::string::npos);
}

TEST(RunSpec, InlineSetAndResolutions) {
  json j = json::parse(R"({
    "set": {"kind": "box", "lo": [0], "hi": [1], "x0": [0], "h_geo": 0.02},
    "norm": 2, "n_min": 2, "n_max": 3, "suite_seed": 7, "slack": 0.002, "strategy": "general",
    "resolutions": {"quad_nodes": 31, "anchors": 100, "residual_probes": 5, "enlarge": 0.01, "mesh_cap": 1000},
    "out_dir": "results"})");
  auto spec = run_spec_from_json(j, "/tmp/base");
  EXPECT_EQ(spec.set.dim(), 1);
  EXPECT_EQ(spec.config.n_min, 2);
  EXPECT_EQ(spec.config.suite_seed, 7u);
  EXPECT_EQ(spec.config.quad_nodes, 31);
  EXPECT_EQ(spec.config.anchors, 100);
  EXPECT_EQ(spec.config.mesh_cap, 1000u);
  EXPECT_EQ(spec.config.enlarge.strategy, Strategy::General);
  EXPECT_EQ(spec.out_dir, "/tmp/base/results");
  EXPECT_THROW(run_spec_from_json(json::parse(R"({"norm": "l2"})"), "."), Error);
}

TEST(Reports, WriteCsvAndJson) {
  RunConfig cfg;
  cfg.n_max = 2;
  cfg.anchors = 200;
  auto rep = run_experiment(ts::interval(), Norm::lp(1, 2.0), cfg);
  auto dir = scratch_dir("report");
  write_report(rep, dir.string());
  const std::string csv = read_file(dir / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,r_n,delta_n,rank,norm_measured,norm_bound,err_measured,err_bound,pass");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  json j = json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(j["rows"].size(), 2u);
  EXPECT_EQ(j["pass"].get<bool>(), rep.pass());
  EXPECT_EQ(j["rows"][0]["n"], 1);
  EXPECT_DOUBLE_EQ(j["rows"][1]["schedule"]["r"].get<double>(), rep.rows[1].sched.r);
  EXPECT_EQ(j["rows"][1]["schedule"]["r_bound"], rep.rows[1].sched.r_bound);
  fs::remove_all(dir);
}
