// Configuration schema, resolved-config round trips, and the subcommand
// drivers, including end-to-end runs of the installed executable (exit codes,
// CSV/VTK/state outputs, determinism).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "plates/commands.hpp"
#include "plates/config.hpp"
#include "plates/fem.hpp"
#include "plates/mesh.hpp"

using namespace plates;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

// Parsing must fail with a ConfigError whose message contains the field path.
void expect_config_error(const json& j, const std::string& needle) {
  try {
    parse_config(j);
    FAIL_CHECK("expected ConfigError mentioning '" << needle << "', but parsing succeeded");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.find(needle) == std::string::npos)
      FAIL_CHECK("ConfigError message '" << msg << "' does not mention '" << needle << "'");
  }
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("plates_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json tiny_sweep_config(const std::string& out_dir) {
  return json{{"mesh", {{"type", "disk"}, {"radius", 1.0}, {"refinements", 1}}},
              {"thetas", {0.1, 0.5, 1.0}},
              {"optimizer", {{"max_iters", 3000}}},
              {"warm_start", true},
              {"output_dir", out_dir}};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(static_cast<bool>(in));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Runs the real executable; returns its exit code and captures merged output.
int run_cli(const std::string& args, std::string* output = nullptr) {
  const fs::path log = fs::temp_directory_path() / "plates_cli_run.log";
  const std::string cmd = std::string(PLATES_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("defaults from an empty config") {
  const RunConfig cfg = parse_config(json::object());
  CHECK(cfg.mesh.kind == MeshConfig::Kind::disk);
  CHECK(cfg.mesh.radius == 1.0);
  CHECK(cfg.mesh.refinements == 4);
  REQUIRE(cfg.layers.size() == 1);
  CHECK(cfg.layers[0].t_lo == -0.5);
  CHECK(cfg.layers[0].t_hi == 0.5);
  CHECK(cfg.layers[0].stiffness.isotropic);
  CHECK(cfg.layers[0].stiffness.mu == 1.0);
  CHECK(cfg.layers[0].stiffness.lambda == 1.0);
  CHECK(cfg.layers[0].prestrain_lin.a11 == 1.0);
  CHECK(cfg.layers[0].prestrain_const.a11 == 0.0);
  CHECK(cfg.thetas == std::vector<double>{1, 2, 5, 10, 20, 40, 60, 80, 100, 150});
  CHECK(cfg.mu_eps_exponent == -0.5);
  CHECK(cfg.optimizer.rho == 0.25);
  CHECK(cfg.optimizer.g_tol == 1e-8);
  CHECK(cfg.optimizer.max_iters == 20000);
  CHECK(cfg.optimizer.max_backtracks == 40);
  CHECK(cfg.optimizer.metric == Metric::H1);
  CHECK(cfg.optimizer.cg_tol == 1e-10);
  CHECK(cfg.init.kind == InitialCondition::Kind::flat);
  CHECK(cfg.init.perturbation.amplitude == 0.0);
  CHECK(cfg.warm_start);
  CHECK(cfg.output_dir == "out");

  // The curl weight follows eps^exponent for the built mesh.
  const TriMesh mesh = disk_mesh(1.0, 2);
  RunConfig c2 = cfg;
  c2.mu_eps_exponent = -1.0;
  CHECK(c2.mu_eps_for(mesh) == doctest::Approx(1.0 / mesh.eps).epsilon(1e-14));
}

TEST_CASE("unknown keys are rejected with their field path") {
  expect_config_error(json{{"bogus", 1}}, "<root>: unknown key 'bogus'");
  expect_config_error(json{{"mesh", {{"sides", 3}}}}, "mesh: unknown key 'sides'");
  expect_config_error(json{{"material", {{"layers", {{{"t_lo", -0.5}, {"t_hi", 0.5}, {"mu", 1.0}}}}}}},
                      "material.layers[0]: unknown key 'mu'");
  expect_config_error(json{{"optimizer", {{"step", 0.1}}}}, "optimizer: unknown key 'step'");
  expect_config_error(json{{"init", {{"amplitude", 0.1}}}}, "init: unknown key 'amplitude'");
  expect_config_error(json{{"init", {{"perturbation", {{"sigma", 1.0}}}}}},
                      "init.perturbation: unknown key 'sigma'");
  expect_config_error(json{{"thetas", {{"start", 1}, {"stop", 2}, {"count", 2}, {"base", 10}}}},
                      "thetas: unknown key 'base'");
}

TEST_CASE("type and value violations name the offending field") {
  expect_config_error(json{{"mesh", {{"radius", "big"}}}}, "mesh.radius: expected a number");
  expect_config_error(json{{"mesh", {{"radius", -1.0}}}}, "mesh.radius: must be positive");
  expect_config_error(json{{"mesh", {{"refinements", 11}}}}, "mesh.refinements");
  expect_config_error(json{{"mesh", {{"refinements", 2.5}}}}, "expected an integer");
  expect_config_error(json{{"mesh", {{"type", "disk"}, {"path", "m.txt"}}}},
                      "mesh.path: only valid for type 'file'");
  expect_config_error(json{{"mesh", {{"type", "file"}}}}, "mesh.path: required");
  expect_config_error(json{{"mesh", {{"type", "file"}, {"path", "m.txt"}, {"radius", 1.0}}}},
                      "only valid for type 'disk'");
  expect_config_error(json{{"mesh", {{"type", "hex"}}}}, "mesh.type");
  expect_config_error(json{{"warm_start", 1}}, "warm_start: expected a boolean");
  expect_config_error(json{{"output_dir", 7}}, "output_dir: expected a string");
  expect_config_error(json{{"mu_eps_exponent", "half"}}, "mu_eps_exponent: expected a number");
}

TEST_CASE("material validation") {
  auto layer = [](json patch) {
    json L{{"t_lo", -0.5}, {"t_hi", 0.5}};
    for (auto& [k, v] : patch.items()) L[k] = v;
    return json{{"material", {{"layers", json::array({L})}}}};
  };

  expect_config_error(json{{"material", {{"layers", json::array()}}}},
                      "material.layers: expected a non-empty array");
  expect_config_error(json{{"material", json::object()}}, "material.layers: required");
  expect_config_error(json{{"material", {{"layers", json::array({json{{"t_hi", 0.5}}})}}}},
                      "t_lo and t_hi are required");
  expect_config_error(layer({{"stiffness", {{"mu", -1.0}}}}), ".mu: must be positive");
  expect_config_error(layer({{"stiffness", {{"lambda", -0.1}}}}), ".lambda: must be non-negative");
  expect_config_error(layer({{"stiffness", {{"mu", 1.0}, {"form3", {1, 0, 0, 1, 0, 1}}}}}),
                      "not both");
  expect_config_error(layer({{"stiffness", {{"form3", {1, 0, 0, 1, 0}}}}}),
                      "expected [m11, m12, m13, m22, m23, m33]");
  expect_config_error(layer({{"prestrain_const", {1, 2}}}), "expected [a11, a22, a12]");
  // Non-positive-definite form3 and inverted thickness are caught by the
  // eager material validation.
  expect_config_error(layer({{"stiffness", {{"form3", {-1, 0, 0, -1, 0, -1}}}}}),
                      "material.layers");
  expect_config_error(layer({{"t_lo", 0.5}, {"t_hi", -0.5}}), "material.layers");

  // A valid anisotropic layer parses and reduces to the given coefficients.
  const RunConfig cfg = parse_config(layer({{"stiffness", {{"form3", {2, 0.1, 0, 1.5, 0, 1}}}}}));
  REQUIRE_FALSE(cfg.layers[0].stiffness.isotropic);
  const Form3 f = cfg.layers[0].stiffness.form();
  CHECK(f.m(0, 0) == 2.0);
  CHECK(f.m(0, 1) == 0.1);
  CHECK(f.m(1, 0) == 0.1);
  CHECK(f.m(1, 1) == 1.5);
  CHECK(f.m(2, 2) == 1.0);
}

TEST_CASE("theta grids: arrays and range objects") {
  CHECK(parse_config(json{{"thetas", {0.5, 2.0, 7.5}}}).thetas ==
        std::vector<double>{0.5, 2.0, 7.5});
  expect_config_error(json{{"thetas", json::array()}}, "thetas");
  expect_config_error(json{{"thetas", {1.0, 1.0}}}, "strictly ascending");
  expect_config_error(json{{"thetas", {2.0, 1.0}}}, "strictly ascending");
  expect_config_error(json{{"thetas", {-1.0, 1.0}}}, "thetas[0]: must be non-negative");
  expect_config_error(json{{"thetas", {1.0, "two"}}}, "thetas[1]: expected a number");

  const auto lin =
      parse_config(json{{"thetas", {{"start", 0.0}, {"stop", 8.0}, {"count", 5}}}}).thetas;
  REQUIRE(lin.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(lin[k] == doctest::Approx(2.0 * k).epsilon(1e-14));

  const auto lg = parse_config(json{{"thetas", {{"start", 1.0},
                                                {"stop", 100.0},
                                                {"count", 3},
                                                {"spacing", "log"}}}})
                      .thetas;
  REQUIRE(lg.size() == 3);
  CHECK(lg[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lg[1] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(lg[2] == doctest::Approx(100.0).epsilon(1e-12));

  const auto one =
      parse_config(json{{"thetas", {{"start", 3.0}, {"stop", 3.0}, {"count", 1}}}}).thetas;
  CHECK(one == std::vector<double>{3.0});

  expect_config_error(json{{"thetas", {{"start", 1.0}, {"stop", 2.0}}}},
                      "range object needs start, stop, count");
  expect_config_error(json{{"thetas", {{"start", 2.0}, {"stop", 1.0}, {"count", 3}}}},
                      "must be ascending");
  expect_config_error(json{{"thetas", {{"start", 0.0}, {"stop", 1.0}, {"count", 2},
                                       {"spacing", "log"}}}},
                      "log spacing needs positive endpoints");
  expect_config_error(json{{"thetas", {{"start", 1.0}, {"stop", 2.0}, {"count", 0}}}},
                      "thetas.count");
  expect_config_error(json{{"thetas", {{"start", 1.0}, {"stop", 2.0}, {"count", 2},
                                       {"spacing", "cubic"}}}},
                      "thetas.spacing");
}

TEST_CASE("optimizer and init validation through the schema") {
  expect_config_error(json{{"optimizer", {{"rho", 0.5}}}}, "optimizer: rho");
  expect_config_error(json{{"optimizer", {{"g_tol", 0.0}}}}, "optimizer: g_tol");
  expect_config_error(json{{"optimizer", {{"max_iters", -2}}}}, "optimizer: max_iters");
  expect_config_error(json{{"optimizer", {{"metric", "L2"}}}}, "optimizer.metric");
  CHECK(parse_config(json{{"optimizer", {{"metric", "L2Lumped"}}}}).optimizer.metric ==
        Metric::L2Lumped);

  expect_config_error(json{{"init", {{"kind", "wavy"}}}}, "init.kind");
  expect_config_error(json{{"init", {{"kind", "flat"}, {"a", 1.0}}}},
                      "a/b only valid for kind 'paraboloid'");
  expect_config_error(json{{"init", {{"kind", "from_file"}}}}, "init.path: required");
  expect_config_error(json{{"init", {{"kind", "flat"}, {"path", "x.state"}}}},
                      "init.path: only valid");
  expect_config_error(json{{"init", {{"perturbation", {{"amplitude", -0.1}}}}}},
                      "init.perturbation.amplitude");
  expect_config_error(json{{"init", {{"perturbation", {{"seed", 1.5}}}}}},
                      "init.perturbation.seed");

  const RunConfig cfg = parse_config(
      json{{"init",
            {{"kind", "paraboloid"}, {"a", 2.0}, {"b", -1.0},
             {"perturbation", {{"seed", 99}, {"amplitude", 0.25}}}}}});
  CHECK(cfg.init.kind == InitialCondition::Kind::paraboloid);
  CHECK(cfg.init.a == 2.0);
  CHECK(cfg.init.b == -1.0);
  CHECK(cfg.init.perturbation.seed == 99);
  CHECK(cfg.init.perturbation.amplitude == 0.25);
}

TEST_CASE("resolved config is a parseable fixpoint") {
  json j{{"mesh", {{"type", "disk"}, {"radius", 2.0}, {"refinements", 3}}},
         {"material",
          {{"layers",
            {{{"t_lo", -0.5},
              {"t_hi", 0.1},
              {"stiffness", {{"form3", {2, 0.1, 0, 1.5, 0, 1}}}},
              {"prestrain_const", {0.1, -0.2, 0.05}}},
             {{"t_lo", 0.1},
              {"t_hi", 0.5},
              {"stiffness", {{"mu", 2.0}, {"lambda", 0.5}}},
              {"prestrain_lin", {1, 1, 0.5}}}}}}},
         {"thetas", {0.5, 1.5}},
         {"mu_eps_exponent", -0.25},
         {"optimizer", {{"rho", 0.1}, {"max_iters", 7}, {"metric", "L2Lumped"}}},
         {"init", {{"kind", "paraboloid"}, {"a", 0.3}, {"b", 0.2},
                   {"perturbation", {{"seed", 5}, {"amplitude", 0.01}}}}},
         {"warm_start", false},
         {"output_dir", "elsewhere"}};
  const json r1 = resolved_config(parse_config(j));
  const json r2 = resolved_config(parse_config(r1));
  CHECK(r1 == r2);

  // Key properties survive the round trip.
  const RunConfig cfg = parse_config(r1);
  CHECK(cfg.mesh.radius == 2.0);
  REQUIRE(cfg.layers.size() == 2);
  CHECK_FALSE(cfg.layers[0].stiffness.isotropic);
  CHECK(cfg.layers[1].stiffness.lambda == 0.5);
  CHECK(cfg.thetas == std::vector<double>{0.5, 1.5});
  CHECK(cfg.optimizer.max_iters == 7);
  CHECK(cfg.optimizer.metric == Metric::L2Lumped);
  CHECK_FALSE(cfg.warm_start);

  // The default config also round-trips.
  const json d1 = resolved_config(parse_config(json::object()));
  CHECK(resolved_config(parse_config(d1)) == d1);
}

TEST_CASE("load_config failures") {
  CHECK_THROWS_AS(load_config("/nonexistent/plates.json"), ConfigError);
  const fs::path bad = fs::temp_directory_path() / "plates_bad.json";
  std::ofstream(bad) << "{ not json";
  try {
    load_config(bad.string());
    FAIL_CHECK("expected a parse failure");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("parse failure") != std::string::npos);
  }
  fs::remove(bad);
}

TEST_CASE("moduli command reports the homogenised data") {
  SUBCASE("two-layer fixture has the known spontaneous curvature") {
    const json j{{"material",
                  {{"layers",
                    {{{"t_lo", -0.5},
                      {"t_hi", 0.0},
                      {"stiffness", {{"mu", 1.0}, {"lambda", 1.0}}},
                      {"prestrain_const", {0, 0, 0}},
                      {"prestrain_lin", {0, 0, 0}}},
                     {{"t_lo", 0.0},
                      {"t_hi", 0.5},
                      {"stiffness", {{"mu", 1.0}, {"lambda", 1.0}}},
                      {"prestrain_const", {1, 1, 0}},
                      {"prestrain_lin", {0, 0, 0}}}}}}}};
    const fs::path out = fs::temp_directory_path() / "plates_moduli.json";
    std::ostringstream os;
    const int rc = cmd_moduli(parse_config(j), out.string(), os);
    CHECK(rc == 0);
    CHECK(os.str().find("K0") != std::string::npos);

    std::ifstream in(out);
    REQUIRE(static_cast<bool>(in));
    json rep;
    in >> rep;
    CHECK(rep["E0"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep["F0"][0].get<double>() == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(rep["F0"][1].get<double>() == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(rep["F0"][2].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rep["K0"][0].get<double>() == doctest::Approx(1.5).epsilon(1e-12));
    fs::remove(out);
  }

  SUBCASE("default stack: zero residual, isotropic curvature, degenerate minimiser ring") {
    std::ostringstream os;
    const fs::path out = fs::temp_directory_path() / "plates_moduli2.json";
    const int rc = cmd_moduli(parse_config(json::object()), out.string(), os);
    CHECK(rc == 0);
    std::ifstream in(out);
    json rep;
    in >> rep;
    CHECK(std::abs(rep["gamma"].get<double>()) <= 1e-12);
    CHECK(rep["K0"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep["K0"][1].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep["lki_minimizer_set"]["cardinality"] == "ellipse");
    CHECK(rep["lki_minimizer_set"]["value_constant"].get<bool>());
    CHECK(rep["lki_minimizer_set"]["min_value"].get<double>() ==
          doctest::Approx(5.0 / 24.0).epsilon(1e-10));
    fs::remove(out);
  }

  SUBCASE("without --out the JSON lands on the stream") {
    std::ostringstream os;
    const int rc = cmd_moduli(parse_config(json::object()), "", os);
    CHECK(rc == 0);
    CHECK(os.str().find("\"gamma\"") != std::string::npos);
  }
}

TEST_CASE("mesh command writes a reloadable mesh") {
  const fs::path dir = fresh_dir("mesh");
  json j = json::object();
  j["mesh"] = {{"type", "disk"}, {"radius", 1.0}, {"refinements", 1}};
  j["output_dir"] = dir.string();
  std::ostringstream os;
  const int rc = cmd_mesh(parse_config(j), "", os);
  CHECK(rc == 0);
  const fs::path path = dir / "mesh.txt";
  REQUIRE(fs::exists(path));
  const TriMesh loaded = load_mesh(path.string());
  const TriMesh direct = disk_mesh(1.0, 1);
  CHECK(loaded.n_nodes() == direct.n_nodes());
  CHECK(loaded.n_tris() == direct.n_tris());
  CHECK(os.str().find("nodes = ") != std::string::npos);

  // A mesh config of kind file reloads the written mesh.
  json j2 = json::object();
  j2["mesh"] = {{"type", "file"}, {"path", path.string()}};
  const TriMesh again = parse_config(j2).build_mesh();
  CHECK(again.n_nodes() == direct.n_nodes());
  fs::remove_all(dir);
}

TEST_CASE("sweep command: outputs, reloadability, determinism") {
  const fs::path dir = fresh_dir("sweep");
  const RunConfig cfg = parse_config(tiny_sweep_config(dir.string()));
  std::ostringstream os;
  const int rc = cmd_sweep(cfg, "", os);
  CHECK(rc == 0);
  CHECK(os.str().find("outputs in") != std::string::npos);

  REQUIRE(fs::exists(dir / "records.csv"));
  REQUIRE(fs::exists(dir / "resolved_config.json"));

  const auto lines = read_lines(dir / "records.csv");
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "theta,iterations,converged,energy,strain11,strain22,strain12,strain_eig_ratio,"
        "curl_l2,grad_norm,wall_time_s");

  const TriMesh mesh = cfg.build_mesh();
  const EffectiveModuli em = compute_moments(cfg.stack());
  const double mu_eps = cfg.mu_eps_for(mesh);
  const std::vector<std::string> names = {"0.1", "0.5", "1"};
  for (int i = 0; i < 3; ++i) {
    const auto cols = split(lines[i + 1], ',');
    REQUIRE(cols.size() == 11);
    CHECK(std::stod(cols[0]) == cfg.thetas[i]);
    CHECK(cols[2] == "1");  // converged

    // The state file reproduces the CSV row's energy, strain, and curl.
    const fs::path sp = dir / ("theta_" + names[i] + ".state");
    REQUIRE(fs::exists(sp));
    const DisplacementState st = load_state(mesh, sp.string());
    const double E = energy(mesh, em, cfg.thetas[i], st, mu_eps);
    CHECK(std::stod(cols[3]) == doctest::Approx(E).epsilon(1e-9));
    const SymMat2 strain = mean_bending_strain(mesh, st.z);
    CHECK(std::stod(cols[4]) == doctest::Approx(strain.a11).epsilon(1e-9));
    CHECK(std::stod(cols[5]) == doctest::Approx(strain.a22).epsilon(1e-9));
    CHECK(std::stod(cols[8]) == doctest::Approx(curl_l2(st.z)).epsilon(1e-9));

    // The VTK file is present with the right cardinalities and fields.
    const auto vtk = read_lines(dir / ("theta_" + names[i] + ".vtk"));
    REQUIRE(vtk.size() > 10);
    bool points_ok = false, cells_ok = false, has_u = false, has_z = false, has_curl = false;
    for (const auto& l : vtk) {
      points_ok = points_ok || l == "POINTS " + std::to_string(mesh.n_nodes()) + " double";
      cells_ok = cells_ok || l == "CELLS " + std::to_string(mesh.n_tris()) + " " +
                                  std::to_string(4 * mesh.n_tris());
      has_u = has_u || l == "VECTORS u double";
      has_z = has_z || l == "VECTORS z double";
      has_curl = has_curl || l == "SCALARS curl double 1";
    }
    CHECK(points_ok);
    CHECK(cells_ok);
    CHECK(has_u);
    CHECK(has_z);
    CHECK(has_curl);
  }

  SUBCASE("resolved_config.json reproduces the run when parsed back") {
    std::ifstream in(dir / "resolved_config.json");
    json echo;
    in >> echo;
    const RunConfig cfg2 = parse_config(echo);
    CHECK(cfg2.thetas == cfg.thetas);
    CHECK(cfg2.output_dir == dir.string());
    CHECK(resolved_config(cfg2) == echo);
  }

  SUBCASE("a second run is identical up to wall time") {
    const fs::path dir2 = fresh_dir("sweep2");
    std::ostringstream os2;
    CHECK(cmd_sweep(cfg, dir2.string(), os2) == 0);
    const auto a = read_lines(dir / "records.csv");
    const auto b = read_lines(dir2 / "records.csv");
    REQUIRE(a.size() == b.size());
    for (size_t i = 1; i < a.size(); ++i) {
      auto ca = split(a[i], ','), cb = split(b[i], ',');
      REQUIRE(ca.size() == 11);
      REQUIRE(cb.size() == 11);
      for (int c = 0; c < 10; ++c) CHECK(ca[c] == cb[c]);  // all but wall_time_s
    }
    fs::remove_all(dir2);
  }

  SUBCASE("cold start under a thread cap keeps values and order") {
    const fs::path dir3 = fresh_dir("sweep3");
    json j3 = tiny_sweep_config(dir3.string());
    j3["warm_start"] = false;
    setenv("PLATES_THREADS", "2", 1);
    std::ostringstream os3;
    const int rc3 = cmd_sweep(parse_config(j3), "", os3);
    unsetenv("PLATES_THREADS");
    CHECK(rc3 == 0);
    const auto rows = read_lines(dir3 / "records.csv");
    REQUIRE(rows.size() == 4);
    for (int i = 0; i < 3; ++i) CHECK(std::stod(split(rows[i + 1], ',')[0]) == cfg.thetas[i]);
    fs::remove_all(dir3);
  }

  fs::remove_all(dir);
}

TEST_CASE("sweep command signals unconverged runs with exit code 2") {
  const fs::path dir = fresh_dir("sweep_unconv");
  json j = tiny_sweep_config(dir.string());
  j["optimizer"] = {{"max_iters", 1}};
  std::ostringstream os;
  const int rc = cmd_sweep(parse_config(j), "", os);
  CHECK(rc == 2);
  const auto lines = read_lines(dir / "records.csv");
  REQUIRE(lines.size() == 4);
  for (int i = 0; i < 3; ++i) CHECK(split(lines[i + 1], ',')[2] == "0");
  fs::remove_all(dir);
}

TEST_CASE("verify command passes honestly and fails under fault injection") {
  const RunConfig cfg = parse_config(json::object());
  std::ostringstream os;
  const int rc = cmd_verify(cfg, os);
  CHECK(rc == 0);
  const std::string text = os.str();
  CHECK(text.find("PASS completed_square_identity") != std::string::npos);
  CHECK(text.find("PASS gradient_finite_difference") != std::string::npos);
  CHECK(text.find("PASS interpolated_integration_decay") != std::string::npos);
  CHECK(text.find("PASS theta_zero_decoupling") != std::string::npos);
  CHECK(text.find("all checks passed") != std::string::npos);

  GradientTerms crooked;
  crooked.membrane = 1.01;  // a 1% gradient fault must trip the check
  std::ostringstream os2;
  const int rc2 = cmd_verify(cfg, os2, crooked);
  CHECK(rc2 == 1);
  CHECK(os2.str().find("FAIL gradient_finite_difference") != std::string::npos);
}

TEST_CASE("executable end to end") {
  const fs::path dir = fresh_dir("exe");
  const fs::path cfg_path = dir / "run.json";
  std::ofstream(cfg_path) << tiny_sweep_config((dir / "out").string()).dump(2);

  SUBCASE("sweep exits 0 and writes its outputs") {
    std::string out;
    const int rc = run_cli("sweep --config " + cfg_path.string(), &out);
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "out" / "records.csv"));
    CHECK(out.find("transition") != std::string::npos);
  }

  SUBCASE("config errors exit 1 with a field path on stderr") {
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << R"({"mesh": {"sides": 3}})";
    std::string out;
    const int rc = run_cli("sweep --config " + bad.string(), &out);
    CHECK(rc == 1);
    CHECK(out.find("mesh: unknown key 'sides'") != std::string::npos);
  }

  SUBCASE("unconverged sweeps exit 2") {
    const fs::path j2 = dir / "unconv.json";
    json j = tiny_sweep_config((dir / "out2").string());
    j["optimizer"] = {{"max_iters", 1}};
    std::ofstream(j2) << j.dump(2);
    std::string out;
    CHECK(run_cli("sweep --config " + j2.string(), &out) == 2);
  }

  SUBCASE("moduli writes the JSON report") {
    std::string out;
    const int rc = run_cli("moduli --config " + cfg_path.string() + " --out " +
                               (dir / "moduli.json").string(),
                           &out);
    CHECK(rc == 0);
    std::ifstream in(dir / "moduli.json");
    json rep;
    in >> rep;
    CHECK(rep.contains("K0"));
  }

  SUBCASE("mesh writes the requested file") {
    std::string out;
    const int rc = run_cli("mesh --config " + cfg_path.string() + " --out " +
                               (dir / "m.txt").string(),
                           &out);
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "m.txt"));
  }

  SUBCASE("usage errors exit 1, help exits 0") {
    std::string out;
    CHECK(run_cli("", &out) == 1);
    CHECK(run_cli("--help", &out) == 0);
    CHECK(out.find("plates") != std::string::npos);
    CHECK(run_cli("sweep", &out) == 1);  // --config is required
  }

  fs::remove_all(dir);
}
