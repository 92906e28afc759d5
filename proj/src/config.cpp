#include "plates/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace plates {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at " + path + ": " + what);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(path, "unknown key '" + key + "'");
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

SymMat2 get_symmat(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected [a11, a22, a12]");
  return {get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]"),
          get_number(j[2], path + "[2]")};
}

MeshConfig parse_mesh(const json& j) {
  MeshConfig m;
  check_keys(j, "mesh", {"type", "radius", "refinements", "path"});
  const std::string type = j.count("type") ? get_string(j["type"], "mesh.type") : "disk";
  if (type == "disk") {
    m.kind = MeshConfig::Kind::disk;
    if (j.count("path")) fail("mesh.path", "only valid for type 'file'");
    if (j.count("radius")) m.radius = get_number(j["radius"], "mesh.radius");
    if (j.count("refinements")) m.refinements = get_int(j["refinements"], "mesh.refinements");
    if (!(m.radius > 0.0)) fail("mesh.radius", "must be positive");
    if (m.refinements < 0 || m.refinements > 10) fail("mesh.refinements", "must lie in [0, 10]");
  } else if (type == "file") {
    m.kind = MeshConfig::Kind::file;
    if (j.count("radius") || j.count("refinements"))
      fail("mesh", "radius/refinements only valid for type 'disk'");
    if (!j.count("path")) fail("mesh.path", "required for type 'file'");
    m.path = get_string(j["path"], "mesh.path");
  } else {
    fail("mesh.type", "expected 'disk' or 'file'");
  }
  return m;
}

StiffnessSpec parse_stiffness(const json& j, const std::string& path) {
  StiffnessSpec s;
  check_keys(j, path, {"mu", "lambda", "form3"});
  if (j.count("form3")) {
    if (j.count("mu") || j.count("lambda"))
      fail(path, "give either (mu, lambda) or form3, not both");
    const json& c = j["form3"];
    if (!c.is_array() || c.size() != 6)
      fail(path + ".form3", "expected [m11, m12, m13, m22, m23, m33]");
    double v[6];
    for (int k = 0; k < 6; ++k)
      v[k] = get_number(c[k], path + ".form3[" + std::to_string(k) + "]");
    s.isotropic = false;
    s.coeffs.m << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
  } else {
    if (j.count("mu")) s.mu = get_number(j["mu"], path + ".mu");
    if (j.count("lambda")) s.lambda = get_number(j["lambda"], path + ".lambda");
    if (!(s.mu > 0.0)) fail(path + ".mu", "must be positive");
    if (s.lambda < 0.0) fail(path + ".lambda", "must be non-negative");
  }
  return s;
}

std::vector<LayerConfig> parse_material(const json& j) {
  check_keys(j, "material", {"layers"});
  if (!j.count("layers")) fail("material.layers", "required");
  const json& arr = j["layers"];
  if (!arr.is_array() || arr.empty()) fail("material.layers", "expected a non-empty array");
  std::vector<LayerConfig> layers;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "material.layers[" + std::to_string(i) + "]";
    const json& L = arr[i];
    check_keys(L, path, {"t_lo", "t_hi", "stiffness", "prestrain_const", "prestrain_lin"});
    LayerConfig lc;
    if (!L.count("t_lo") || !L.count("t_hi")) fail(path, "t_lo and t_hi are required");
    lc.t_lo = get_number(L["t_lo"], path + ".t_lo");
    lc.t_hi = get_number(L["t_hi"], path + ".t_hi");
    if (L.count("stiffness")) lc.stiffness = parse_stiffness(L["stiffness"], path + ".stiffness");
    if (L.count("prestrain_const"))
      lc.prestrain_const = get_symmat(L["prestrain_const"], path + ".prestrain_const");
    if (L.count("prestrain_lin"))
      lc.prestrain_lin = get_symmat(L["prestrain_lin"], path + ".prestrain_lin");
    layers.push_back(lc);
  }
  return layers;
}

std::vector<double> parse_thetas(const json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    if (j.empty()) fail("thetas", "expected a non-empty array or a range object");
    for (std::size_t i = 0; i < j.size(); ++i) {
      const double v = get_number(j[i], "thetas[" + std::to_string(i) + "]");
      if (!(v >= 0.0)) fail("thetas[" + std::to_string(i) + "]", "must be non-negative");
      out.push_back(v);
    }
    for (std::size_t i = 0; i + 1 < out.size(); ++i)
      if (!(out[i] < out[i + 1])) fail("thetas", "must be strictly ascending");
    return out;
  }
  check_keys(j, "thetas", {"start", "stop", "count", "spacing"});
  if (!j.count("start") || !j.count("stop") || !j.count("count"))
    fail("thetas", "range object needs start, stop, count");
  const double start = get_number(j["start"], "thetas.start");
  const double stop = get_number(j["stop"], "thetas.stop");
  const int count = get_int(j["count"], "thetas.count");
  const std::string spacing =
      j.count("spacing") ? get_string(j["spacing"], "thetas.spacing") : "linear";
  if (count < 1) fail("thetas.count", "must be at least 1");
  if (!(start >= 0.0)) fail("thetas.start", "must be non-negative");
  if (count > 1 && !(stop > start)) fail("thetas", "range must be ascending (stop > start)");
  if (spacing == "linear") {
    for (int k = 0; k < count; ++k)
      out.push_back(count == 1 ? start : start + (stop - start) * k / (count - 1));
  } else if (spacing == "log") {
    if (!(start > 0.0) || !(stop > 0.0)) fail("thetas", "log spacing needs positive endpoints");
    for (int k = 0; k < count; ++k)
      out.push_back(count == 1 ? start
                               : std::exp(std::log(start) +
                                          (std::log(stop) - std::log(start)) * k / (count - 1)));
  } else {
    fail("thetas.spacing", "expected 'linear' or 'log'");
  }
  return out;
}

OptimizerConfig parse_optimizer(const json& j) {
  OptimizerConfig o;
  check_keys(j, "optimizer",
             {"rho", "g_tol", "max_iters", "max_backtracks", "metric", "cg_tol"});
  if (j.count("rho")) o.rho = get_number(j["rho"], "optimizer.rho");
  if (j.count("g_tol")) o.g_tol = get_number(j["g_tol"], "optimizer.g_tol");
  if (j.count("max_iters")) o.max_iters = get_int(j["max_iters"], "optimizer.max_iters");
  if (j.count("max_backtracks"))
    o.max_backtracks = get_int(j["max_backtracks"], "optimizer.max_backtracks");
  if (j.count("cg_tol")) o.cg_tol = get_number(j["cg_tol"], "optimizer.cg_tol");
  if (j.count("metric")) {
    const std::string m = get_string(j["metric"], "optimizer.metric");
    if (m == "H1")
      o.metric = Metric::H1;
    else if (m == "L2Lumped")
      o.metric = Metric::L2Lumped;
    else
      fail("optimizer.metric", "expected 'H1' or 'L2Lumped'");
  }
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    fail("optimizer", e.what());
  }
  return o;
}

InitialCondition parse_init(const json& j) {
  InitialCondition ic;
  check_keys(j, "init", {"kind", "a", "b", "path", "perturbation"});
  const std::string kind = j.count("kind") ? get_string(j["kind"], "init.kind") : "flat";
  if (kind == "flat") {
    ic.kind = InitialCondition::Kind::flat;
  } else if (kind == "paraboloid") {
    ic.kind = InitialCondition::Kind::paraboloid;
    if (j.count("a")) ic.a = get_number(j["a"], "init.a");
    if (j.count("b")) ic.b = get_number(j["b"], "init.b");
  } else if (kind == "from_file") {
    ic.kind = InitialCondition::Kind::from_file;
    if (!j.count("path")) fail("init.path", "required for kind 'from_file'");
    ic.path = get_string(j["path"], "init.path");
  } else {
    fail("init.kind", "expected 'flat', 'paraboloid', or 'from_file'");
  }
  if ((j.count("a") || j.count("b")) && kind != "paraboloid")
    fail("init", "a/b only valid for kind 'paraboloid'");
  if (j.count("path") && kind != "from_file") fail("init.path", "only valid for kind 'from_file'");
  if (j.count("perturbation")) {
    const json& p = j["perturbation"];
    check_keys(p, "init.perturbation", {"seed", "amplitude"});
    if (p.count("seed")) {
      if (!p["seed"].is_number_unsigned() && !p["seed"].is_number_integer())
        fail("init.perturbation.seed", "expected an integer");
      ic.perturbation.seed = p["seed"].get<std::uint64_t>();
    }
    if (p.count("amplitude")) {
      ic.perturbation.amplitude = get_number(p["amplitude"], "init.perturbation.amplitude");
      if (ic.perturbation.amplitude < 0.0)
        fail("init.perturbation.amplitude", "must be non-negative");
    }
  }
  return ic;
}

}  // namespace

Form3 StiffnessSpec::form() const {
  return isotropic ? isotropic_reduced_stiffness(mu, lambda) : coeffs;
}

LayerStack RunConfig::stack() const {
  LayerStack s;
  for (const auto& lc : layers)
    s.layers.push_back({lc.t_lo, lc.t_hi, lc.stiffness.form(), lc.prestrain_const,
                        lc.prestrain_lin});
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config error at material.layers: ") + e.what());
  }
  return s;
}

TriMesh RunConfig::build_mesh() const {
  if (mesh.kind == MeshConfig::Kind::disk) return disk_mesh(mesh.radius, mesh.refinements);
  return load_mesh(mesh.path);
}

double RunConfig::mu_eps_for(const TriMesh& m) const {
  return std::pow(m.eps, mu_eps_exponent);
}

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig cfg;
  check_keys(j, "<root>",
             {"mesh", "material", "thetas", "mu_eps_exponent", "optimizer", "init", "warm_start",
              "output_dir"});
  if (j.count("mesh")) cfg.mesh = parse_mesh(j["mesh"]);
  if (j.count("material")) cfg.layers = parse_material(j["material"]);
  if (j.count("thetas")) cfg.thetas = parse_thetas(j["thetas"]);
  if (j.count("mu_eps_exponent"))
    cfg.mu_eps_exponent = get_number(j["mu_eps_exponent"], "mu_eps_exponent");
  if (j.count("optimizer")) cfg.optimizer = parse_optimizer(j["optimizer"]);
  if (j.count("init")) cfg.init = parse_init(j["init"]);
  if (j.count("warm_start")) cfg.warm_start = get_bool(j["warm_start"], "warm_start");
  if (j.count("output_dir")) cfg.output_dir = get_string(j["output_dir"], "output_dir");
  cfg.stack();  // validate the material eagerly
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse failure in ") + path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json resolved_config(const RunConfig& cfg) {
  nlohmann::json j;
  if (cfg.mesh.kind == MeshConfig::Kind::disk) {
    j["mesh"] = {{"type", "disk"}, {"radius", cfg.mesh.radius},
                 {"refinements", cfg.mesh.refinements}};
  } else {
    j["mesh"] = {{"type", "file"}, {"path", cfg.mesh.path}};
  }
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& lc : cfg.layers) {
    nlohmann::json L;
    L["t_lo"] = lc.t_lo;
    L["t_hi"] = lc.t_hi;
    if (lc.stiffness.isotropic) {
      L["stiffness"] = {{"mu", lc.stiffness.mu}, {"lambda", lc.stiffness.lambda}};
    } else {
      const Eigen::Matrix3d& m = lc.stiffness.coeffs.m;
      L["stiffness"] = {{"form3",
                         {m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)}}};
    }
    L["prestrain_const"] = {lc.prestrain_const.a11, lc.prestrain_const.a22,
                            lc.prestrain_const.a12};
    L["prestrain_lin"] = {lc.prestrain_lin.a11, lc.prestrain_lin.a22, lc.prestrain_lin.a12};
    layers.push_back(L);
  }
  j["material"] = {{"layers", layers}};
  j["thetas"] = cfg.thetas;
  j["mu_eps_exponent"] = cfg.mu_eps_exponent;
  j["optimizer"] = {{"rho", cfg.optimizer.rho},
                    {"g_tol", cfg.optimizer.g_tol},
                    {"max_iters", cfg.optimizer.max_iters},
                    {"max_backtracks", cfg.optimizer.max_backtracks},
                    {"metric", cfg.optimizer.metric == Metric::H1 ? "H1" : "L2Lumped"},
                    {"cg_tol", cfg.optimizer.cg_tol}};
  nlohmann::json init;
  switch (cfg.init.kind) {
    case InitialCondition::Kind::flat:
      init["kind"] = "flat";
      break;
    case InitialCondition::Kind::paraboloid:
      init["kind"] = "paraboloid";
      init["a"] = cfg.init.a;
      init["b"] = cfg.init.b;
      break;
    case InitialCondition::Kind::from_file:
      init["kind"] = "from_file";
      init["path"] = cfg.init.path;
      break;
  }
  init["perturbation"] = {{"seed", cfg.init.perturbation.seed},
                          {"amplitude", cfg.init.perturbation.amplitude}};
  j["init"] = init;
  j["warm_start"] = cfg.warm_start;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace plates
