#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "plates/experiments.hpp"

namespace plates {

// Configuration or schema violation; the message names the offending field path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MeshConfig {
  enum class Kind { disk, file };
  Kind kind = Kind::disk;
  double radius = 1.0;
  int refinements = 4;
  std::string path;
};

// Layer stiffness, either as a Lame pair (plane-stress reduced on the fly) or
// as the six upper-triangle coefficients [m11, m12, m13, m22, m23, m33].
struct StiffnessSpec {
  bool isotropic = true;
  double mu = 1.0;
  double lambda = 1.0;
  Form3 coeffs;
  Form3 form() const;
};

struct LayerConfig {
  double t_lo = -0.5;
  double t_hi = 0.5;
  StiffnessSpec stiffness;
  SymMat2 prestrain_const{0.0, 0.0, 0.0};
  SymMat2 prestrain_lin{1.0, 1.0, 0.0};
};

struct RunConfig {
  MeshConfig mesh;
  std::vector<LayerConfig> layers = {LayerConfig{}};
  std::vector<double> thetas = {1, 2, 5, 10, 20, 40, 60, 80, 100, 150};
  double mu_eps_exponent = -0.5;
  OptimizerConfig optimizer;
  InitialCondition init;
  bool warm_start = true;
  std::string output_dir = "out";

  LayerStack stack() const;
  TriMesh build_mesh() const;
  // Curl penalty weight: eps^mu_eps_exponent for the given mesh.
  double mu_eps_for(const TriMesh& m) const;
};

// Strict parse: unknown keys and type mismatches raise ConfigError with the
// field path; absent fields take the defaults above.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Fully populated echo of a config; parsing it back reproduces the run.
nlohmann::json resolved_config(const RunConfig& cfg);

}  // namespace plates
