#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plates/solver.hpp"

namespace plates {

// Seeded uniform dof noise, added after the base state is built.
struct Perturbation {
  std::uint64_t seed = 0;
  double amplitude = 0.0;
};

struct InitialCondition {
  enum class Kind { flat, paraboloid, from_file };
  Kind kind = Kind::flat;
  double a = 1.3;  // paraboloid slopes: z = (a x1, b x2), u = 0
  double b = 0.7;
  std::string path;  // from_file: a "plates-state v1" file
  Perturbation perturbation;
};

DisplacementState initial_state(const TriMesh& mesh, const InitialCondition& init);

// Exact mean of the symmetric gradient of z over the domain.
SymMat2 mean_bending_strain(const TriMesh& mesh, const P1VectorField& z);

// min|eig| / max|eig| of a symmetric 2x2 tensor; 1 for the near-zero tensor
// (max|eig| < 1e-12). Near 1: isotropic (spherical) bending; near 0:
// single-direction (cylindrical) bending.
double symmetry_ratio(const SymMat2& strain);

struct SweepRecord {
  double theta = 0.0;
  int iterations = 0;
  bool converged = false;
  double energy = 0.0;
  SymMat2 strain;  // mean bending strain of the final state
  double strain_eig_max = 0.0;  // strain eigenvalue of largest magnitude
  double strain_eig_min = 0.0;  // strain eigenvalue of smallest magnitude
  double strain_eig_ratio = 0.0;
  double curl_l2 = 0.0;
  double grad_norm = 0.0;
  double wall_time_s = 0.0;
};

struct SweepConfig {
  std::vector<double> thetas;
  bool warm_start = true;  // continue each run from the previous final state
  int threads = 0;         // cold-start runs in parallel; 0 = hardware concurrency
};

// One minimisation per theta, in grid order. Solver exceptions are captured in
// the record (converged = false) and the sweep continues. When `finals` is
// given it receives the final state of each run, in grid order.
std::vector<SweepRecord> theta_sweep(const TriMesh& mesh, const EffectiveModuli& em,
                                     const InitialCondition& init, double mu_eps,
                                     const OptimizerConfig& opt, const SweepConfig& sweep,
                                     std::vector<DisplacementState>* finals = nullptr);

// First interval where strain_eig_ratio crosses below 0.5, linearly
// interpolated; the first theta if the sweep starts below 0.5; nullopt if the
// ratio never drops below 0.5.
std::optional<double> detect_transition(const std::vector<SweepRecord>& records);

// Small-theta analytic reference: z0 = x (slope of v0 = |x|^2/2 - c0) and u0
// minimising the vertex-rule membrane energy sum (area/3) Q20[sym grad u +
// z0 x z0 / 2] over admissible fields. membrane_energy is half that minimal
// sum: the coefficient of theta in the energy at this state for decoupled
// stacks (M1 = 0, b1 = 0).
struct SmallThetaReference {
  DisplacementState state;
  Eigen::VectorXd v0;  // nodal interpolant of |x|^2/2 - c0, c0 the exact mesh mean
  double membrane_energy = 0.0;
};
SmallThetaReference small_theta_reference(const TriMesh& mesh, const EffectiveModuli& em);

}  // namespace plates
