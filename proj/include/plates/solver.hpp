#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "plates/fem.hpp"

namespace plates {

// Removes the rigid component a + b*(-x2, x1) from each field so that the
// field mean and the mean antisymmetric gradient vanish (computed from exact
// nodal-rule integrals). Coefficients below 1e-14 of the field scale snap to
// zero, which makes the projection exactly idempotent.
void project_field(const TriMesh& mesh, Eigen::Ref<Eigen::VectorXd> field);
DisplacementState project_admissible(const TriMesh& mesh, DisplacementState state);
Eigen::VectorXd project_admissible(const TriMesh& mesh, Eigen::VectorXd stacked);

struct OptimizerConfig {
  double rho = 0.25;        // Armijo fraction, in (0, 1/2)
  double g_tol = 1e-8;      // stop when ||p||_gram <= g_tol * (1 + initial ||p||_gram)
  int max_iters = 20000;
  int max_backtracks = 40;
  Metric metric = Metric::H1;
  double cg_tol = 1e-10;
  void validate() const;  // throws std::invalid_argument
};

struct SolveReport {
  bool converged = false;
  int iterations = 0;
  std::string termination;  // "gradient_tolerance" | "max_iterations" | "line_search_stall"
  double final_energy = 0.0;
  double final_grad_norm = 0.0;  // ||p||_gram at the last direction computation
  double final_curl_l2 = 0.0;    // curl_l2 of the final z field
  double wall_time_s = 0.0;
  std::vector<double> energies;          // initial energy, then one entry per accepted step
  std::vector<double> step_sizes;        // accepted alpha per step
  std::vector<double> direction_norms2;  // (p, p)_gram per step
};

using IterationObserver =
    std::function<void(int iteration, const DisplacementState& state, double energy)>;

// Projected gradient descent in the chosen metric with Armijo backtracking:
//   d = -riesz_solve(gram, gradient),  p = project_admissible(d),
//   accept the largest alpha in {1, 1/2, 1/4, ...} with
//   energy(w + alpha p) <= energy(w) - rho * alpha * (p, p)_gram.
std::pair<DisplacementState, SolveReport> minimize(
    const TriMesh& mesh, const EffectiveModuli& em, double theta, const DisplacementState& init,
    double mu_eps, const OptimizerConfig& cfg = {}, const IterationObserver& observer = {});

}  // namespace plates
