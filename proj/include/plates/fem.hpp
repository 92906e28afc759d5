#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <string>

#include "plates/mesh.hpp"
#include "plates/moduli.hpp"

namespace plates {

// Piecewise affine vector field; dof layout [2*node + component].
struct P1VectorField {
  const TriMesh* mesh = nullptr;
  Eigen::VectorXd dofs;

  P1VectorField() = default;
  explicit P1VectorField(const TriMesh& m)
      : mesh(&m), dofs(Eigen::VectorXd::Zero(2 * m.n_nodes())) {}

  Eigen::Vector2d at(int node) const { return {dofs[2 * node], dofs[2 * node + 1]}; }
  void set(int node, const Eigen::Vector2d& v) {
    dofs[2 * node] = v.x();
    dofs[2 * node + 1] = v.y();
  }
  // Constant gradient on element t, (d w_a / d x_b) at (a, b).
  Eigen::Matrix2d grad_on(int t) const;
};

// Optimisation state: in-plane displacement u and out-of-plane slope field z
// (the gradient surrogate of the deflection). Stacked layout [u; z].
struct DisplacementState {
  P1VectorField u, z;

  DisplacementState() = default;
  explicit DisplacementState(const TriMesh& m) : u(m), z(m) {}

  Eigen::VectorXd stacked() const;
  static DisplacementState from_stacked(const TriMesh& m, const Eigen::VectorXd& w);
};

// Text format "plates-state v1": header, node count, then one line per node
// holding u1 u2 z1 z2 at 17 significant digits.
DisplacementState load_state(const TriMesh& mesh, const std::string& path);
void save_state(const DisplacementState& state, const std::string& path);

enum class Metric { H1, L2Lumped };

// Gram operator of the chosen metric, applied per scalar component; accepts
// single-field (2n) or stacked state (4n) vectors.
class GramOperator {
 public:
  using Preconditioner = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

  GramOperator(const TriMesh& mesh, Metric metric);

  Metric metric() const { return metric_; }
  const TriMesh& mesh() const { return *mesh_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  double inner(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  double norm(const Eigen::VectorXd& x) const;
  const Eigen::VectorXd& lumped_diagonal() const { return lumped_; }
  const Eigen::SparseMatrix<double>& scalar_matrix() const { return scalar_; }
  // Sparse factorisation of the scalar matrix (H1 metric only, when the
  // factorisation succeeded); used to precondition the Riesz solves. The gram
  // matrix is fixed per mesh, so the factor is computed once and reused.
  const Preconditioner* preconditioner() const { return have_factor_ ? &factor_ : nullptr; }

 private:
  const TriMesh* mesh_;
  Metric metric_;
  Eigen::SparseMatrix<double> scalar_;  // n x n, H1 metric
  Eigen::VectorXd lumped_;              // n, lumped L2 metric
  Preconditioner factor_;
  bool have_factor_ = false;
};

// Riesz representative: solves gram * x = rhs by conjugate gradient with fixed
// iteration order (relative residual rel_tol against |rhs|, iteration cap
// 10 * size); the lumped metric solves diagonally. An optional warm start
// seeds the CG iteration (the tolerance is unchanged). Throws
// std::runtime_error if the cap hits.
Eigen::VectorXd riesz_solve(const GramOperator& gram, const Eigen::VectorXd& rhs,
                            double rel_tol = 1e-10,
                            const Eigen::VectorXd* warm_start = nullptr);

// Discrete energy of a state: the vertex-rule integral
//   1/2 sum_T (area_T/3) sum_{p in T} qbar2[ sqrt(theta) (sym grad u|_T + z(p) x z(p) / 2), -grad z|_T ]
// plus the curl penalty mu_eps * sum_T area_T (curl z|_T)^2. The additive
// constant gamma*|omega|/2 of qbar2 is included, so the small-strain optimum
// sits exactly at that value.
double energy(const TriMesh& mesh, const EffectiveModuli& em, double theta,
              const DisplacementState& state, double mu_eps);

// Term-wise split of energy(): membrane collects everything that vanishes at
// theta = 0 (including stiffness cross terms), bending is the zero-membrane
// remainder less the constant, curl is the penalty, constant = gamma*|omega|/2.
struct EnergyBreakdown {
  double membrane = 0.0;
  double bending = 0.0;
  double curl = 0.0;
  double constant = 0.0;
  double total = 0.0;
};
EnergyBreakdown energy_breakdown(const TriMesh& mesh, const EffectiveModuli& em, double theta,
                                 const DisplacementState& state, double mu_eps);

// Coefficients c of the quartic polynomial alpha -> energy(state + alpha*dir),
// so that energy(w + a d) == c[0] + c[1] a + c[2] a^2 + c[3] a^3 + c[4] a^4
// exactly (the energy is a quartic along any line in dof space). dir uses the
// stacked [u; z] layout. One assembly pass replaces repeated energy calls in
// line searches and directional finite-difference checks.
std::array<double, 5> energy_line_quartic(const TriMesh& mesh, const EffectiveModuli& em,
                                          double theta, const DisplacementState& state,
                                          const Eigen::VectorXd& dir, double mu_eps);

// Fault-injection knob for the verification suite: scales individual gradient
// terms. The default is the exact derivative of energy().
struct GradientTerms {
  double membrane = 1.0;
  double bending = 1.0;
  double curl = 1.0;
};

// Exact derivative of energy() with respect to the stacked dofs [u; z].
Eigen::VectorXd gradient(const TriMesh& mesh, const EffectiveModuli& em, double theta,
                         const DisplacementState& state, double mu_eps,
                         const GradientTerms& terms = {});

// L2 norm of the element-wise curl of z: sqrt( sum_T area_T (d1 z2 - d2 z1)^2 ).
double curl_l2(const P1VectorField& z);

// Least-squares deflection recovery: minimises ||grad v - z||_{L2} over P1
// scalars with zero mean; returns the nodal values and the attained residual.
struct ReconstructedDeflection {
  Eigen::VectorXd v;
  double residual = 0.0;
};
ReconstructedDeflection reconstruct_v(const TriMesh& mesh, const P1VectorField& z);

// Exact P1 integrals of both fields: means, mean antisymmetric gradient parts
// (scalar convention w12 = (d1 w2 - d2 w1)/2), and the mean symmetric gradient
// of z (the mean bending strain).
struct MeanFields {
  Eigen::Vector2d mean_u = Eigen::Vector2d::Zero();
  Eigen::Vector2d mean_z = Eigen::Vector2d::Zero();
  double mean_antisym_grad_u = 0.0;
  double mean_antisym_grad_z = 0.0;
  SymMat2 mean_symgrad_z;
};
MeanFields mean_fields(const DisplacementState& state);

}  // namespace plates
