#pragma once

#include <Eigen/Dense>
#include <vector>

namespace plates {

// Symmetric 2x2 tensor stored in the (a11, a22, a12) vector identification.
// Quadratic forms on these tensors act on vec(): q(A) = vec(A)^T M vec(A),
// so the shear entry appears once (not doubled).
struct SymMat2 {
  double a11 = 0.0;
  double a22 = 0.0;
  double a12 = 0.0;

  Eigen::Vector3d vec() const { return {a11, a22, a12}; }
  static SymMat2 from_vec(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

  Eigen::Matrix2d matrix() const {
    Eigen::Matrix2d m;
    m << a11, a12, a12, a22;
    return m;
  }
  // Symmetric part of a general 2x2 matrix.
  static SymMat2 sym_part(const Eigen::Matrix2d& g) {
    return {g(0, 0), g(1, 1), 0.5 * (g(0, 1) + g(1, 0))};
  }
  static SymMat2 identity() { return {1.0, 1.0, 0.0}; }

  SymMat2 operator+(const SymMat2& o) const { return {a11 + o.a11, a22 + o.a22, a12 + o.a12}; }
  SymMat2 operator-(const SymMat2& o) const { return {a11 - o.a11, a22 - o.a22, a12 - o.a12}; }
  SymMat2 operator*(double c) const { return {c * a11, c * a22, c * a12}; }
  SymMat2 operator-() const { return {-a11, -a22, -a12}; }

  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a12; }
  // Eigenvalues of the 2x2 matrix, ascending.
  std::pair<double, double> eigenvalues() const;
};

// Quadratic form on SymMat2, i.e. a symmetric 3x3 coefficient matrix in the
// vector identification above.
struct Form3 {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();

  bool is_symmetric(double rel_tol = 1e-12) const;
  bool is_spd(double rel_tol = 1e-12) const;
  double operator()(const Eigen::Vector3d& a) const { return a.dot(m * a); }
};

// One material layer: occupies (t_lo, t_hi) in the rescaled thickness variable,
// with a constant reduced stiffness form and a prestrain affine in t:
//   prestrain(t) = prestrain_const + t * prestrain_lin.
struct Layer {
  double t_lo = 0.0;
  double t_hi = 0.0;
  Form3 stiffness;
  SymMat2 prestrain_const;
  SymMat2 prestrain_lin;
};

// Ordered layers tiling (-1/2, 1/2). validate() throws std::invalid_argument
// naming the offending layer.
struct LayerStack {
  std::vector<Layer> layers;
  void validate() const;
};

// Thickness-homogenised data of a stack: the moment forms
//   M0 = int M(t) dt,  M1 = int t M(t) dt,  M2 = int t^2 M(t) dt,
// the Schur complement Mstar = M2 - M1 M0^{-1} M1, the prestrain moments
//   b1 = int M(t) b(t) dt,  b2 = int t M(t) b(t) dt,  beta0 = int b^T M b dt,
// and the derived minimiser data: E0 = M0^{-1} b1, F0 = Mstar^{-1}(M1 M0^{-1} b1 - b2),
// K0 = -F0 (the spontaneous curvature: the Hessian of the energy-minimising
// out-of-plane profile in the small-strain regime), and gamma, the residual
// constant of the completed square
//   qbar2[E, F] = gamma + |e + M0^{-1}(M1 f + b1)|^2_{M0} + |f - f0|^2_{Mstar}.
struct EffectiveModuli {
  Form3 M0, M1, M2, Mstar;
  SymMat2 b1, b2;
  double beta0 = 0.0;
  double gamma = 0.0;
  SymMat2 E0, F0, K0;
};

// Plane-stress reduction of an isotropic 3d elasticity form with Lame constants
// (mu, lambda): relaxes the out-of-plane column and yields, in the vector
// identification, [[2mu+lp, lp, 0], [lp, 2mu+lp, 0], [0, 0, 4mu]] with
// lp = 2 mu lambda / (2 mu + lambda). Requires mu > 0, lambda >= 0.
Form3 isotropic_reduced_stiffness(double mu, double lambda);

// Exact per-layer polynomial integration of the moments above.
EffectiveModuli compute_moments(const LayerStack& stack);

// The homogenised quadratic form qbar2[E, F], evaluated in completed-square
// form; agrees with int_{-1/2}^{1/2} Q2(t, E + t F + prestrain(t)) dt.
// Non-symmetric inputs enter through their symmetric parts by construction.
double qbar2(const EffectiveModuli& em, const SymMat2& E, const SymMat2& F);

// min over E of qbar2[E, F]: gamma + |f - f0|^2_{Mstar}.
double qbar2_star(const EffectiveModuli& em, const SymMat2& F);

// Small-strain (linearised von Karman) minimiser: the unique pair of membrane
// strain and curvature K (Hessian of the profile) with qbar2(Esym, -K) = gamma.
struct LvkMinimizer {
  SymMat2 membrane_strain;
  SymMat2 curvature;  // equals K0
};
LvkMinimizer lvk_minimizer(const EffectiveModuli& em);

// Large-strain (linearised Kirchhoff) minimiser set: argmin of
// qbar2_star(-K) - gamma = |k - k0|^2_{Mstar} over the degenerate cone
// det K = 0, parametrised K = s e(phi) x e(phi). For each angle the optimal
// magnitude is closed-form:
//   s*(phi) = <g, Mstar k0> / <g, Mstar g>,  g = vec(e x e),
// and the angle is located on a uniform grid then refined by golden section
// to 1e-10. The argmin is a single point, an antipodal pair of directions, or
// a full ellipse of states (value constant in phi to 1e-9 relative).
struct CylindricalBranch {
  double angle = 0.0;      // in [0, pi)
  double magnitude = 0.0;  // s*(angle)
  double value = 0.0;      // attained qbar2_star(-K), gamma included
};
enum class MinimizerCardinality { point, pair, ellipse };
struct LkiMinimizerSet {
  std::vector<CylindricalBranch> minima;  // global minimisers only
  MinimizerCardinality cardinality = MinimizerCardinality::point;
  bool value_constant = false;
  double min_value = 0.0;
};
LkiMinimizerSet lki_minimizer_set(const EffectiveModuli& em, int n_angles = 256);

}  // namespace plates
