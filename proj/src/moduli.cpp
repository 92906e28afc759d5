#include "plates/moduli.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace plates {

std::pair<double, double> SymMat2::eigenvalues() const {
  const double mean = 0.5 * (a11 + a22);
  const double r = std::hypot(0.5 * (a11 - a22), a12);
  return {mean - r, mean + r};
}

bool Form3::is_symmetric(double rel_tol) const {
  const double scale = std::max(1.0, m.norm());
  return (m - m.transpose()).norm() <= rel_tol * scale;
}

bool Form3::is_spd(double rel_tol) const {
  if (!is_symmetric(rel_tol)) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  const double scale = std::max(1.0, m.norm());
  return es.eigenvalues().minCoeff() > rel_tol * scale;
}

void LayerStack::validate() const {
  if (layers.empty()) throw std::invalid_argument("layer stack: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& L = layers[i];
    const std::string tag = "layer " + std::to_string(i);
    if (!(L.t_lo < L.t_hi))
      throw std::invalid_argument(tag + ": t_lo must be below t_hi");
    if (!L.stiffness.is_spd())
      throw std::invalid_argument(tag + ": stiffness form is not symmetric positive definite");
    if (i > 0 && std::abs(layers[i - 1].t_hi - L.t_lo) > 1e-12)
      throw std::invalid_argument(tag + ": gap or overlap at t = " + std::to_string(L.t_lo));
  }
  if (std::abs(layers.front().t_lo + 0.5) > 1e-12)
    throw std::invalid_argument("layer stack: must start at t = -1/2");
  if (std::abs(layers.back().t_hi - 0.5) > 1e-12)
    throw std::invalid_argument("layer stack: must end at t = 1/2");
}

Form3 isotropic_reduced_stiffness(double mu, double lambda) {
  if (!(mu > 0.0) || lambda < 0.0)
    throw std::invalid_argument("isotropic_reduced_stiffness: need mu > 0, lambda >= 0");
  const double lp = 2.0 * mu * lambda / (2.0 * mu + lambda);
  Form3 q;
  q.m << 2.0 * mu + lp, lp, 0.0,
         lp, 2.0 * mu + lp, 0.0,
         0.0, 0.0, 4.0 * mu;
  return q;
}

EffectiveModuli compute_moments(const LayerStack& stack) {
  stack.validate();

  Eigen::Matrix3d M0 = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d M1 = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d M2 = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b1 = Eigen::Vector3d::Zero();
  Eigen::Vector3d b2 = Eigen::Vector3d::Zero();
  double beta0 = 0.0;

  for (const Layer& L : stack.layers) {
    // Monomial integrals over (t_lo, t_hi).
    const double i0 = L.t_hi - L.t_lo;
    const double i1 = 0.5 * (L.t_hi * L.t_hi - L.t_lo * L.t_lo);
    const double i2 = (L.t_hi * L.t_hi * L.t_hi - L.t_lo * L.t_lo * L.t_lo) / 3.0;
    const Eigen::Matrix3d& M = L.stiffness.m;
    const Eigen::Vector3d bc = L.prestrain_const.vec();
    const Eigen::Vector3d bl = L.prestrain_lin.vec();

    M0 += M * i0;
    M1 += M * i1;
    M2 += M * i2;
    b1 += M * (bc * i0 + bl * i1);
    b2 += M * (bc * i1 + bl * i2);
    beta0 += bc.dot(M * bc) * i0 + 2.0 * bc.dot(M * bl) * i1 + bl.dot(M * bl) * i2;
  }

  EffectiveModuli em;
  em.M0.m = M0;
  em.M1.m = M1;
  em.M2.m = M2;

  Eigen::LLT<Eigen::Matrix3d> llt0(M0);
  if (llt0.info() != Eigen::Success)
    throw std::invalid_argument("compute_moments: M0 is not positive definite");
  em.Mstar.m = M2 - M1 * llt0.solve(M1);
  if (!em.Mstar.is_spd())
    throw std::invalid_argument("compute_moments: Schur complement Mstar lost definiteness");

  em.b1 = SymMat2::from_vec(b1);
  em.b2 = SymMat2::from_vec(b2);
  em.beta0 = beta0;

  const Eigen::Vector3d e0 = llt0.solve(b1);
  Eigen::LLT<Eigen::Matrix3d> llts(em.Mstar.m);
  const Eigen::Vector3d bs = b2 - M1 * e0;  // b2 - M1 M0^{-1} b1
  const Eigen::Vector3d f0 = llts.solve(-bs);

  em.E0 = SymMat2::from_vec(e0);
  em.F0 = SymMat2::from_vec(f0);
  em.K0 = -em.F0;
  em.gamma = beta0 - b1.dot(e0) - bs.dot(llts.solve(bs));
  return em;
}

double qbar2(const EffectiveModuli& em, const SymMat2& E, const SymMat2& F) {
  const Eigen::Vector3d e = E.vec();
  const Eigen::Vector3d f = F.vec();
  const Eigen::Vector3d r0 = e + em.M0.m.llt().solve(em.M1.m * f + em.b1.vec());
  const Eigen::Vector3d rs = f - em.F0.vec();
  return em.gamma + r0.dot(em.M0.m * r0) + rs.dot(em.Mstar.m * rs);
}

double qbar2_star(const EffectiveModuli& em, const SymMat2& F) {
  const Eigen::Vector3d rs = F.vec() - em.F0.vec();
  return em.gamma + rs.dot(em.Mstar.m * rs);
}

LvkMinimizer lvk_minimizer(const EffectiveModuli& em) {
  // The pair zeroing both squares of qbar2: curvature K0, and membrane strain
  // solving M0 e = -(M1 f0 + b1), i.e. E = L0^{-1} L1 K0 - E0.
  const Eigen::Vector3d e =
      em.M0.m.llt().solve(-(em.M1.m * em.F0.vec() + em.b1.vec()));
  return {SymMat2::from_vec(e), em.K0};
}

namespace {

// Objective on the cylindrical cone at fixed direction angle: the magnitude
// minimisation is exact, so this is a function of the angle alone.
struct ConeObjective {
  const Eigen::Matrix3d& Ms;
  Eigen::Vector3d k0;

  double magnitude(double phi) const {
    const double c = std::cos(phi), s = std::sin(phi);
    const Eigen::Vector3d g(c * c, s * s, c * s);
    return g.dot(Ms * k0) / g.dot(Ms * g);
  }
  double value(double phi) const {
    const double c = std::cos(phi), s = std::sin(phi);
    const Eigen::Vector3d g(c * c, s * s, c * s);
    const double sstar = g.dot(Ms * k0) / g.dot(Ms * g);
    const Eigen::Vector3d r = sstar * g - k0;
    return r.dot(Ms * r);
  }
};

double golden_section(const ConeObjective& obj, double a, double b, double tol) {
  const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = obj.value(x1);
  double f2 = obj.value(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = obj.value(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = obj.value(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

LkiMinimizerSet lki_minimizer_set(const EffectiveModuli& em, int n_angles) {
  if (n_angles < 8) throw std::invalid_argument("lki_minimizer_set: need n_angles >= 8");
  const double pi = std::acos(-1.0);
  const ConeObjective obj{em.Mstar.m, em.K0.vec()};

  std::vector<double> vals(n_angles);
  double vmin = 0.0, vmax = 0.0, smax = 0.0;
  for (int j = 0; j < n_angles; ++j) {
    const double phi = pi * j / n_angles;
    vals[j] = obj.value(phi);
    smax = std::max(smax, std::abs(obj.magnitude(phi)));
    if (j == 0) {
      vmin = vmax = vals[j];
    } else {
      vmin = std::min(vmin, vals[j]);
      vmax = std::max(vmax, vals[j]);
    }
  }

  LkiMinimizerSet out;
  out.value_constant = (vmax - vmin) <= 1e-9 * std::max(1.0, std::abs(vmax));

  if (out.value_constant) {
    // Either the zero state (K0 = 0, magnitude identically ~0) or a full
    // ellipse of equally good cylinders.
    out.min_value = em.gamma + vmin;
    if (smax <= 1e-9 * std::max(1.0, em.K0.vec().norm())) {
      out.minima.push_back({0.0, 0.0, out.min_value});
      out.cardinality = MinimizerCardinality::point;
    } else {
      const int n_report = 8;
      for (int j = 0; j < n_report; ++j) {
        const double phi = pi * j / n_report;
        out.minima.push_back({phi, obj.magnitude(phi), em.gamma + obj.value(phi)});
      }
      out.cardinality = MinimizerCardinality::ellipse;
    }
    return out;
  }

  // Local minima on the periodic grid, refined by golden section.
  const double h = pi / n_angles;
  std::vector<CylindricalBranch> candidates;
  for (int j = 0; j < n_angles; ++j) {
    const double prev = vals[(j + n_angles - 1) % n_angles];
    const double next = vals[(j + 1) % n_angles];
    if (vals[j] <= prev && vals[j] < next) {
      const double center = pi * j / n_angles;
      double phi = golden_section(obj, center - h, center + h, 1e-10);
      phi = std::fmod(phi, pi);
      if (phi < 0.0) phi += pi;
      candidates.push_back({phi, obj.magnitude(phi), em.gamma + obj.value(phi)});
    }
  }

  if (candidates.empty()) {
    // Ties everywhere on the grid without being constant; fall back to argmin.
    int jbest = int(std::min_element(vals.begin(), vals.end()) - vals.begin());
    const double phi = pi * jbest / n_angles;
    candidates.push_back({phi, obj.magnitude(phi), em.gamma + obj.value(phi)});
  }

  // Keep the global minima, merging duplicates across the period seam.
  double best = candidates.front().value;
  for (const auto& c : candidates) best = std::min(best, c.value);
  const double keep_tol = 1e-9 * std::max(1.0, std::abs(best));
  for (const auto& c : candidates) {
    if (c.value > best + keep_tol) continue;
    bool dup = false;
    for (const auto& m : out.minima) {
      double d = std::abs(m.angle - c.angle);
      d = std::min(d, pi - d);
      if (d < 1e-6) dup = true;
    }
    if (!dup) out.minima.push_back(c);
  }
  out.min_value = best;
  out.cardinality = out.minima.size() == 1 ? MinimizerCardinality::point
                                           : MinimizerCardinality::pair;
  return out;
}

}  // namespace plates
