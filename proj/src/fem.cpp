#include "plates/fem.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace plates {

namespace {

void check_state(const TriMesh& mesh, const DisplacementState& state) {
  if (state.u.mesh != &mesh || state.z.mesh != &mesh)
    throw std::invalid_argument("state fields are not bound to the given mesh");
  if (state.u.dofs.size() != 2 * mesh.n_nodes() || state.z.dofs.size() != 2 * mesh.n_nodes())
    throw std::invalid_argument("state dof vectors have the wrong size");
}

void check_params(double theta, double mu_eps) {
  if (!(theta >= 0.0)) throw std::invalid_argument("theta must be non-negative");
  if (!(mu_eps >= 0.0)) throw std::invalid_argument("mu_eps must be non-negative");
}

inline Eigen::Vector3d vec_sym(const Eigen::Matrix2d& g) {
  return {g(0, 0), g(1, 1), 0.5 * (g(0, 1) + g(1, 0))};
}

// vec of the symmetric part of e_a x v (basis direction times vector).
inline Eigen::Vector3d vec_sym_basis(int a, const Eigen::Vector2d& v) {
  if (a == 0) return {v.x(), 0.0, 0.5 * v.y()};
  return {0.0, v.y(), 0.5 * v.x()};
}

inline Eigen::Vector3d vec_outer(const Eigen::Vector2d& z) {
  return {z.x() * z.x(), z.y() * z.y(), z.x() * z.y()};
}

// Bilinear expansion of vec_outer: vec_outer(z + a*w) =
//   vec_outer(z) + a * vec_outer_cross(z, w) + a^2 * vec_outer(w).
inline Eigen::Vector3d vec_outer_cross(const Eigen::Vector2d& z, const Eigen::Vector2d& w) {
  return {2.0 * z.x() * w.x(), 2.0 * z.y() * w.y(), z.x() * w.y() + z.y() * w.x()};
}

inline double elem_curl(const Eigen::Matrix2d& dz) { return dz(1, 0) - dz(0, 1); }

}  // namespace

Eigen::Matrix2d P1VectorField::grad_on(int t) const {
  const auto& tri = mesh->tris[t];
  const auto& g = mesh->elems[t];
  Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
  for (int k = 0; k < 3; ++k) d += at(tri[k]) * g.grad[k].transpose();
  return d;
}

Eigen::VectorXd DisplacementState::stacked() const {
  Eigen::VectorXd w(u.dofs.size() + z.dofs.size());
  w << u.dofs, z.dofs;
  return w;
}

DisplacementState DisplacementState::from_stacked(const TriMesh& m, const Eigen::VectorXd& w) {
  const int two_n = 2 * m.n_nodes();
  if (w.size() != 2 * two_n)
    throw std::invalid_argument("stacked state vector has the wrong size");
  DisplacementState s(m);
  s.u.dofs = w.head(two_n);
  s.z.dofs = w.tail(two_n);
  return s;
}

DisplacementState load_state(const TriMesh& mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open state file " + path);
  std::string line;
  if (!std::getline(in, line) || line != "plates-state v1")
    throw std::runtime_error(path + " line 1: expected header 'plates-state v1'");
  long n = 0;
  if (!std::getline(in, line) || !(std::istringstream(line) >> n))
    throw std::runtime_error(path + " line 2: expected node count");
  if (n != mesh.n_nodes())
    throw std::runtime_error(path + ": state has " + std::to_string(n) +
                             " nodes, mesh has " + std::to_string(mesh.n_nodes()));
  DisplacementState s(mesh);
  for (long i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error(path + " line " + std::to_string(i + 3) + ": unexpected end of file");
    std::istringstream ss(line);
    double u1, u2, z1, z2;
    if (!(ss >> u1 >> u2 >> z1 >> z2))
      throw std::runtime_error(path + " line " + std::to_string(i + 3) +
                               ": expected four values u1 u2 z1 z2");
    s.u.dofs[2 * i] = u1;
    s.u.dofs[2 * i + 1] = u2;
    s.z.dofs[2 * i] = z1;
    s.z.dofs[2 * i + 1] = z2;
  }
  return s;
}

void save_state(const DisplacementState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write state file " + path);
  const int n = state.u.mesh->n_nodes();
  out << "plates-state v1\n" << n << "\n";
  char buf[128];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", state.u.dofs[2 * i],
                  state.u.dofs[2 * i + 1], state.z.dofs[2 * i], state.z.dofs[2 * i + 1]);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failure on " + path);
}

GramOperator::GramOperator(const TriMesh& mesh, Metric metric) : mesh_(&mesh), metric_(metric) {
  const int n = mesh.n_nodes();
  if (metric == Metric::L2Lumped) {
    lumped_ = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < mesh.n_tris(); ++t)
      for (int k = 0; k < 3; ++k) lumped_[mesh.tris[t][k]] += mesh.elems[t].area / 3.0;
    return;
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const auto& g = mesh.elems[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double mass = g.area / 12.0 * (i == j ? 2.0 : 1.0);
        const double stiff = g.area * g.grad[i].dot(g.grad[j]);
        trip.emplace_back(tri[i], tri[j], mass + stiff);
      }
  }
  scalar_.resize(n, n);
  scalar_.setFromTriplets(trip.begin(), trip.end());
  factor_.compute(scalar_);
  have_factor_ = factor_.info() == Eigen::Success;
}

Eigen::VectorXd GramOperator::apply(const Eigen::VectorXd& x) const {
  const int n = mesh_->n_nodes();
  if (x.size() % (2 * n) != 0 || x.size() == 0)
    throw std::invalid_argument("gram apply: vector size is not a multiple of the field size");
  const int blocks = static_cast<int>(x.size() / (2 * n));
  Eigen::VectorXd y(x.size());
  Eigen::VectorXd tmp(n), res(n);
  for (int b = 0; b < blocks; ++b)
    for (int c = 0; c < 2; ++c) {
      const int off = 2 * n * b + c;
      for (int i = 0; i < n; ++i) tmp[i] = x[off + 2 * i];
      if (metric_ == Metric::H1)
        res = scalar_ * tmp;
      else
        res = lumped_.cwiseProduct(tmp);
      for (int i = 0; i < n; ++i) y[off + 2 * i] = res[i];
    }
  return y;
}

double GramOperator::inner(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return x.dot(apply(y));
}

double GramOperator::norm(const Eigen::VectorXd& x) const {
  return std::sqrt(std::max(0.0, inner(x, x)));
}

Eigen::VectorXd riesz_solve(const GramOperator& gram, const Eigen::VectorXd& rhs, double rel_tol,
                            const Eigen::VectorXd* warm_start) {
  if (!rhs.allFinite())
    throw std::runtime_error("riesz_solve: non-finite right-hand side");
  if (gram.metric() == Metric::L2Lumped) {
    const int n = static_cast<int>(gram.lumped_diagonal().size());
    Eigen::VectorXd x(rhs.size());
    for (int idx = 0; idx < rhs.size(); ++idx) {
      const int node = (idx % (2 * n)) / 2;
      x[idx] = rhs[idx] / gram.lumped_diagonal()[node];
    }
    return x;
  }

  // H1 metric: the stacked system is block diagonal (one copy of the scalar
  // matrix per component), so each component is solved independently by
  // preconditioned conjugate gradient on contiguous vectors, using the
  // factored scalar matrix as the preconditioner. The stopping test uses the
  // plain residual, per component, which implies the stacked relative
  // residual bound.
  const Eigen::SparseMatrix<double>& A = gram.scalar_matrix();
  const auto* precond = gram.preconditioner();
  const int n = static_cast<int>(A.rows());
  if (rhs.size() == 0 || rhs.size() % (2 * n) != 0)
    throw std::invalid_argument("riesz_solve: vector size is not a multiple of the field size");
  const int comps = static_cast<int>(rhs.size() / n);  // 4 for stacked, 2 for one field
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  const bool warm = warm_start != nullptr && warm_start->size() == rhs.size();
  const long cap = 10 * n;

  Eigen::VectorXd b(n), xc(n), r(n), z(n), p(n), Ap(n);
  for (int comp = 0; comp < comps; ++comp) {
    const int off = 2 * n * (comp / 2) + comp % 2;
    for (int i = 0; i < n; ++i) b[i] = rhs[off + 2 * i];
    const double b_norm = b.norm();
    if (b_norm == 0.0) continue;  // x stays zero for this component

    if (warm) {
      for (int i = 0; i < n; ++i) xc[i] = (*warm_start)[off + 2 * i];
      r = b - A * xc;
    } else {
      xc.setZero();
      r = b;
    }
    if (precond)
      z = precond->solve(r);
    else
      z = r;
    p = z;
    double rz = r.dot(z);
    bool done = r.norm() <= rel_tol * b_norm;
    for (long it = 0; !done && it < cap; ++it) {
      Ap.noalias() = A * p;
      const double alpha = rz / p.dot(Ap);
      xc += alpha * p;
      r -= alpha * Ap;
      if (r.norm() <= rel_tol * b_norm) {
        done = true;
        break;
      }
      if (precond)
        z = precond->solve(r);
      else
        z = r;
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    if (!done) throw std::runtime_error("riesz_solve: conjugate gradient hit the iteration cap");
    for (int i = 0; i < n; ++i) x[off + 2 * i] = xc[i];
  }
  return x;
}

EnergyBreakdown energy_breakdown(const TriMesh& mesh, const EffectiveModuli& em, double theta,
                                 const DisplacementState& state, double mu_eps) {
  check_state(mesh, state);
  check_params(theta, mu_eps);
  const double sqth = std::sqrt(theta);
  const Eigen::Matrix3d& M0 = em.M0.m;
  const Eigen::Matrix3d& M1 = em.M1.m;
  const Eigen::Matrix3d& M2 = em.M2.m;
  const Eigen::Vector3d b1 = em.b1.vec();
  const Eigen::Vector3d b2 = em.b2.vec();

  double membrane = 0.0, fpart_acc = 0.0, pen = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const double A = mesh.elems[t].area;
    const Eigen::Vector3d su = vec_sym(state.u.grad_on(t));
    const Eigen::Matrix2d dz = state.z.grad_on(t);
    const Eigen::Vector3d f = -vec_sym(dz);

    fpart_acc += A * (f.dot(M2 * f) + 2.0 * f.dot(b2) + em.beta0);
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d e = sqth * (su + 0.5 * vec_outer(state.z.at(tri[k])));
      s += e.dot(M0 * e) + 2.0 * e.dot(M1 * f) + 2.0 * e.dot(b1);
    }
    membrane += (A / 3.0) * s;
    const double c = elem_curl(dz);
    pen += A * c * c;
  }

  EnergyBreakdown out;
  out.constant = 0.5 * em.gamma * mesh.area;
  out.membrane = 0.5 * membrane;
  out.bending = 0.5 * fpart_acc - out.constant;
  out.curl = mu_eps * pen;
  out.total = out.membrane + out.bending + out.curl + out.constant;
  return out;
}

double energy(const TriMesh& mesh, const EffectiveModuli& em, double theta,
              const DisplacementState& state, double mu_eps) {
  return energy_breakdown(mesh, em, theta, state, mu_eps).total;
}

std::array<double, 5> energy_line_quartic(const TriMesh& mesh, const EffectiveModuli& em,
                                          double theta, const DisplacementState& state,
                                          const Eigen::VectorXd& dir, double mu_eps) {
  check_state(mesh, state);
  check_params(theta, mu_eps);
  const int two_n = 2 * mesh.n_nodes();
  if (dir.size() != 2 * two_n)
    throw std::invalid_argument("energy_line_quartic: direction has the wrong stacked size");
  const DisplacementState d = DisplacementState::from_stacked(mesh, dir);

  const double sqth = std::sqrt(theta);
  const Eigen::Matrix3d& M0 = em.M0.m;
  const Eigen::Matrix3d& M1 = em.M1.m;
  const Eigen::Matrix3d& M2 = em.M2.m;
  const Eigen::Vector3d b1 = em.b1.vec();
  const Eigen::Vector3d b2 = em.b2.vec();

  std::array<double, 5> c{};
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const double A = mesh.elems[t].area;
    const Eigen::Vector3d su = vec_sym(state.u.grad_on(t));
    const Eigen::Vector3d su_d = vec_sym(d.u.grad_on(t));
    const Eigen::Matrix2d dz = state.z.grad_on(t);
    const Eigen::Matrix2d dz_d = d.z.grad_on(t);
    const Eigen::Vector3d f0 = -vec_sym(dz);
    const Eigen::Vector3d f1 = -vec_sym(dz_d);

    // Pure bending block: (f, M2 f) + 2 (f, b2) + beta0 with f affine in alpha.
    c[0] += 0.5 * A * (f0.dot(M2 * f0) + 2.0 * f0.dot(b2) + em.beta0);
    c[1] += 0.5 * A * 2.0 * (f0.dot(M2 * f1) + f1.dot(b2));
    c[2] += 0.5 * A * f1.dot(M2 * f1);

    // Membrane block at each vertex: e quadratic in alpha, coupled to f and b1.
    const double w = 0.5 * A / 3.0;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d zk = state.z.at(tri[k]);
      const Eigen::Vector2d wk = d.z.at(tri[k]);
      const Eigen::Vector3d e0 = sqth * (su + 0.5 * vec_outer(zk));
      const Eigen::Vector3d e1 = sqth * (su_d + 0.5 * vec_outer_cross(zk, wk));
      const Eigen::Vector3d e2 = sqth * 0.5 * vec_outer(wk);
      c[0] += w * (e0.dot(M0 * e0) + 2.0 * e0.dot(M1 * f0) + 2.0 * e0.dot(b1));
      c[1] += w * (2.0 * e0.dot(M0 * e1) + 2.0 * (e1.dot(M1 * f0) + e0.dot(M1 * f1)) +
                   2.0 * e1.dot(b1));
      c[2] += w * (2.0 * e0.dot(M0 * e2) + e1.dot(M0 * e1) +
                   2.0 * (e2.dot(M1 * f0) + e1.dot(M1 * f1)) + 2.0 * e2.dot(b1));
      c[3] += w * (2.0 * e1.dot(M0 * e2) + 2.0 * e2.dot(M1 * f1));
      c[4] += w * e2.dot(M0 * e2);
    }

    // Curl penalty: element curl affine in alpha.
    const double c0 = elem_curl(dz);
    const double c1 = elem_curl(dz_d);
    c[0] += mu_eps * A * c0 * c0;
    c[1] += mu_eps * A * 2.0 * c0 * c1;
    c[2] += mu_eps * A * c1 * c1;
  }
  return c;
}

Eigen::VectorXd gradient(const TriMesh& mesh, const EffectiveModuli& em, double theta,
                         const DisplacementState& state, double mu_eps,
                         const GradientTerms& terms) {
  check_state(mesh, state);
  check_params(theta, mu_eps);
  const int two_n = 2 * mesh.n_nodes();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(2 * two_n);
  auto gu = grad.head(two_n);
  auto gz = grad.tail(two_n);

  const double sqth = std::sqrt(theta);
  const Eigen::Matrix3d& M0 = em.M0.m;
  const Eigen::Matrix3d& M1 = em.M1.m;
  const Eigen::Matrix3d& M2 = em.M2.m;
  const Eigen::Vector3d b1 = em.b1.vec();
  const Eigen::Vector3d b2 = em.b2.vec();

  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const auto& geo = mesh.elems[t];
    const double w = geo.area / 3.0;
    const Eigen::Vector3d su = vec_sym(state.u.grad_on(t));
    const Eigen::Matrix2d dz = state.z.grad_on(t);
    const Eigen::Vector3d f = -vec_sym(dz);

    // Per-vertex membrane strain derivatives of qbar2 in its two slots.
    std::array<Eigen::Vector3d, 3> Qe;
    Eigen::Vector3d Qe_sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d Qf_sum = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d e = sqth * (su + 0.5 * vec_outer(state.z.at(tri[k])));
      Qe[k] = 2.0 * (M0 * e + M1 * f + b1);
      Qe_sum += Qe[k];
      Qf_sum += 2.0 * (M1 * e + M2 * f + b2);
    }

    const double c = elem_curl(dz);
    for (int i = 0; i < 3; ++i) {
      const int node = tri[i];
      const Eigen::Vector2d& gi = geo.grad[i];
      const Eigen::Vector2d zi = state.z.at(node);
      for (int a = 0; a < 2; ++a) {
        const Eigen::Vector3d dstrain = vec_sym_basis(a, gi);
        gu[2 * node + a] += terms.membrane * 0.5 * w * sqth * Qe_sum.dot(dstrain);
        gz[2 * node + a] +=
            terms.membrane * 0.5 * w * sqth * Qe[i].dot(vec_sym_basis(a, zi)) -
            terms.bending * 0.5 * w * Qf_sum.dot(dstrain);
      }
      gz[2 * node + 0] += terms.curl * mu_eps * geo.area * 2.0 * c * (-gi.y());
      gz[2 * node + 1] += terms.curl * mu_eps * geo.area * 2.0 * c * gi.x();
    }
  }
  return grad;
}

double curl_l2(const P1VectorField& z) {
  const TriMesh& mesh = *z.mesh;
  double acc = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const double c = elem_curl(z.grad_on(t));
    acc += mesh.elems[t].area * c * c;
  }
  return std::sqrt(acc);
}

namespace {

Eigen::VectorXd cg_sparse(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& rhs,
                          double rel_tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  double rs = r.dot(r);
  const double rhs_norm = std::sqrt(rs);
  if (rhs_norm == 0.0) return x;
  const long cap = 10 * rhs.size();
  for (long it = 0; it < cap; ++it) {
    if (std::sqrt(rs) <= rel_tol * rhs_norm) return x;
    const Eigen::VectorXd Ap = A * p;
    const double alpha = rs / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rs_new = r.dot(r);
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return x;  // best effort; callers report the attained residual
}

}  // namespace

ReconstructedDeflection reconstruct_v(const TriMesh& mesh, const P1VectorField& z) {
  if (z.mesh != &mesh) throw std::invalid_argument("reconstruct_v: field not bound to mesh");
  const int n = mesh.n_nodes();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh.n_tris());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const auto& g = mesh.elems[t];
    const Eigen::Vector2d zbar = (z.at(tri[0]) + z.at(tri[1]) + z.at(tri[2])) / 3.0;
    for (int i = 0; i < 3; ++i) {
      rhs[tri[i]] += g.area * g.grad[i].dot(zbar);
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(tri[i], tri[j], g.area * g.grad[i].dot(g.grad[j]));
    }
  }
  Eigen::SparseMatrix<double> K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());

  ReconstructedDeflection out;
  out.v = cg_sparse(K, rhs, 1e-10);

  // Enforce zero area mean (the stiffness system fixes v only up to constants).
  double vmean = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    vmean += mesh.elems[t].area / 3.0 * (out.v[tri[0]] + out.v[tri[1]] + out.v[tri[2]]);
  }
  out.v.array() -= vmean / mesh.area;

  double res2 = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const auto& g = mesh.elems[t];
    Eigen::Vector2d dv = Eigen::Vector2d::Zero();
    for (int k = 0; k < 3; ++k) dv += out.v[tri[k]] * g.grad[k];
    const Eigen::Vector2d z0 = z.at(tri[0]), z1 = z.at(tri[1]), z2 = z.at(tri[2]);
    const Eigen::Vector2d zsum = z0 + z1 + z2;
    const double zz =
        g.area / 12.0 * (z0.squaredNorm() + z1.squaredNorm() + z2.squaredNorm() + zsum.squaredNorm());
    res2 += zz - 2.0 * dv.dot(g.area * zsum / 3.0) + g.area * dv.squaredNorm();
  }
  out.residual = std::sqrt(std::max(0.0, res2));
  return out;
}

MeanFields mean_fields(const DisplacementState& state) {
  const TriMesh& mesh = *state.u.mesh;
  MeanFields out;
  Eigen::Matrix2d du_acc = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d dz_acc = Eigen::Matrix2d::Zero();
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const double w = mesh.elems[t].area / 3.0;
    for (int k = 0; k < 3; ++k) {
      out.mean_u += w * state.u.at(tri[k]);
      out.mean_z += w * state.z.at(tri[k]);
    }
    du_acc += mesh.elems[t].area * state.u.grad_on(t);
    dz_acc += mesh.elems[t].area * state.z.grad_on(t);
  }
  out.mean_u /= mesh.area;
  out.mean_z /= mesh.area;
  out.mean_antisym_grad_u = 0.5 * (du_acc(1, 0) - du_acc(0, 1)) / mesh.area;
  out.mean_antisym_grad_z = 0.5 * (dz_acc(1, 0) - dz_acc(0, 1)) / mesh.area;
  const Eigen::Matrix2d dz_mean = dz_acc / mesh.area;
  out.mean_symgrad_z = SymMat2::sym_part(dz_mean);
  return out;
}

}  // namespace plates
