#include "plates/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace plates {

DisplacementState initial_state(const TriMesh& mesh, const InitialCondition& init) {
  DisplacementState s(mesh);
  switch (init.kind) {
    case InitialCondition::Kind::flat:
      break;
    case InitialCondition::Kind::paraboloid:
      for (int i = 0; i < mesh.n_nodes(); ++i)
        s.z.set(i, {init.a * mesh.nodes[i].x(), init.b * mesh.nodes[i].y()});
      break;
    case InitialCondition::Kind::from_file:
      s = load_state(mesh, init.path);
      break;
  }
  if (init.perturbation.amplitude > 0.0) {
    std::mt19937_64 rng(init.perturbation.seed);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    for (Eigen::Index i = 0; i < s.u.dofs.size(); ++i)
      s.u.dofs[i] += init.perturbation.amplitude * noise(rng);
    for (Eigen::Index i = 0; i < s.z.dofs.size(); ++i)
      s.z.dofs[i] += init.perturbation.amplitude * noise(rng);
  }
  return s;
}

SymMat2 mean_bending_strain(const TriMesh& mesh, const P1VectorField& z) {
  if (z.mesh != &mesh)
    throw std::invalid_argument("mean_bending_strain: field not bound to mesh");
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (int t = 0; t < mesh.n_tris(); ++t) acc += mesh.elems[t].area * z.grad_on(t);
  return SymMat2::sym_part(acc / mesh.area);
}

double symmetry_ratio(const SymMat2& strain) {
  const auto [l1, l2] = strain.eigenvalues();
  const double hi = std::max(std::abs(l1), std::abs(l2));
  const double lo = std::min(std::abs(l1), std::abs(l2));
  if (hi < 1e-12) return 1.0;
  return lo / hi;
}

namespace {

SweepRecord run_one(const TriMesh& mesh, const EffectiveModuli& em, double theta,
                    const DisplacementState& state0, double mu_eps, const OptimizerConfig& opt,
                    DisplacementState* final_out) {
  SweepRecord rec;
  rec.theta = theta;
  try {
    auto [state, report] = minimize(mesh, em, theta, state0, mu_eps, opt);
    rec.iterations = report.iterations;
    rec.converged = report.converged;
    rec.energy = report.final_energy;
    rec.strain = mean_bending_strain(mesh, state.z);
    const auto [lo, hi] = rec.strain.eigenvalues();
    rec.strain_eig_max = std::abs(hi) >= std::abs(lo) ? hi : lo;
    rec.strain_eig_min = std::abs(hi) >= std::abs(lo) ? lo : hi;
    rec.strain_eig_ratio = symmetry_ratio(rec.strain);
    rec.curl_l2 = curl_l2(state.z);
    rec.grad_norm = report.final_grad_norm;
    rec.wall_time_s = report.wall_time_s;
    if (final_out) *final_out = std::move(state);
  } catch (const std::runtime_error&) {
    rec.converged = false;
    rec.energy = std::numeric_limits<double>::quiet_NaN();
    rec.strain_eig_max = std::numeric_limits<double>::quiet_NaN();
    rec.strain_eig_min = std::numeric_limits<double>::quiet_NaN();
    rec.strain_eig_ratio = std::numeric_limits<double>::quiet_NaN();
    rec.curl_l2 = std::numeric_limits<double>::quiet_NaN();
    rec.grad_norm = std::numeric_limits<double>::quiet_NaN();
    if (final_out) *final_out = initial_state(mesh, InitialCondition{});
  }
  return rec;
}

}  // namespace

std::vector<SweepRecord> theta_sweep(const TriMesh& mesh, const EffectiveModuli& em,
                                     const InitialCondition& init, double mu_eps,
                                     const OptimizerConfig& opt, const SweepConfig& sweep,
                                     std::vector<DisplacementState>* finals) {
  const int n = static_cast<int>(sweep.thetas.size());
  std::vector<SweepRecord> records(n);
  if (finals) finals->assign(n, DisplacementState(mesh));
  if (n == 0) return records;
  auto final_slot = [&](int i) { return finals ? &(*finals)[i] : nullptr; };

  if (sweep.warm_start) {
    DisplacementState carry = initial_state(mesh, init);
    for (int i = 0; i < n; ++i) {
      DisplacementState next(mesh);
      records[i] = run_one(mesh, em, sweep.thetas[i], carry, mu_eps, opt, &next);
      if (finals) (*finals)[i] = next;
      carry = std::move(next);
    }
    return records;
  }

  int threads = sweep.threads > 0 ? sweep.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) {
      const DisplacementState state0 = initial_state(mesh, init);
      records[i] = run_one(mesh, em, sweep.thetas[i], state0, mu_eps, opt, final_slot(i));
    }
    return records;
  }

  std::atomic<int> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const int i = cursor.fetch_add(1);
      if (i >= n) return;
      const DisplacementState state0 = initial_state(mesh, init);
      records[i] = run_one(mesh, em, sweep.thetas[i], state0, mu_eps, opt, final_slot(i));
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return records;
}

std::optional<double> detect_transition(const std::vector<SweepRecord>& records) {
  if (records.empty()) return std::nullopt;
  if (records.front().strain_eig_ratio < 0.5) return records.front().theta;
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const double r0 = records[i].strain_eig_ratio;
    const double r1 = records[i + 1].strain_eig_ratio;
    if (r0 >= 0.5 && r1 < 0.5) {
      const double t0 = records[i].theta, t1 = records[i + 1].theta;
      return t0 + (t1 - t0) * (r0 - 0.5) / (r0 - r1);
    }
  }
  return std::nullopt;
}

SmallThetaReference small_theta_reference(const TriMesh& mesh, const EffectiveModuli& em) {
  const int n = mesh.n_nodes();
  SmallThetaReference out;
  out.state = DisplacementState(mesh);
  for (int i = 0; i < n; ++i) out.state.z.set(i, mesh.nodes[i]);

  // c0 = mean of |x|^2/2; the integrand is quadratic, so the edge-midpoint
  // rule is exact per element.
  double c0 = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d m = 0.5 * (mesh.nodes[tri[k]] + mesh.nodes[tri[(k + 1) % 3]]);
      c0 += mesh.elems[t].area / 3.0 * 0.5 * m.squaredNorm();
    }
  }
  c0 /= mesh.area;
  out.v0.resize(n);
  for (int i = 0; i < n; ++i) out.v0[i] = 0.5 * mesh.nodes[i].squaredNorm() - c0;

  // Normal equations of the vertex-rule membrane energy in u; the rigid fields
  // span the kernel and the right-hand side is orthogonal to them, so plain
  // conjugate gradient stays in the admissible complement.
  const Eigen::Matrix3d& M0 = em.M0.m;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(36 * mesh.n_tris());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const auto& g = mesh.elems[t];
    std::array<Eigen::Vector3d, 6> dstrain;
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 2; ++a) {
        const Eigen::Vector2d& gi = g.grad[i];
        dstrain[2 * i + a] =
            a == 0 ? Eigen::Vector3d(gi.x(), 0.0, 0.5 * gi.y())
                   : Eigen::Vector3d(0.0, gi.y(), 0.5 * gi.x());
      }
    for (int r = 0; r < 6; ++r) {
      const Eigen::Vector3d Mr = M0 * dstrain[r];
      for (int c = 0; c < 6; ++c)
        trip.emplace_back(2 * tri[r / 2] + r % 2, 2 * tri[c / 2] + c % 2,
                          g.area * Mr.dot(dstrain[c]));
    }
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d zk = out.state.z.at(tri[k]);
      const Eigen::Vector3d cp = 0.5 * Eigen::Vector3d(zk.x() * zk.x(), zk.y() * zk.y(),
                                                       zk.x() * zk.y());
      const Eigen::Vector3d Mc = M0 * cp;
      for (int r = 0; r < 6; ++r)
        rhs[2 * tri[r / 2] + r % 2] -= g.area / 3.0 * Mc.dot(dstrain[r]);
    }
  }
  Eigen::SparseMatrix<double> K(2 * n, 2 * n);
  K.setFromTriplets(trip.begin(), trip.end());

  Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n);
  {
    Eigen::VectorXd r = rhs;
    Eigen::VectorXd p = r;
    double rs = r.dot(r);
    const double rhs_norm = std::sqrt(rs);
    if (rhs_norm > 0.0) {
      const long cap = 10 * r.size();
      for (long it = 0; it < cap && std::sqrt(rs) > 1e-12 * rhs_norm; ++it) {
        const Eigen::VectorXd Ap = K * p;
        const double alpha = rs / p.dot(Ap);
        u += alpha * p;
        r -= alpha * Ap;
        const double rs_new = r.dot(r);
        p = r + (rs_new / rs) * p;
        rs = rs_new;
      }
    }
  }
  project_field(mesh, u);
  out.state.u.dofs = u;

  double acc = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const Eigen::Vector3d su = [&] {
      Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
      for (int k = 0; k < 3; ++k)
        d += out.state.u.at(tri[k]) * mesh.elems[t].grad[k].transpose();
      return Eigen::Vector3d(d(0, 0), d(1, 1), 0.5 * (d(0, 1) + d(1, 0)));
    }();
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d zk = out.state.z.at(tri[k]);
      const Eigen::Vector3d e =
          su + 0.5 * Eigen::Vector3d(zk.x() * zk.x(), zk.y() * zk.y(), zk.x() * zk.y());
      acc += mesh.elems[t].area / 3.0 * e.dot(M0 * e);
    }
  }
  out.membrane_energy = 0.5 * acc;
  return out;
}

}  // namespace plates
