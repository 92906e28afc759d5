#include "plates/commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "plates/solver.hpp"

namespace plates {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json form_json(const Form3& f) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({f.m(r, 0), f.m(r, 1), f.m(r, 2)});
  return rows;
}

json sym_json(const SymMat2& s) { return {s.a11, s.a22, s.a12}; }

void print_form(std::ostream& os, const std::string& name, const Form3& f) {
  os << name << " =\n";
  for (int r = 0; r < 3; ++r)
    os << "  [" << g12(f.m(r, 0)) << ", " << g12(f.m(r, 1)) << ", " << g12(f.m(r, 2)) << "]\n";
}

void print_sym(std::ostream& os, const std::string& name, const SymMat2& s) {
  os << name << " = [" << g12(s.a11) << ", " << g12(s.a22) << ", " << g12(s.a12)
     << "]  (a11, a22, a12)\n";
}

const char* cardinality_name(MinimizerCardinality c) {
  switch (c) {
    case MinimizerCardinality::point:
      return "point";
    case MinimizerCardinality::pair:
      return "pair";
    case MinimizerCardinality::ellipse:
      return "ellipse";
  }
  return "point";
}

// Per-node area-weighted average of the element-wise constant curl of z.
Eigen::VectorXd nodal_curl(const TriMesh& mesh, const P1VectorField& z) {
  Eigen::VectorXd num = Eigen::VectorXd::Zero(mesh.n_nodes());
  Eigen::VectorXd den = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const Eigen::Matrix2d dz = z.grad_on(t);
    const double c = dz(1, 0) - dz(0, 1);
    for (int k = 0; k < 3; ++k) {
      num[mesh.tris[t][k]] += mesh.elems[t].area * c;
      den[mesh.tris[t][k]] += mesh.elems[t].area;
    }
  }
  return num.cwiseQuotient(den);
}

void write_vtk(const TriMesh& mesh, const DisplacementState& state, double theta,
               const std::string& path) {
  const Eigen::VectorXd v = reconstruct_v(mesh, state.z).v;
  const Eigen::VectorXd curl = nodal_curl(mesh, state.z);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write VTK file " + path);
  out << "# vtk DataFile Version 3.0\n";
  out << "plates sweep state at theta=" << g12(theta) << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_nodes() << " double\n";
  for (int i = 0; i < mesh.n_nodes(); ++i)
    out << g12(mesh.nodes[i].x()) << " " << g12(mesh.nodes[i].y()) << " " << g12(v[i]) << "\n";
  out << "CELLS " << mesh.n_tris() << " " << 4 * mesh.n_tris() << "\n";
  for (const auto& t : mesh.tris) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << mesh.n_tris() << "\n";
  for (int t = 0; t < mesh.n_tris(); ++t) out << "5\n";
  out << "POINT_DATA " << mesh.n_nodes() << "\n";
  out << "VECTORS u double\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const Eigen::Vector2d u = state.u.at(i);
    out << g12(u.x()) << " " << g12(u.y()) << " 0\n";
  }
  out << "VECTORS z double\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const Eigen::Vector2d z = state.z.at(i);
    out << g12(z.x()) << " " << g12(z.y()) << " 0\n";
  }
  out << "SCALARS curl double 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) out << g12(curl[i]) << "\n";
}

void write_csv(const std::vector<SweepRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV file " + path);
  out << "theta,iterations,converged,energy,strain11,strain22,strain12,strain_eig_ratio,"
         "curl_l2,grad_norm,wall_time_s\n";
  for (const auto& r : records) {
    out << g12(r.theta) << "," << r.iterations << "," << (r.converged ? 1 : 0) << ","
        << g12(r.energy) << "," << g12(r.strain.a11) << "," << g12(r.strain.a22) << ","
        << g12(r.strain.a12) << "," << g12(r.strain_eig_ratio) << "," << g12(r.curl_l2) << ","
        << g12(r.grad_norm) << "," << g12(r.wall_time_s) << "\n";
  }
}

int env_thread_cap() {
  const char* env = std::getenv("PLATES_THREADS");
  if (!env) return 0;
  const int v = std::atoi(env);
  return v > 0 ? v : 1;
}

// ---- verification suite pieces -------------------------------------------

// Direct thickness integral of the layer-wise quadratic form; the independent
// route against the completed-square evaluation.
double qbar2_direct(const LayerStack& stack, const SymMat2& E, const SymMat2& F) {
  double acc = 0.0;
  for (const auto& L : stack.layers) {
    const Eigen::Vector3d q = E.vec() + L.prestrain_const.vec();
    const Eigen::Vector3d r = F.vec() + L.prestrain_lin.vec();
    const double i0 = L.t_hi - L.t_lo;
    const double i1 = 0.5 * (L.t_hi * L.t_hi - L.t_lo * L.t_lo);
    const double i2 = (L.t_hi * L.t_hi * L.t_hi - L.t_lo * L.t_lo * L.t_lo) / 3.0;
    acc += i0 * q.dot(L.stiffness.m * q) + 2.0 * i1 * q.dot(L.stiffness.m * r) +
           i2 * r.dot(L.stiffness.m * r);
  }
  return acc;
}

LayerStack random_stack(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_layers(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const int n = n_layers(rng);
  std::vector<double> cuts = {-0.5, 0.5};
  for (int i = 1; i < n; ++i) cuts.push_back(-0.5 + unit(rng));
  std::sort(cuts.begin(), cuts.end());
  LayerStack stack;
  for (int i = 0; i < n; ++i) {
    Layer L;
    L.t_lo = cuts[i];
    L.t_hi = cuts[i + 1];
    Eigen::Matrix3d B;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) B(r, c) = sym(rng);
    L.stiffness.m = B.transpose() * B + 0.2 * Eigen::Matrix3d::Identity();
    L.prestrain_const = {sym(rng), sym(rng), sym(rng)};
    L.prestrain_lin = {sym(rng), sym(rng), sym(rng)};
    stack.layers.push_back(L);
  }
  return stack;
}

DisplacementState random_state(const TriMesh& mesh, std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> noise(-amp, amp);
  DisplacementState s(mesh);
  for (Eigen::Index i = 0; i < s.u.dofs.size(); ++i) s.u.dofs[i] = noise(rng);
  for (Eigen::Index i = 0; i < s.z.dofs.size(); ++i) s.z.dofs[i] = noise(rng);
  return s;
}

// Degree-4 exact triangle quadrature (two symmetric point groups).
struct QuadPoint {
  double l0, l1, l2, w;
};
std::array<QuadPoint, 6> degree4_rule() {
  const double a1 = 0.445948490915965, w1 = 0.223381589678011;
  const double a2 = 0.091576213509771, w2 = 0.109951743655322;
  return {{{a1, a1, 1 - 2 * a1, w1},
           {a1, 1 - 2 * a1, a1, w1},
           {1 - 2 * a1, a1, a1, w1},
           {a2, a2, 1 - 2 * a2, w2},
           {a2, 1 - 2 * a2, a2, w2},
           {1 - 2 * a2, a2, a2, w2}}};
}

// Exact integral of the energy density of `state` (no curl term): the
// integrand is a quartic polynomial per element, so the degree-4 rule is
// exact. The comparison target for the vertex (interpolated) rule.
double exact_rule_energy(const TriMesh& mesh, const EffectiveModuli& em, double theta,
                         const DisplacementState& state) {
  const auto rule = degree4_rule();
  const double sqth = std::sqrt(theta);
  double acc = 0.0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const auto& tri = mesh.tris[t];
    const Eigen::Matrix2d du = state.u.grad_on(t);
    const Eigen::Matrix2d dz = state.z.grad_on(t);
    const Eigen::Vector3d su(du(0, 0), du(1, 1), 0.5 * (du(0, 1) + du(1, 0)));
    const SymMat2 F = -SymMat2::sym_part(dz);
    for (const auto& qp : rule) {
      const Eigen::Vector2d z = qp.l0 * state.z.at(tri[0]) + qp.l1 * state.z.at(tri[1]) +
                                qp.l2 * state.z.at(tri[2]);
      const Eigen::Vector3d e =
          sqth * (su + 0.5 * Eigen::Vector3d(z.x() * z.x(), z.y() * z.y(), z.x() * z.y()));
      acc += mesh.elems[t].area * qp.w * qbar2(em, SymMat2::from_vec(e), F);
    }
  }
  return 0.5 * acc;
}

// Least-squares slope of log(err) against log(eps).
double decay_order(const std::vector<double>& eps, const std::vector<double>& err) {
  const int n = static_cast<int>(eps.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(eps[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct CheckReporter {
  std::ostream& os;
  bool all_pass = true;
  void report(bool pass, const std::string& name, const std::string& details) {
    all_pass = all_pass && pass;
    os << (pass ? "PASS" : "FAIL") << " " << name << ": " << details << "\n";
  }
};

}  // namespace

int cmd_moduli(const RunConfig& cfg, const std::string& json_out, std::ostream& os) {
  const LayerStack stack = cfg.stack();
  const EffectiveModuli em = compute_moments(stack);
  const LvkMinimizer lvk = lvk_minimizer(em);
  const LkiMinimizerSet lki = lki_minimizer_set(em);

  print_form(os, "M0", em.M0);
  print_form(os, "M1", em.M1);
  print_form(os, "M2", em.M2);
  print_form(os, "Mstar", em.Mstar);
  print_sym(os, "b1", em.b1);
  print_sym(os, "b2", em.b2);
  os << "beta0 = " << g12(em.beta0) << "\n";
  os << "gamma = " << g12(em.gamma) << "\n";
  print_sym(os, "E0", em.E0);
  print_sym(os, "F0", em.F0);
  print_sym(os, "K0", em.K0);
  os << "small-theta minimiser: membrane strain ";
  print_sym(os, "", lvk.membrane_strain);
  os << "                       curvature ";
  print_sym(os, "", lvk.curvature);
  os << "large-theta minimiser set: cardinality " << cardinality_name(lki.cardinality)
     << ", min value " << g12(lki.min_value)
     << (lki.value_constant ? " (value constant over angles)" : "") << "\n";
  for (const auto& b : lki.minima)
    os << "  branch: angle " << g12(b.angle) << ", magnitude " << g12(b.magnitude) << ", value "
       << g12(b.value) << "\n";

  json report;
  report["M0"] = form_json(em.M0);
  report["M1"] = form_json(em.M1);
  report["M2"] = form_json(em.M2);
  report["Mstar"] = form_json(em.Mstar);
  report["b1"] = sym_json(em.b1);
  report["b2"] = sym_json(em.b2);
  report["beta0"] = em.beta0;
  report["gamma"] = em.gamma;
  report["E0"] = sym_json(em.E0);
  report["F0"] = sym_json(em.F0);
  report["K0"] = sym_json(em.K0);
  report["lvk_minimizer"] = {{"membrane_strain", sym_json(lvk.membrane_strain)},
                             {"curvature", sym_json(lvk.curvature)}};
  json minima = json::array();
  for (const auto& b : lki.minima)
    minima.push_back({{"angle", b.angle}, {"magnitude", b.magnitude}, {"value", b.value}});
  report["lki_minimizer_set"] = {{"cardinality", cardinality_name(lki.cardinality)},
                                 {"value_constant", lki.value_constant},
                                 {"min_value", lki.min_value},
                                 {"minima", minima}};

  if (json_out.empty()) {
    os << report.dump(2) << "\n";
  } else {
    std::ofstream out(json_out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write JSON report " + json_out);
    out << report.dump(2) << "\n";
  }
  return 0;
}

int cmd_mesh(const RunConfig& cfg, const std::string& mesh_out, std::ostream& os) {
  const TriMesh mesh = cfg.build_mesh();
  std::string path = mesh_out;
  if (path.empty()) {
    fs::create_directories(cfg.output_dir);
    path = (fs::path(cfg.output_dir) / "mesh.txt").string();
  } else if (fs::path(path).has_parent_path()) {
    fs::create_directories(fs::path(path).parent_path());
  }
  save_mesh(mesh, path);
  const MeshStats stats = mesh_stats(mesh);
  os << "mesh written to " << path << "\n";
  os << "nodes = " << mesh.n_nodes() << ", triangles = " << mesh.n_tris()
     << ", dofs = " << stats.n_dofs << "\n";
  os << "area = " << g12(mesh.area) << ", eps = " << g12(stats.eps)
     << ", min angle = " << g12(stats.min_angle_deg)
     << " deg, quasi-uniformity = " << g12(stats.quasi_uniformity) << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_dir, std::ostream& os) {
  const TriMesh mesh = cfg.build_mesh();
  const EffectiveModuli em = compute_moments(cfg.stack());
  const double mu_eps = cfg.mu_eps_for(mesh);

  SweepConfig sweep;
  sweep.thetas = cfg.thetas;
  sweep.warm_start = cfg.warm_start;
  sweep.threads = env_thread_cap();

  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;
  fs::create_directories(dir);

  RunConfig echo = cfg;
  echo.output_dir = dir;
  {
    std::ofstream out(fs::path(dir) / "resolved_config.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write resolved_config.json in " + dir);
    out << resolved_config(echo).dump(2) << "\n";
  }

  os << "sweep over " << cfg.thetas.size() << " theta values ("
     << (cfg.warm_start ? "warm" : "cold") << " start), mesh: " << mesh.n_nodes() << " nodes, "
     << mesh.n_tris() << " triangles, mu_eps = " << g12(mu_eps) << "\n";

  std::vector<DisplacementState> finals;
  const std::vector<SweepRecord> records =
      theta_sweep(mesh, em, cfg.init, mu_eps, cfg.optimizer, sweep, &finals);

  write_csv(records, (fs::path(dir) / "records.csv").string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string stem = "theta_" + g12(records[i].theta);
    save_state(finals[i], (fs::path(dir) / (stem + ".state")).string());
    write_vtk(mesh, finals[i], records[i].theta, (fs::path(dir) / (stem + ".vtk")).string());
  }

  bool any_failed = false;
  for (const auto& r : records) {
    any_failed = any_failed || !r.converged;
    os << "theta = " << g12(r.theta) << ": iterations = " << r.iterations
       << ", converged = " << (r.converged ? 1 : 0) << ", energy = " << g12(r.energy)
       << ", strain ratio = " << g12(r.strain_eig_ratio) << ", curl_l2 = " << g12(r.curl_l2)
       << "\n";
  }
  const auto tc = detect_transition(records);
  if (tc)
    os << "transition detected at theta ~= " << g12(*tc) << "\n";
  else
    os << "no transition detected on this grid\n";
  os << "outputs in " << dir << "\n";
  return any_failed ? 2 : 0;
}

int cmd_verify(const RunConfig& cfg, std::ostream& os, const GradientTerms& terms) {
  CheckReporter rep{os};

  {  // completed-square evaluation vs direct thickness integral
    std::mt19937_64 rng(20240817);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    double worst = 0.0;
    const int n_cases = 200;
    for (int k = 0; k < n_cases; ++k) {
      const LayerStack stack = (k == 0) ? cfg.stack() : random_stack(rng);
      const EffectiveModuli em = compute_moments(stack);
      const SymMat2 E{sym(rng), sym(rng), sym(rng)};
      const SymMat2 F{sym(rng), sym(rng), sym(rng)};
      const double direct = qbar2_direct(stack, E, F);
      const double square = qbar2(em, E, F);
      worst = std::max(worst,
                       std::abs(square - direct) / std::max(1.0, std::abs(direct)));
    }
    rep.report(worst <= 1e-10, "completed_square_identity",
               std::to_string(n_cases) + " stacks, worst relative deviation " + g12(worst));
  }

  const LayerStack stack = cfg.stack();
  const EffectiveModuli em = compute_moments(stack);

  {  // gradient consistency against central differences
    const TriMesh mesh = disk_mesh(1.0, 2);
    const double mu_eps = cfg.mu_eps_for(mesh);
    const double theta = 1.3;
    std::mt19937_64 rng(7777);
    double worst_rel = 0.0, worst_order = 4.0;
    for (int s = 0; s < 3; ++s) {
      const DisplacementState w = random_state(mesh, rng, 0.5);
      const Eigen::VectorXd g = gradient(mesh, em, theta, w, mu_eps, terms);
      for (int d = 0; d < 2; ++d) {
        const DisplacementState delta = random_state(mesh, rng, 1.0);
        const Eigen::VectorXd dv = delta.stacked();
        const double gd = g.dot(dv);
        const Eigen::VectorXd w0 = w.stacked();
        auto E_at = [&](double h) {
          return energy(mesh, em, theta,
                        DisplacementState::from_stacked(mesh, w0 + h * dv), mu_eps);
        };
        auto undivided = [&](double h) {
          return std::abs(E_at(h) - E_at(-h) - 2.0 * h * gd);
        };
        const double rel =
            std::abs((E_at(1e-4) - E_at(-1e-4)) / 2e-4 - gd) / std::max(1.0, std::abs(gd));
        const double e1 = undivided(1e-3), e2 = undivided(5e-4);
        const double order = std::log2(e1 / e2);
        worst_rel = std::max(worst_rel, rel);
        worst_order = std::min(worst_order, order);
      }
    }
    rep.report(worst_rel <= 1e-5 && worst_order >= 2.7, "gradient_finite_difference",
               "worst relative error " + g12(worst_rel) + " at h=1e-4, worst order " +
                   g12(worst_order));
  }

  {  // interpolated integration error decays under refinement
    std::vector<double> epss, errs;
    for (int refinements = 2; refinements <= 5; ++refinements) {
      const TriMesh mesh = disk_mesh(1.0, refinements);
      DisplacementState s(mesh);
      for (int i = 0; i < mesh.n_nodes(); ++i) {
        const Eigen::Vector2d x = mesh.nodes[i];
        s.z.set(i, {x.x() * x.x(), x.x() * x.y()});
      }
      const double vertex_rule = energy(mesh, em, 1.0, s, 0.0);
      const double exact_rule = exact_rule_energy(mesh, em, 1.0, s);
      epss.push_back(mesh.eps);
      errs.push_back(std::abs(vertex_rule - exact_rule));
    }
    const double order = decay_order(epss, errs);
    rep.report(order >= 0.9, "interpolated_integration_decay",
               "empirical order " + g12(order) + " over refinements 2..5");
  }

  {  // theta = 0: membrane decouples, z-problem unaffected by the u initial state
    const TriMesh mesh = disk_mesh(1.0, 2);
    const double mu_eps = cfg.mu_eps_for(mesh);
    InitialCondition ic;
    ic.kind = InitialCondition::Kind::flat;
    ic.perturbation.amplitude = 0.3;
    ic.perturbation.seed = 101;
    const DisplacementState init_a = initial_state(mesh, ic);
    ic.perturbation.seed = 202;
    const DisplacementState init_b = initial_state(mesh, ic);
    const auto [state_a, report_a] = minimize(mesh, em, 0.0, init_a, mu_eps, cfg.optimizer);
    const auto [state_b, report_b] = minimize(mesh, em, 0.0, init_b, mu_eps, cfg.optimizer);
    const double e_gap = std::abs(report_a.final_energy - report_b.final_energy) /
                         std::max(1.0, std::abs(report_a.final_energy));
    const double u_gap = (state_a.u.dofs - state_b.u.dofs).norm();
    const bool ok = report_a.converged && report_b.converged && e_gap <= 1e-8 && u_gap > 1e-6;
    rep.report(ok, "theta_zero_decoupling",
               "energy gap " + g12(e_gap) + ", u difference " + g12(u_gap));
  }

  os << (rep.all_pass ? "verification suite: all checks passed\n"
                      : "verification suite: FAILURES present\n");
  return rep.all_pass ? 0 : 1;
}

}  // namespace plates
