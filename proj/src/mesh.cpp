#include "plates/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace plates {

namespace {

double tri_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d e1 = b - a;
  const Eigen::Vector2d e2 = c - a;
  return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
}

}  // namespace

void TriMesh::finalize() {
  const int n = n_nodes();
  elems.assign(tris.size(), {});
  eps = 0.0;
  area = 0.0;
  Eigen::Vector2d moment = Eigen::Vector2d::Zero();

  // Edge bookkeeping: (lo, hi) -> {count, orientation of first use}.
  std::map<std::pair<int, int>, std::pair<int, bool>> edges;

  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& tri = tris[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= n)
        throw std::invalid_argument("mesh: triangle " + std::to_string(t) +
                                    " references missing node " + std::to_string(tri[k]));
    }
    const Eigen::Vector2d& p0 = nodes[tri[0]];
    const Eigen::Vector2d& p1 = nodes[tri[1]];
    const Eigen::Vector2d& p2 = nodes[tri[2]];
    const double a = tri_area(p0, p1, p2);
    if (!(a > 0.0))
      throw std::invalid_argument("mesh: triangle " + std::to_string(t) +
                                  " has non-positive area");

    ElementGeometry& g = elems[t];
    g.area = a;
    const double d = 2.0 * a;
    g.grad[1] = Eigen::Vector2d((p2 - p0).y(), -(p2 - p0).x()) / d;
    g.grad[2] = Eigen::Vector2d(-(p1 - p0).y(), (p1 - p0).x()) / d;
    g.grad[0] = -g.grad[1] - g.grad[2];

    eps = std::max({eps, (p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
    area += a;
    moment += a * (p0 + p1 + p2) / 3.0;

    for (int k = 0; k < 3; ++k) {
      const int u = tri[k], v = tri[(k + 1) % 3];
      const auto key = std::minmax(u, v);
      const bool forward = u < v;
      auto it = edges.find(key);
      if (it == edges.end()) {
        edges[key] = {1, forward};
      } else {
        it->second.first += 1;
        if (it->second.first > 2)
          throw std::invalid_argument("mesh: edge shared by more than two triangles near triangle " +
                                      std::to_string(t));
        if (it->second.second == forward)
          throw std::invalid_argument("mesh: inconsistent orientation across edge in triangle " +
                                      std::to_string(t));
      }
    }
  }

  barycenter = moment / area;

  std::set<int> bnodes;
  for (const auto& [key, use] : edges) {
    if (use.first == 1) {
      bnodes.insert(key.first);
      bnodes.insert(key.second);
    }
  }
  boundary_nodes.assign(bnodes.begin(), bnodes.end());
}

TriMesh disk_mesh(double radius, int refinements) {
  if (!(radius > 0.0)) throw std::invalid_argument("disk_mesh: radius must be positive");
  if (refinements < 0 || refinements > 10)
    throw std::invalid_argument("disk_mesh: refinements must lie in [0, 10]");

  TriMesh mesh;
  mesh.nodes.emplace_back(0.0, 0.0);
  const double pi = std::acos(-1.0);
  for (int k = 0; k < 6; ++k) {
    const double phi = pi * k / 3.0;
    mesh.nodes.emplace_back(radius * std::cos(phi), radius * std::sin(phi));
  }
  for (int k = 0; k < 6; ++k)
    mesh.tris.push_back({0, 1 + k, 1 + (k + 1) % 6});

  for (int round = 0; round < refinements; ++round) {
    // Count edge usage to recognise boundary edges of the current mesh.
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& tri : mesh.tris)
      for (int k = 0; k < 3; ++k)
        edge_use[std::minmax(tri[k], tri[(k + 1) % 3])] += 1;

    std::map<std::pair<int, int>, int> midpoint;
    auto split = [&](int u, int v) {
      const auto key = std::minmax(u, v);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Eigen::Vector2d m = 0.5 * (mesh.nodes[u] + mesh.nodes[v]);
      if (edge_use.at(key) == 1) m *= radius / m.norm();  // boundary edge: snap to the circle
      const int idx = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(m);
      midpoint[key] = idx;
      return idx;
    };

    std::vector<std::array<int, 3>> refined;
    refined.reserve(4 * mesh.tris.size());
    for (const auto& tri : mesh.tris) {
      const int a = tri[0], b = tri[1], c = tri[2];
      const int ab = split(a, b), bc = split(b, c), ca = split(c, a);
      refined.push_back({a, ab, ca});
      refined.push_back({b, bc, ab});
      refined.push_back({c, ca, bc});
      refined.push_back({ab, bc, ca});
    }
    mesh.tris = std::move(refined);
  }

  mesh.finalize();
  const Eigen::Vector2d shift = mesh.barycenter;
  for (auto& p : mesh.nodes) p -= shift;
  mesh.finalize();
  return mesh;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + " line " + std::to_string(line) + ": " + what);
}

}  // namespace

TriMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file " + path);

  std::string line;
  int lineno = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) parse_fail(path, lineno + 1, "unexpected end of file");
    ++lineno;
  };

  next_line();
  if (line != "plates-mesh v1") parse_fail(path, lineno, "expected header 'plates-mesh v1'");

  next_line();
  std::istringstream counts(line);
  long n_nodes = 0, n_tris = 0;
  if (!(counts >> n_nodes >> n_tris) || n_nodes < 3 || n_tris < 1)
    parse_fail(path, lineno, "expected '<n_nodes> <n_tris>' with positive counts");

  TriMesh mesh;
  mesh.nodes.reserve(n_nodes);
  for (long i = 0; i < n_nodes; ++i) {
    next_line();
    std::istringstream ss(line);
    double x = 0.0, y = 0.0;
    if (!(ss >> x >> y)) parse_fail(path, lineno, "expected two node coordinates");
    mesh.nodes.emplace_back(x, y);
  }
  mesh.tris.reserve(n_tris);
  for (long t = 0; t < n_tris; ++t) {
    next_line();
    std::istringstream ss(line);
    long a = 0, b = 0, c = 0;
    if (!(ss >> a >> b >> c)) parse_fail(path, lineno, "expected three node indices");
    if (a < 0 || b < 0 || c < 0 || a >= n_nodes || b >= n_nodes || c >= n_nodes)
      parse_fail(path, lineno, "node index out of range");
    mesh.tris.push_back({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)});
  }

  try {
    mesh.finalize();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return mesh;
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mesh file " + path);
  out << "plates-mesh v1\n" << mesh.n_nodes() << " " << mesh.n_tris() << "\n";
  char buf[64];
  for (const auto& p : mesh.nodes) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", p.x(), p.y());
    out << buf;
  }
  for (const auto& tri : mesh.tris)
    out << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  if (!out) throw std::runtime_error("write failure on " + path);
}

MeshStats mesh_stats(const TriMesh& mesh) {
  MeshStats s;
  s.eps = mesh.eps;
  s.n_dofs = 4 * mesh.n_nodes();
  double dmin = std::numeric_limits<double>::max();
  double amin = std::numeric_limits<double>::max();
  for (const auto& tri : mesh.tris) {
    const Eigen::Vector2d& p0 = mesh.nodes[tri[0]];
    const Eigen::Vector2d& p1 = mesh.nodes[tri[1]];
    const Eigen::Vector2d& p2 = mesh.nodes[tri[2]];
    const double d = std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p0 - p2).norm()});
    dmin = std::min(dmin, d);
    const std::array<Eigen::Vector2d, 3> p{p0, p1, p2};
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d e1 = (p[(k + 1) % 3] - p[k]).normalized();
      const Eigen::Vector2d e2 = (p[(k + 2) % 3] - p[k]).normalized();
      amin = std::min(amin, std::acos(std::clamp(e1.dot(e2), -1.0, 1.0)));
    }
  }
  s.quasi_uniformity = mesh.eps / dmin;
  s.min_angle_deg = amin * 180.0 / std::acos(-1.0);
  return s;
}

}  // namespace plates
