#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace plates {

// Conforming triangulation with positively oriented elements and cached
// per-element geometry. finalize() must run after nodes/tris changes; it
// validates connectivity and fills every derived field below.
struct TriMesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> tris;

  struct ElementGeometry {
    double area = 0.0;
    std::array<Eigen::Vector2d, 3> grad;  // gradients of the three nodal basis functions
  };
  std::vector<ElementGeometry> elems;
  std::vector<int> boundary_nodes;  // ascending node indices on the boundary
  double eps = 0.0;                 // max element diameter
  double area = 0.0;                // total area
  Eigen::Vector2d barycenter = Eigen::Vector2d::Zero();  // area barycenter

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_tris() const { return static_cast<int>(tris.size()); }

  // Throws std::invalid_argument naming the offending element on dangling
  // indices, non-positive orientation, or non-conforming edges.
  void finalize();
};

// Uniform triangulation of the disk of given radius: a hexagon fan seed
// (7 nodes, 6 equilateral triangles) refined `refinements` times by edge
// midpoint subdivision, with boundary midpoints projected radially onto the
// circle and the result recentered to zero area barycenter.
TriMesh disk_mesh(double radius, int refinements);

// Text format "plates-mesh v1": header line, counts line, node lines (two
// coordinates, 17 significant digits), triangle lines (three 0-based indices).
// load_mesh errors name the offending line.
TriMesh load_mesh(const std::string& path);
void save_mesh(const TriMesh& mesh, const std::string& path);

struct MeshStats {
  double eps = 0.0;               // max element diameter
  double min_angle_deg = 0.0;     // smallest corner angle over all elements
  double quasi_uniformity = 0.0;  // max diameter / min diameter
  int n_dofs = 0;                 // optimisation unknowns: 4 per node (two vector fields)
};
MeshStats mesh_stats(const TriMesh& mesh);

}  // namespace plates
