#pragma once

// Closed, consistently oriented triangle meshes with fixed edge orientation,
// their geometric quantities, and the vertex-noise model used in experiments.

#include "surftv/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

namespace surftv {

/// An undirected edge with its two incident triangles. `plus` is the
/// triangle with the lower index.
struct Edge {
  std::array<int, 2> vertices;
  int plus;
  int minus;
};

class TriangleMesh {
 public:
  using Triangle = std::array<int, 3>;

  TriangleMesh() = default;

  /// Builds edge adjacency and validates that the surface is a closed,
  /// consistently oriented 2-manifold. Edges are ordered by their sorted
  /// endpoint pair.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    build_edges();
  }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Indices of the three edges bounding each triangle.
  const std::vector<std::array<int, 3>>& triangle_edges() const {
    return triangleEdges_;
  }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  /// Same connectivity, new vertex positions.
  TriangleMesh with_vertices(std::vector<Vec3> vertices) const {
    if (vertices.size() != vertices_.size())
      throw MeshError("with_vertices: vertex count mismatch");
    TriangleMesh out = *this;
    out.vertices_ = std::move(vertices);
    return out;
  }

 private:
  void build_edges() {
    const int nv = static_cast<int>(vertices_.size());
    // (lo, hi) -> list of (triangle, traversed lo->hi)
    std::map<std::pair<int, int>, std::vector<std::pair<int, bool>>> incidence;
    for (int t = 0; t < static_cast<int>(triangles_.size()); ++t) {
      const Triangle& tri = triangles_[t];
      for (int k = 0; k < 3; ++k) {
        if (tri[k] < 0 || tri[k] >= nv) {
          std::ostringstream os;
          os << "triangle " << t << " references vertex " << tri[k]
             << " out of range";
          throw MeshError(os.str());
        }
      }
      if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
        std::ostringstream os;
        os << "triangle " << t << " repeats a vertex";
        throw MeshError(os.str());
      }
      for (int k = 0; k < 3; ++k) {
        const int a = tri[k];
        const int b = tri[(k + 1) % 3];
        incidence[{std::min(a, b), std::max(a, b)}].emplace_back(t, a < b);
      }
    }
    edges_.clear();
    edges_.reserve(incidence.size());
    triangleEdges_.assign(triangles_.size(), {-1, -1, -1});
    std::vector<int> filled(triangles_.size(), 0);
    for (const auto& [key, inc] : incidence) {
      if (inc.size() == 1) {
        std::ostringstream os;
        os << "boundary edge (" << key.first << ", " << key.second << ")";
        throw MeshError(os.str());
      }
      if (inc.size() != 2) {
        std::ostringstream os;
        os << "non-manifold edge (" << key.first << ", " << key.second
           << ") with " << inc.size() << " incident triangles";
        throw MeshError(os.str());
      }
      if (inc[0].second == inc[1].second) {
        std::ostringstream os;
        os << "inconsistent triangle orientation at edge (" << key.first
           << ", " << key.second << ")";
        throw MeshError(os.str());
      }
      const int t0 = std::min(inc[0].first, inc[1].first);
      const int t1 = std::max(inc[0].first, inc[1].first);
      if (t0 == t1) throw MeshError("edge incident twice to the same triangle");
      const int e = static_cast<int>(edges_.size());
      edges_.push_back(Edge{{key.first, key.second}, t0, t1});
      triangleEdges_[t0][filled[t0]++] = e;
      triangleEdges_[t1][filled[t1]++] = e;
    }
  }

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> triangleEdges_;
};

/// Per-triangle areas and unit normals, per-edge lengths.
struct GeometryCache {
  Eigen::VectorXd areas;
  Eigen::VectorXd edgeLengths;
  std::vector<Vec3> normals;

  double total_area() const { return areas.sum(); }
};

/// Areas by half the cross-product norm; normals follow the triangle
/// orientation. Throws MeshError on a degenerate triangle (area below
/// 1e-14 times the squared bounding-box diagonal).
inline GeometryCache compute_geometry(const TriangleMesh& mesh) {
  const auto& v = mesh.vertices();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : v) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double scale2 = v.empty() ? 0.0 : (hi - lo).squaredNorm();

  GeometryCache g;
  const auto nt = static_cast<Eigen::Index>(mesh.num_triangles());
  g.areas.resize(nt);
  g.normals.resize(mesh.num_triangles());
  for (Eigen::Index t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles()[t];
    const Vec3 c = (v[tri[1]] - v[tri[0]]).cross(v[tri[2]] - v[tri[0]]);
    const double twiceArea = c.norm();
    if (0.5 * twiceArea < 1e-14 * scale2 || twiceArea == 0.0) {
      std::ostringstream os;
      os << "degenerate triangle " << t;
      throw MeshError(os.str());
    }
    g.areas[t] = 0.5 * twiceArea;
    g.normals[t] = c / twiceArea;
  }
  g.edgeLengths.resize(static_cast<Eigen::Index>(mesh.num_edges()));
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) {
    const auto& ed = mesh.edges()[e];
    g.edgeLengths[static_cast<Eigen::Index>(e)] =
        (v[ed.vertices[1]] - v[ed.vertices[0]]).norm();
  }
  return g;
}

/// Icosahedron refined by repeated 1-to-4 midpoint subdivision, with all
/// vertices projected to the sphere of the given radius. Produces
/// 20 * 4^subdivisions outward-oriented triangles.
inline TriangleMesh icosphere(int subdivisions, double radius = 1.0) {
  if (subdivisions < 0 || subdivisions > 8)
    throw Error("icosphere: subdivisions must be in [0, 8]");
  if (!(radius > 0.0)) throw Error("icosphere: radius must be positive");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0},
      {0, -1, p}, {0, 1, p}, {0, -1, -p}, {0, 1, -p},
      {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (Vec3& x : verts) x.normalize();
  std::vector<TriangleMesh::Triangle> tris = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<TriangleMesh::Triangle> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const int a = mid(t[0], t[1]);
      const int b = mid(t[1], t[2]);
      const int c = mid(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    tris = std::move(next);
  }
  for (Vec3& x : verts) x *= radius;
  return TriangleMesh(std::move(verts), std::move(tris));
}

/// Mean length of the edges incident to each vertex.
inline std::vector<double> mean_incident_edge_length(const TriangleMesh& mesh) {
  std::vector<double> sum(mesh.num_vertices(), 0.0);
  std::vector<int> count(mesh.num_vertices(), 0);
  const auto& v = mesh.vertices();
  for (const Edge& e : mesh.edges()) {
    const double len = (v[e.vertices[1]] - v[e.vertices[0]]).norm();
    for (int k : e.vertices) {
      sum[k] += len;
      ++count[k];
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (count[i] > 0) sum[i] /= count[i];
  return sum;
}

/// Perturbs every vertex coordinate independently by N(0, c * e^2), where e
/// is the mean length of the edges incident to that vertex. Deterministic
/// for a given seed; connectivity is unchanged.
inline TriangleMesh add_vertex_noise(const TriangleMesh& mesh,
                                     double varianceFactor,
                                     std::uint64_t seed) {
  if (varianceFactor < 0.0)
    throw Error("add_vertex_noise: variance factor must be nonnegative");
  if (varianceFactor == 0.0) return mesh;
  const std::vector<double> e = mean_incident_edge_length(mesh);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec3> verts = mesh.vertices();
  const double c = std::sqrt(varianceFactor);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const double sigma = c * e[i];
    for (int k = 0; k < 3; ++k) verts[i][k] += sigma * normal(rng);
  }
  return mesh.with_vertices(std::move(verts));
}

}  // namespace surftv
