#pragma once

// Lat-lon grid nodes, shared multi-level icosahedral mesh, and the bipartite
// grid<->mesh edge sets with geometric features. Construction is
// deterministic; the resulting graph is immutable and shared read-only.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nom/array.hpp"

namespace nom {

struct GraphError : std::runtime_error {
  explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

using Vec3 = std::array<double, 3>;

Vec3 normalize(const Vec3& v);
double great_circle(const Vec3& a, const Vec3& b);
Vec3 latlon_to_unit(double lat_deg, double lon_deg);

struct GridSpec {
  int n_lat = 0;
  int n_lon = 0;
  std::vector<double> lat_deg;  // strictly decreasing, cell centers
  std::vector<double> lon_deg;
  std::vector<uint8_t> land;  // n_lat*n_lon, 1 = land

  int64_t n_nodes() const { return static_cast<int64_t>(n_lat) * n_lon; }
  Vec3 node_position(int64_t node) const;

  static GridSpec regular(int n_lat, int n_lon);
};

struct IcoMesh {
  int level = 0;
  std::vector<Vec3> vertices;                       // unit vectors, finest level
  std::vector<std::array<int32_t, 3>> faces;        // finest level, outward oriented
  std::vector<std::vector<std::array<int32_t, 2>>> level_edges;  // undirected, per level 0..level
  std::vector<int64_t> level_vertex_count;          // vertices present at each level
  std::vector<int64_t> level_face_count;

  int64_t n_vertices() const { return static_cast<int64_t>(vertices.size()); }
};

// build_icosphere(l): regular icosahedron subdivided l times, midpoints
// projected to the unit sphere. Counts: V = 10*4^l + 2, E = 30*4^l,
// F = 20*4^l per level.
IcoMesh build_icosphere(int level);

struct EdgeSet {
  std::vector<int32_t> senders;
  std::vector<int32_t> receivers;
  DenseArray geom;  // [E x 4]: displacement in receiver tangent frame + arc length

  int64_t size() const { return static_cast<int64_t>(senders.size()); }
};

// Union of directed edges over every refinement level, endpoints as
// finest-level vertex indices, deduplicated.
EdgeSet build_multiscale_edges(const IcoMesh& mesh);

// Grid node -> every mesh node within radius_factor * (finest-level mean mesh
// edge arc length). Throws if any grid node ends up isolated.
EdgeSet build_g2m_edges(const GridSpec& grid, const IcoMesh& mesh, double radius_factor);

// Exactly the 3 vertices of the finest-level face containing each grid node
// (ties to the lowest face index).
EdgeSet build_m2g_edges(const GridSpec& grid, const IcoMesh& mesh);

// Fills geom for each (sender, receiver) given endpoint positions.
void compute_edge_geometry(EdgeSet& edges, const std::vector<Vec3>& sender_pos,
                           const std::vector<Vec3>& receiver_pos);

double mean_edge_arc_length(const IcoMesh& mesh);

struct MultiScaleGraph {
  GridSpec grid;
  IcoMesh mesh;
  EdgeSet mesh_edges;  // multiscale union, directed
  EdgeSet g2m;
  EdgeSet m2g;
  DenseArray mesh_node_geom;  // [N_mesh x 3] unit positions

  int64_t n_grid() const { return grid.n_nodes(); }
  int64_t n_mesh() const { return mesh.n_vertices(); }
};

MultiScaleGraph build_graph(const GridSpec& grid, int mesh_level, double radius_factor);

}  // namespace nom
