#include "nom/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace nom {

Vec3 normalize(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

static double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

static Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double great_circle(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(dot(a, b), -1.0, 1.0));
}

Vec3 latlon_to_unit(double lat_deg, double lon_deg) {
  const double lat = lat_deg * M_PI / 180.0;
  const double lon = lon_deg * M_PI / 180.0;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

Vec3 GridSpec::node_position(int64_t node) const {
  const int i = static_cast<int>(node / n_lon);
  const int j = static_cast<int>(node % n_lon);
  return latlon_to_unit(lat_deg[static_cast<size_t>(i)], lon_deg[static_cast<size_t>(j)]);
}

GridSpec GridSpec::regular(int n_lat, int n_lon) {
  if (n_lat < 1 || n_lon < 1) throw GraphError("grid: extents must be positive");
  GridSpec g;
  g.n_lat = n_lat;
  g.n_lon = n_lon;
  // Cell centers; poles excluded by construction.
  for (int i = 0; i < n_lat; ++i) g.lat_deg.push_back(90.0 - (i + 0.5) * 180.0 / n_lat);
  for (int j = 0; j < n_lon; ++j) g.lon_deg.push_back(-180.0 + (j + 0.5) * 360.0 / n_lon);
  g.land.assign(static_cast<size_t>(n_lat) * n_lon, 0);
  return g;
}

// ---------------------------------------------------------------------------

namespace {

struct MidpointCache {
  std::map<std::pair<int32_t, int32_t>, int32_t> cache;
  int32_t midpoint(std::vector<Vec3>& verts, int32_t a, int32_t b) {
    const auto key = std::minmax(a, b);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const Vec3& va = verts[static_cast<size_t>(a)];
    const Vec3& vb = verts[static_cast<size_t>(b)];
    verts.push_back(normalize({va[0] + vb[0], va[1] + vb[1], va[2] + vb[2]}));
    const int32_t id = static_cast<int32_t>(verts.size() - 1);
    cache.emplace(key, id);
    return id;
  }
};

std::vector<std::array<int32_t, 2>> edges_of_faces(const std::vector<std::array<int32_t, 3>>& faces) {
  std::set<std::array<int32_t, 2>> uniq;
  for (const auto& f : faces) {
    for (int e = 0; e < 3; ++e) {
      int32_t a = f[static_cast<size_t>(e)], b = f[static_cast<size_t>((e + 1) % 3)];
      if (a > b) std::swap(a, b);
      uniq.insert({a, b});
    }
  }
  return {uniq.begin(), uniq.end()};
}

}  // namespace

IcoMesh build_icosphere(int level) {
  if (level < 0 || level > 6)
    throw GraphError("build_icosphere: level " + std::to_string(level) + " outside [0,6]");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  IcoMesh mesh;
  mesh.level = level;
  mesh.vertices = {
      normalize({-1, t, 0}), normalize({1, t, 0}),   normalize({-1, -t, 0}), normalize({1, -t, 0}),
      normalize({0, -1, t}), normalize({0, 1, t}),   normalize({0, -1, -t}), normalize({0, 1, -t}),
      normalize({t, 0, -1}), normalize({t, 0, 1}),   normalize({-t, 0, -1}), normalize({-t, 0, 1}),
  };
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  // Outward orientation so spherical containment tests have a fixed sign.
  for (auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<size_t>(f[2])];
    if (dot(cross(a, b), c) < 0) std::swap(f[1], f[2]);
  }
  mesh.level_edges.push_back(edges_of_faces(mesh.faces));
  mesh.level_vertex_count.push_back(mesh.n_vertices());
  mesh.level_face_count.push_back(static_cast<int64_t>(mesh.faces.size()));

  MidpointCache mid;
  for (int l = 0; l < level; ++l) {
    std::vector<std::array<int32_t, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const int32_t ab = mid.midpoint(mesh.vertices, f[0], f[1]);
      const int32_t bc = mid.midpoint(mesh.vertices, f[1], f[2]);
      const int32_t ca = mid.midpoint(mesh.vertices, f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
    mesh.level_edges.push_back(edges_of_faces(mesh.faces));
    mesh.level_vertex_count.push_back(mesh.n_vertices());
    mesh.level_face_count.push_back(static_cast<int64_t>(mesh.faces.size()));
  }

  const int64_t expect_v = 10 * (1LL << (2 * level)) + 2;
  if (mesh.n_vertices() != expect_v)
    throw GraphError("build_icosphere: vertex count " + std::to_string(mesh.n_vertices()) +
                     " != " + std::to_string(expect_v));
  return mesh;
}

double mean_edge_arc_length(const IcoMesh& mesh) {
  const auto& finest = mesh.level_edges.back();
  double acc = 0.0;
  for (const auto& e : finest)
    acc += great_circle(mesh.vertices[static_cast<size_t>(e[0])], mesh.vertices[static_cast<size_t>(e[1])]);
  return acc / static_cast<double>(finest.size());
}

void compute_edge_geometry(EdgeSet& edges, const std::vector<Vec3>& sender_pos,
                           const std::vector<Vec3>& receiver_pos) {
  const int64_t e = edges.size();
  edges.geom = DenseArray::zeros({e, 4});
  for (int64_t i = 0; i < e; ++i) {
    const Vec3& s = sender_pos[static_cast<size_t>(edges.senders[static_cast<size_t>(i)])];
    const Vec3& r = receiver_pos[static_cast<size_t>(edges.receivers[static_cast<size_t>(i)])];
    // Tangent frame at the receiver; reference axis flips near the poles so
    // the frame is defined everywhere.
    const Vec3 axis = std::abs(r[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    const Vec3 e1 = normalize(cross(axis, r));
    const Vec3 e2 = cross(r, e1);
    const Vec3 d{s[0] - r[0], s[1] - r[1], s[2] - r[2]};
    edges.geom.at(i, 0) = static_cast<float>(dot(d, e1));
    edges.geom.at(i, 1) = static_cast<float>(dot(d, e2));
    edges.geom.at(i, 2) = static_cast<float>(dot(d, r));
    edges.geom.at(i, 3) = static_cast<float>(great_circle(s, r));
  }
}

EdgeSet build_multiscale_edges(const IcoMesh& mesh) {
  std::set<std::pair<int32_t, int32_t>> uniq;
  for (const auto& level : mesh.level_edges) {
    for (const auto& e : level) {
      uniq.insert({e[0], e[1]});
      uniq.insert({e[1], e[0]});
    }
  }
  EdgeSet out;
  for (const auto& [s, r] : uniq) {
    out.senders.push_back(s);
    out.receivers.push_back(r);
  }
  compute_edge_geometry(out, mesh.vertices, mesh.vertices);
  return out;
}

EdgeSet build_g2m_edges(const GridSpec& grid, const IcoMesh& mesh, double radius_factor) {
  if (radius_factor <= 0) throw GraphError("build_g2m_edges: radius_factor must be positive");
  const double radius = radius_factor * mean_edge_arc_length(mesh);
  const int64_t n_grid = grid.n_nodes();
  const int64_t n_mesh = mesh.n_vertices();
  EdgeSet out;
  std::vector<Vec3> grid_pos(static_cast<size_t>(n_grid));
  for (int64_t g = 0; g < n_grid; ++g) grid_pos[static_cast<size_t>(g)] = grid.node_position(g);
  for (int64_t g = 0; g < n_grid; ++g) {
    bool any = false;
    for (int64_t m = 0; m < n_mesh; ++m) {
      if (great_circle(grid_pos[static_cast<size_t>(g)], mesh.vertices[static_cast<size_t>(m)]) <= radius) {
        out.senders.push_back(static_cast<int32_t>(g));
        out.receivers.push_back(static_cast<int32_t>(m));
        any = true;
      }
    }
    if (!any)
      throw GraphError("build_g2m_edges: grid node " + std::to_string(g) +
                       " has no mesh node within radius; increase radius_factor (current " +
                       std::to_string(radius_factor) + ")");
  }
  compute_edge_geometry(out, grid_pos, mesh.vertices);
  return out;
}

EdgeSet build_m2g_edges(const GridSpec& grid, const IcoMesh& mesh) {
  const int64_t n_grid = grid.n_nodes();
  EdgeSet out;
  std::vector<Vec3> grid_pos(static_cast<size_t>(n_grid));
  for (int64_t g = 0; g < n_grid; ++g) grid_pos[static_cast<size_t>(g)] = grid.node_position(g);
  constexpr double kInsideTol = -1e-12;
  for (int64_t g = 0; g < n_grid; ++g) {
    const Vec3& p = grid_pos[static_cast<size_t>(g)];
    int64_t found = -1;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
      const auto& face = mesh.faces[f];
      const Vec3& a = mesh.vertices[static_cast<size_t>(face[0])];
      const Vec3& b = mesh.vertices[static_cast<size_t>(face[1])];
      const Vec3& c = mesh.vertices[static_cast<size_t>(face[2])];
      if (dot(cross(a, b), p) >= kInsideTol && dot(cross(b, c), p) >= kInsideTol &&
          dot(cross(c, a), p) >= kInsideTol) {
        found = static_cast<int64_t>(f);
        break;  // faces scanned in ascending index order
      }
    }
    if (found < 0)
      throw GraphError("build_m2g_edges: no containing face for grid node " + std::to_string(g));
    for (int v = 0; v < 3; ++v) {
      out.senders.push_back(mesh.faces[static_cast<size_t>(found)][static_cast<size_t>(v)]);
      out.receivers.push_back(static_cast<int32_t>(g));
    }
  }
  compute_edge_geometry(out, mesh.vertices, grid_pos);
  return out;
}

MultiScaleGraph build_graph(const GridSpec& grid, int mesh_level, double radius_factor) {
  MultiScaleGraph g;
  g.grid = grid;
  g.mesh = build_icosphere(mesh_level);
  g.mesh_edges = build_multiscale_edges(g.mesh);
  g.g2m = build_g2m_edges(grid, g.mesh, radius_factor);
  g.m2g = build_m2g_edges(grid, g.mesh);
  g.mesh_node_geom = DenseArray::zeros({g.n_mesh(), 3});
  for (int64_t m = 0; m < g.n_mesh(); ++m)
    for (int64_t k = 0; k < 3; ++k)
      g.mesh_node_geom.at(m, k) = static_cast<float>(g.mesh.vertices[static_cast<size_t>(m)][static_cast<size_t>(k)]);
  return g;
}

}  // namespace nom
