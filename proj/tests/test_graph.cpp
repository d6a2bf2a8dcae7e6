#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "nom/graph.hpp"

using nom::build_g2m_edges;
using nom::build_icosphere;
using nom::build_m2g_edges;
using nom::build_multiscale_edges;
using nom::EdgeSet;
using nom::GridSpec;
using nom::IcoMesh;
using nom::Vec3;

TEST_CASE("icosphere counts and Euler characteristic, levels 0..4") {
  for (int level = 0; level <= 4; ++level) {
    IcoMesh mesh = build_icosphere(level);
    for (int l = 0; l <= level; ++l) {
      const int64_t p = 1LL << (2 * l);  // 4^l
      CHECK(mesh.level_vertex_count[static_cast<size_t>(l)] == 10 * p + 2);
      CHECK(static_cast<int64_t>(mesh.level_edges[static_cast<size_t>(l)].size()) == 30 * p);
      CHECK(mesh.level_face_count[static_cast<size_t>(l)] == 20 * p);
      const int64_t euler = mesh.level_vertex_count[static_cast<size_t>(l)] -
                            static_cast<int64_t>(mesh.level_edges[static_cast<size_t>(l)].size()) +
                            mesh.level_face_count[static_cast<size_t>(l)];
      CHECK(euler == 2);
    }
    for (const auto& v : mesh.vertices) {
      const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      CHECK(std::abs(n - 1.0) < 1e-6);
    }
  }
  CHECK_THROWS_AS(build_icosphere(-1), nom::GraphError);
  CHECK_THROWS_AS(build_icosphere(7), nom::GraphError);
}

TEST_CASE("multiscale edge union: directed counts and set semantics") {
  IcoMesh mesh0 = build_icosphere(0);
  EdgeSet e0 = build_multiscale_edges(mesh0);
  CHECK(e0.size() == 60);  // 30 undirected, both directions

  IcoMesh mesh2 = build_icosphere(2);
  EdgeSet e2 = build_multiscale_edges(mesh2);
  std::set<std::pair<int32_t, int32_t>> expected;
  for (const auto& level : mesh2.level_edges)
    for (const auto& e : level) {
      expected.insert({e[0], e[1]});
      expected.insert({e[1], e[0]});
    }
  CHECK(static_cast<size_t>(e2.size()) == expected.size());
  std::set<std::pair<int32_t, int32_t>> got;
  for (int64_t i = 0; i < e2.size(); ++i) {
    auto p = std::make_pair(e2.senders[static_cast<size_t>(i)], e2.receivers[static_cast<size_t>(i)]);
    CHECK(expected.count(p) == 1);
    CHECK(got.insert(p).second);  // no duplicate (sender, receiver) pairs
  }
  // bisection never reproduces a coarse edge at a finer level, so the union
  // is the plain sum over levels
  int64_t total = 0;
  for (const auto& level : mesh2.level_edges) total += 2 * static_cast<int64_t>(level.size());
  CHECK(e2.size() == total);
  // coarse edges are a subset of the union
  for (const auto& e : mesh2.level_edges[0]) CHECK(expected.count({e[0], e[1]}) == 1);
}

TEST_CASE("grid spec: strictly decreasing latitudes, no poles") {
  GridSpec g = GridSpec::regular(16, 32);
  CHECK(g.n_nodes() == 512);
  for (int i = 1; i < g.n_lat; ++i)
    CHECK(g.lat_deg[static_cast<size_t>(i)] < g.lat_deg[static_cast<size_t>(i - 1)]);
  CHECK(g.lat_deg.front() < 90.0);
  CHECK(g.lat_deg.back() > -90.0);
}

TEST_CASE("g2m: radius rule matches brute force, saturation, isolation error") {
  GridSpec grid = GridSpec::regular(32, 64);
  IcoMesh mesh = build_icosphere(3);
  const double factor = 0.6;
  EdgeSet g2m = build_g2m_edges(grid, mesh, factor);

  const double radius = factor * nom::mean_edge_arc_length(mesh);
  int64_t expected = 0;
  std::vector<int64_t> in_degree(static_cast<size_t>(mesh.n_vertices()), 0);
  for (int64_t g = 0; g < grid.n_nodes(); ++g) {
    const Vec3 p = grid.node_position(g);
    for (int64_t m = 0; m < mesh.n_vertices(); ++m)
      if (nom::great_circle(p, mesh.vertices[static_cast<size_t>(m)]) <= radius) {
        expected++;
        in_degree[static_cast<size_t>(m)]++;
      }
  }
  CHECK(g2m.size() == expected);
  std::vector<int64_t> got_degree(static_cast<size_t>(mesh.n_vertices()), 0);
  for (int32_t r : g2m.receivers) got_degree[static_cast<size_t>(r)]++;
  CHECK(got_degree == in_degree);

  // saturation: radius covering the whole sphere connects everything
  GridSpec small = GridSpec::regular(4, 8);
  IcoMesh mesh0 = build_icosphere(0);
  EdgeSet all = build_g2m_edges(small, mesh0, 10.0);
  CHECK(all.size() == small.n_nodes() * mesh0.n_vertices());

  // tiny radius isolates grid nodes
  CHECK_THROWS_WITH_AS(build_g2m_edges(small, mesh0, 1e-4), doctest::Contains("radius_factor"),
                       nom::GraphError);
}

TEST_CASE("m2g: every grid node receives from exactly one containing face") {
  GridSpec grid = GridSpec::regular(16, 32);
  IcoMesh mesh = build_icosphere(2);
  EdgeSet m2g = build_m2g_edges(grid, mesh);
  CHECK(m2g.size() == 3 * grid.n_nodes());
  std::vector<int> deg(static_cast<size_t>(grid.n_nodes()), 0);
  for (int32_t r : m2g.receivers) deg[static_cast<size_t>(r)]++;
  for (int d : deg) CHECK(d == 3);
  for (int32_t s : m2g.senders) {
    CHECK(s >= 0);
    CHECK(s < mesh.n_vertices());
  }
}

TEST_CASE("m2g: grid node colocated with a mesh vertex lists that vertex") {
  IcoMesh mesh = build_icosphere(1);
  const Vec3 v0 = mesh.vertices[0];
  const double lat = std::asin(v0[2]) * 180.0 / M_PI;
  const double lon = std::atan2(v0[1], v0[0]) * 180.0 / M_PI;
  GridSpec grid;
  grid.n_lat = 1;
  grid.n_lon = 1;
  grid.lat_deg = {lat};
  grid.lon_deg = {lon};
  grid.land = {0};
  EdgeSet m2g = build_m2g_edges(grid, mesh);
  REQUIRE(m2g.size() == 3);
  bool found = false;
  for (int32_t s : m2g.senders) found = found || s == 0;
  CHECK(found);
}

TEST_CASE("edge geometry: self-edge, antipodal, arccos oracle") {
  std::vector<Vec3> pos{{1, 0, 0}, {-1, 0, 0}, nom::normalize({0.3, -0.8, 0.52})};
  EdgeSet e;
  e.senders = {0, 0, 2};
  e.receivers = {0, 1, 0};
  nom::compute_edge_geometry(e, pos, pos);
  CHECK(e.geom.at(0, 0) == 0.0f);
  CHECK(e.geom.at(0, 1) == 0.0f);
  CHECK(e.geom.at(0, 2) == 0.0f);
  CHECK(e.geom.at(0, 3) == 0.0f);
  CHECK(std::abs(e.geom.at(1, 3) - static_cast<float>(M_PI)) < 1e-6);
  const double dot = pos[2][0] * pos[0][0] + pos[2][1] * pos[0][1] + pos[2][2] * pos[0][2];
  CHECK(std::abs(e.geom.at(2, 3) - std::acos(dot)) < 1e-6);

  // length symmetric under sender/receiver swap
  EdgeSet back;
  back.senders = {0};
  back.receivers = {2};
  nom::compute_edge_geometry(back, pos, pos);
  CHECK(back.geom.at(0, 3) == doctest::Approx(e.geom.at(2, 3)).epsilon(1e-7));
}

TEST_CASE("graph construction is deterministic") {
  GridSpec grid = GridSpec::regular(8, 16);
  auto g1 = nom::build_graph(grid, 1, 1.0);
  auto g2 = nom::build_graph(grid, 1, 1.0);
  CHECK(g1.mesh_edges.senders == g2.mesh_edges.senders);
  CHECK(g1.mesh_edges.receivers == g2.mesh_edges.receivers);
  CHECK(g1.g2m.senders == g2.g2m.senders);
  CHECK(g1.m2g.senders == g2.m2g.senders);
  CHECK(g1.mesh_edges.geom.data == g2.mesh_edges.geom.data);
  CHECK(g1.g2m.geom.data == g2.g2m.geom.data);
}
