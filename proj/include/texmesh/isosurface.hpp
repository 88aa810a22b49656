#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "texmesh/tetgrid.hpp"

namespace texmesh {

using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh. For meshes produced by marching tetrahedra, `origin[v]`
/// is the grid edge (i, j) that vertex v lies on; i is the inside endpoint.
struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Edge> origin;
    std::size_t source_vertex_count = 0; ///< grid vertex count the mesh was extracted from

    bool empty() const { return faces.empty(); }
};

struct MeshGradients {
    std::vector<double> d_sdf;
    std::vector<Vec3> d_deform;
};

std::vector<Vec3> deformed_vertices(const TetGrid& grid, const GeometryField& field);

/// Marching-tetrahedra case table: for each 4-bit inside mask (bit k set
/// when tet vertex k is inside) up to two triangles, each given as three
/// local edge indices into (01, 02, 03, 12, 13, 23). Entries of -1 are unused.
/// Triangles are wound so their normal points from inside to outside on a
/// positively oriented tet.
const std::array<std::array<int, 6>, 16>& tet_case_table();
constexpr std::array<std::array<int, 2>, 6> kTetLocalEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

SurfaceMesh marching_tetrahedra(const TetGrid& grid, const GeometryField& field);

MeshGradients marching_tetrahedra_backward(const TetGrid& grid, const GeometryField& field,
                                           const SurfaceMesh& mesh, std::span<const Vec3> upstream);

/// Zero crossing of the segment (pi, pj) with SDF values (si, sj).
inline Vec3 edge_crossing(const Vec3& pi, const Vec3& pj, double si, double sj)
{
    return (pi * sj - pj * si) / (sj - si);
}

struct TopologyStats {
    long euler = 0;
    long boundary_edges = 0;
    long components = 0;
};

TopologyStats mesh_topology_stats(const SurfaceMesh& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

} // namespace texmesh
