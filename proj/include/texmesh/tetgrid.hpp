#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "texmesh/vec.hpp"

namespace texmesh {

using Tet = std::array<std::uint32_t, 4>;
using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Tetrahedral grid over [-1,1]^3. Tets are positively oriented and
/// edges are unique (min,max) pairs in lexicographic order.
struct TetGrid {
    std::vector<Vec3> vertices;
    std::vector<Tet> tets;
    std::vector<Edge> edges;
    int resolution = 0; ///< cells per axis; doubles on subdivision

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t tet_count() const { return tets.size(); }
};

/// Per-vertex SDF value and deformation offset. `deform_bound` is the
/// symmetric clamp applied to every deformation component.
struct GeometryField {
    std::vector<double> sdf;
    std::vector<Vec3> deform;
    double deform_bound = 1.0;

    static GeometryField zeros(std::size_t n, double bound)
    {
        return GeometryField{std::vector<double>(n, 0.0), std::vector<Vec3>(n), bound};
    }
};

/// Inside test shared by every module: zero counts as inside.
inline bool is_inside(double s) { return s <= 0.0; }

TetGrid build_regular_grid(int res);

std::vector<Edge> unique_edges(std::span<const Tet> tets);
inline std::vector<Edge> unique_edges(const TetGrid& grid) { return unique_edges(grid.tets); }

std::vector<std::uint32_t> surface_tets(const TetGrid& grid, const GeometryField& field);

struct SubdivisionResult {
    TetGrid grid;
    GeometryField field;
};

SubdivisionResult subdivide(const TetGrid& grid, const GeometryField& field,
                            std::span<const std::uint32_t> selected);

GeometryField apply_residuals(const GeometryField& field, std::span<const double> dsdf,
                              std::span<const Vec3> ddeform);

/// Signed volume of a tet; positive for the orientation used by the grid.
double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

/// Throws std::invalid_argument unless the field matches the grid.
void check_field(const TetGrid& grid, const GeometryField& field);

} // namespace texmesh
