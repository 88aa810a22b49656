#include "texmesh/isosurface.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace texmesh {

namespace {

constexpr double kMinCrossingDenominator = 1e-12;
constexpr double kDegenerateArea = 1e-12;
/// Vertices of a degenerate face closer than this are merged.
constexpr double kMergeLength = 1e-6;

int local_edge(int a, int b)
{
    if (a > b) std::swap(a, b);
    for (int e = 0; e < 6; ++e)
        if (kTetLocalEdges[e][0] == a && kTetLocalEdges[e][1] == b) return e;
    return -1;
}

std::array<std::array<int, 6>, 16> build_case_table()
{
    // Reference tet with positive orientation; SDF -1 inside, +1 outside
    // puts every crossing at the edge midpoint.
    const std::array<Vec3, 4> ref{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    std::array<std::array<int, 6>, 16> table{};
    for (int mask = 0; mask < 16; ++mask) {
        table[mask].fill(-1);
        std::vector<int> in, out;
        for (int v = 0; v < 4; ++v) (mask & (1 << v) ? in : out).push_back(v);
        if (in.empty() || out.empty()) continue;

        std::vector<std::array<int, 3>> tris;
        if (in.size() == 1 || out.size() == 1) {
            const int apex = in.size() == 1 ? in[0] : out[0];
            std::array<int, 3> tri{};
            int n = 0;
            for (int v = 0; v < 4; ++v)
                if (v != apex) tri[n++] = local_edge(apex, v);
            tris.push_back(tri);
        } else {
            const int a = in[0], b = in[1], c = out[0], d = out[1];
            const int ac = local_edge(a, c), ad = local_edge(a, d), bd = local_edge(b, d), bc = local_edge(b, c);
            tris.push_back({ac, ad, bd});
            tris.push_back({ac, bd, bc});
        }

        Vec3 cin, cout;
        for (int v : in) cin += ref[v] / static_cast<double>(in.size());
        for (int v : out) cout += ref[v] / static_cast<double>(out.size());
        auto mid = [&](int e) { return (ref[kTetLocalEdges[e][0]] + ref[kTetLocalEdges[e][1]]) * 0.5; };
        int slot = 0;
        for (auto tri : tris) {
            const Vec3 n = cross(mid(tri[1]) - mid(tri[0]), mid(tri[2]) - mid(tri[0]));
            if (dot(n, cout - cin) < 0.0) std::swap(tri[1], tri[2]);
            for (int k = 0; k < 3; ++k) table[mask][slot++] = tri[k];
        }
    }
    return table;
}

std::uint64_t key_of(std::uint32_t a, std::uint32_t b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

/// A zero-area face (a, b, c) whose vertex c lies on its longest edge ab is
/// removed by splitting the neighbour (b, a, d) across ab into (b, c, d) and
/// (c, a, d). The surface stays closed and consistently wound.
void remove_slivers(SurfaceMesh& mesh)
{
    auto area = [&](const Face& f) {
        return triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    };
    for (int pass = 0; pass < 8; ++pass) {
        std::unordered_map<std::uint64_t, std::size_t> directed;
        for (std::size_t i = 0; i < mesh.faces.size(); ++i)
            for (int k = 0; k < 3; ++k)
                directed[(static_cast<std::uint64_t>(mesh.faces[i][k]) << 32) | mesh.faces[i][(k + 1) % 3]] = i;
        std::vector<std::uint8_t> touched(mesh.faces.size(), 0);
        std::vector<std::uint8_t> dead(mesh.faces.size(), 0);
        std::vector<Face> added;
        for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
            const Face f = mesh.faces[i];
            if (touched[i] || area(f) >= kDegenerateArea) continue;
            int e = 0;
            double longest = -1.0;
            for (int k = 0; k < 3; ++k) {
                const double len = norm(mesh.vertices[f[k]] - mesh.vertices[f[(k + 1) % 3]]);
                if (len > longest) longest = len, e = k;
            }
            const auto a = f[e], b = f[(e + 1) % 3], c = f[(e + 2) % 3];
            auto it = directed.find((static_cast<std::uint64_t>(b) << 32) | a);
            if (it == directed.end() || it->second == i || touched[it->second]) continue;
            const std::size_t j = it->second;
            const Face& n = mesh.faces[j];
            const auto d = n[0] != a && n[0] != b ? n[0] : (n[1] != a && n[1] != b ? n[1] : n[2]);
            if (d == c) continue;
            mesh.faces[j] = Face{b, c, d};
            added.push_back(Face{c, a, d});
            dead[i] = 1;
            touched[i] = touched[j] = 1;
        }
        if (added.empty()) return;
        std::vector<Face> kept;
        kept.reserve(mesh.faces.size() + added.size());
        for (std::size_t i = 0; i < mesh.faces.size(); ++i)
            if (!dead[i]) kept.push_back(mesh.faces[i]);
        kept.insert(kept.end(), added.begin(), added.end());
        mesh.faces = std::move(kept);
    }
}

} // namespace

const std::array<std::array<int, 6>, 16>& tet_case_table()
{
    static const auto table = build_case_table();
    return table;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * norm(cross(b - a, c - a)); }

std::vector<Vec3> deformed_vertices(const TetGrid& grid, const GeometryField& field)
{
    check_field(grid, field);
    std::vector<Vec3> out(grid.vertex_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = grid.vertices[i] + field.deform[i];
    return out;
}

SurfaceMesh marching_tetrahedra(const TetGrid& grid, const GeometryField& field)
{
    const auto pos = deformed_vertices(grid, field);
    const auto& table = tet_case_table();

    SurfaceMesh mesh;
    mesh.source_vertex_count = grid.vertex_count();
    std::unordered_map<std::uint64_t, std::uint32_t> welded;

    auto vertex_for = [&](std::uint32_t a, std::uint32_t b) {
        // Orient so the first endpoint is the inside one.
        if (!is_inside(field.sdf[a])) std::swap(a, b);
        auto [it, fresh] = welded.emplace(key_of(a, b), static_cast<std::uint32_t>(mesh.vertices.size()));
        if (fresh) {
            const double si = field.sdf[a], sj = field.sdf[b];
            Vec3 m = (sj - si) > kMinCrossingDenominator ? edge_crossing(pos[a], pos[b], si, sj)
                                                         : (pos[a] + pos[b]) * 0.5;
            mesh.vertices.push_back(m);
            mesh.origin.emplace_back(a, b);
        }
        return it->second;
    };

    for (const Tet& t : grid.tets) {
        int mask = 0;
        for (int v = 0; v < 4; ++v)
            if (is_inside(field.sdf[t[v]])) mask |= 1 << v;
        const auto& row = table[mask];
        for (int tri = 0; tri < 2 && row[3 * tri] >= 0; ++tri) {
            Face f{};
            for (int k = 0; k < 3; ++k) {
                const auto& le = kTetLocalEdges[row[3 * tri + k]];
                f[k] = vertex_for(t[le[0]], t[le[1]]);
            }
            mesh.faces.push_back(f);
        }
    }

    // Crossings that (nearly) coincide, e.g. around a grid vertex with s ~ 0,
    // make degenerate faces. Merge the shortest edge of each such face into
    // its lower-index vertex, repeat, then drop faces left degenerate. Simply
    // deleting the faces would open holes in the surface.
    std::vector<std::uint32_t> rep(mesh.vertices.size());
    std::iota(rep.begin(), rep.end(), 0u);
    auto find = [&](std::uint32_t v) {
        while (rep[v] != v) v = rep[v] = rep[rep[v]];
        return v;
    };
    for (bool merged = true; merged;) {
        merged = false;
        for (const Face& face : mesh.faces) {
            const std::array<std::uint32_t, 3> f{find(face[0]), find(face[1]), find(face[2])};
            const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
            if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || triangle_area(a, b, c) >= kDegenerateArea) continue;
            int best = -1;
            double best_len = kMergeLength;
            for (int e = 0; e < 3; ++e) {
                const double len = norm(mesh.vertices[f[e]] - mesh.vertices[f[(e + 1) % 3]]);
                if (len < best_len) best_len = len, best = e;
            }
            if (best < 0) continue;
            const auto u = f[best], v = f[(best + 1) % 3];
            rep[std::max(u, v)] = std::min(u, v);
            merged = true;
        }
    }
    for (Face& f : mesh.faces)
        for (auto& v : f) v = find(v);
    std::erase_if(mesh.faces, [](const Face& f) { return f[0] == f[1] || f[1] == f[2] || f[0] == f[2]; });
    remove_slivers(mesh);
    std::erase_if(mesh.faces, [&](const Face& f) {
        return triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]) < kDegenerateArea;
    });
    std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    for (const Face& f : mesh.faces)
        for (auto v : f) remap[v] = 0;
    std::uint32_t next = 0;
    for (auto& r : remap)
        if (r == 0) r = next++;
    if (next != mesh.vertices.size()) {
        std::vector<Vec3> verts(next);
        std::vector<Edge> origin(next);
        for (std::size_t v = 0; v < remap.size(); ++v) {
            if (remap[v] == UINT32_MAX) continue;
            verts[remap[v]] = mesh.vertices[v];
            origin[remap[v]] = mesh.origin[v];
        }
        mesh.vertices = std::move(verts);
        mesh.origin = std::move(origin);
        for (Face& f : mesh.faces)
            for (auto& v : f) v = remap[v];
    }
    return mesh;
}

MeshGradients marching_tetrahedra_backward(const TetGrid& grid, const GeometryField& field,
                                           const SurfaceMesh& mesh, std::span<const Vec3> upstream)
{
    check_field(grid, field);
    if (mesh.source_vertex_count != grid.vertex_count() || mesh.origin.size() != mesh.vertices.size())
        throw std::invalid_argument("mesh was not extracted from this grid");
    if (upstream.size() != mesh.vertices.size())
        throw std::invalid_argument("upstream gradient size does not match mesh vertex count");

    const auto pos = deformed_vertices(grid, field);
    MeshGradients g{std::vector<double>(grid.vertex_count(), 0.0), std::vector<Vec3>(grid.vertex_count())};

    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        const auto [i, j] = mesh.origin[v];
        if (i >= grid.vertex_count() || j >= grid.vertex_count() || !is_inside(field.sdf[i]) ||
            is_inside(field.sdf[j]))
            throw std::invalid_argument("mesh vertex origin is not a sign-flip edge of this field");
        const double si = field.sdf[i], sj = field.sdf[j];
        const double d = sj - si;
        if (d <= kMinCrossingDenominator) continue;
        const Vec3& up = upstream[v];
        // m = (p_i s_j - p_j s_i) / (s_j - s_i)
        g.d_deform[i] += up * (sj / d);
        g.d_deform[j] += up * (-si / d);
        const double inv_d2 = 1.0 / (d * d);
        g.d_sdf[i] += dot(up, pos[i] - pos[j]) * sj * inv_d2;
        g.d_sdf[j] += dot(up, pos[j] - pos[i]) * si * inv_d2;
    }
    return g;
}

TopologyStats mesh_topology_stats(const SurfaceMesh& mesh)
{
    TopologyStats st;
    if (mesh.vertices.empty() && mesh.faces.empty()) return st;

    std::unordered_map<std::uint64_t, int> edge_count;
    for (const Face& f : mesh.faces)
        for (int k = 0; k < 3; ++k) ++edge_count[key_of(f[k], f[(k + 1) % 3])];
    for (const auto& kv : edge_count)
        if (kv.second == 1) ++st.boundary_edges;
    st.euler = static_cast<long>(mesh.vertices.size()) - static_cast<long>(edge_count.size()) +
               static_cast<long>(mesh.faces.size());

    std::vector<std::uint32_t> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const Face& f : mesh.faces) {
        parent[find(f[1])] = find(f[0]);
        parent[find(f[2])] = find(f[0]);
    }
    std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
    for (const Face& f : mesh.faces)
        for (auto v : f) used[v] = 1;
    for (std::uint32_t v = 0; v < parent.size(); ++v)
        if (used[v] && find(v) == v) ++st.components;
    return st;
}

} // namespace texmesh
