#include "texmesh/tetgrid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace texmesh {

namespace {

// Local edge order within a tet. The face table lists, per face opposite
// vertex f, the bitmask of the three local edges lying on that face.
constexpr std::array<std::array<int, 2>, 6> kTetEdges{{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
constexpr std::array<unsigned, 4> kFaceEdgeMask{
    0b111000, // opposite 0: edges 12,13,23
    0b100110, // opposite 1: edges 02,03,23
    0b010101, // opposite 2: edges 01,03,13
    0b001011, // opposite 3: edges 01,02,12
};

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

void orient(Tet& t, std::span<const Vec3> pos)
{
    if (signed_volume(pos[t[0]], pos[t[1]], pos[t[2]], pos[t[3]]) < 0.0) std::swap(t[1], t[2]);
}

} // namespace

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
    return dot(cross(b - a, c - a), d - a) / 6.0;
}

void check_field(const TetGrid& grid, const GeometryField& field)
{
    if (field.sdf.size() != grid.vertex_count() || field.deform.size() != grid.vertex_count()) {
        throw std::invalid_argument("field size " + std::to_string(field.sdf.size()) + "/" +
                                    std::to_string(field.deform.size()) + " does not match grid vertex count " +
                                    std::to_string(grid.vertex_count()));
    }
}

TetGrid build_regular_grid(int res)
{
    if (res < 1) throw std::invalid_argument("grid resolution must be >= 1");

    TetGrid grid;
    grid.resolution = res;
    const std::uint32_t n = static_cast<std::uint32_t>(res) + 1;
    grid.vertices.reserve(static_cast<std::size_t>(n) * n * n);
    for (std::uint32_t k = 0; k < n; ++k)
        for (std::uint32_t j = 0; j < n; ++j)
            for (std::uint32_t i = 0; i < n; ++i)
                grid.vertices.emplace_back(-1.0 + 2.0 * i / res, -1.0 + 2.0 * j / res, -1.0 + 2.0 * k / res);

    auto index = [n](std::uint32_t i, std::uint32_t j, std::uint32_t k) { return i + n * (j + n * k); };

    // Kuhn split: every tet walks 000 -> 111 along one axis permutation, so
    // all cubes share the same main diagonal and neighbouring faces conform.
    constexpr std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    grid.tets.reserve(6u * res * res * res);
    for (int k = 0; k < res; ++k) {
        for (int j = 0; j < res; ++j) {
            for (int i = 0; i < res; ++i) {
                for (const auto& p : perms) {
                    std::array<int, 3> c{i, j, k};
                    Tet t{};
                    t[0] = index(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[p[s]];
                        t[s + 1] = index(c[0], c[1], c[2]);
                    }
                    orient(t, grid.vertices);
                    grid.tets.push_back(t);
                }
            }
        }
    }
    grid.edges = unique_edges(grid.tets);
    return grid;
}

std::vector<Edge> unique_edges(std::span<const Tet> tets)
{
    std::vector<Edge> edges;
    edges.reserve(tets.size() * 6);
    for (const Tet& t : tets) {
        for (const auto& e : kTetEdges) {
            auto a = t[e[0]], b = t[e[1]];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::uint32_t> surface_tets(const TetGrid& grid, const GeometryField& field)
{
    check_field(grid, field);
    std::vector<std::uint32_t> out;
    for (std::uint32_t t = 0; t < grid.tets.size(); ++t) {
        const Tet& tet = grid.tets[t];
        int inside = 0;
        for (auto v : tet) inside += is_inside(field.sdf[v]) ? 1 : 0;
        if (inside != 0 && inside != 4) out.push_back(t);
    }
    return out;
}

SubdivisionResult subdivide(const TetGrid& grid, const GeometryField& field,
                            std::span<const std::uint32_t> selected)
{
    check_field(grid, field);
    const std::size_t ntets = grid.tets.size();
    for (auto t : selected) {
        if (t >= ntets) throw std::invalid_argument("selected tet index " + std::to_string(t) + " out of range");
    }

    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edge_tets;
    edge_tets.reserve(grid.edges.size() * 2);
    for (std::uint32_t t = 0; t < ntets; ++t)
        for (const auto& e : kTetEdges) edge_tets[edge_key(grid.tets[t][e[0]], grid.tets[t][e[1]])].push_back(t);

    std::unordered_map<std::uint64_t, std::uint32_t> marked; // edge -> midpoint vertex (assigned later)
    std::vector<std::uint8_t> red(ntets, 0);
    std::vector<std::uint32_t> work;

    auto mark = [&](std::uint32_t t, int local) {
        auto key = edge_key(grid.tets[t][kTetEdges[local][0]], grid.tets[t][kTetEdges[local][1]]);
        if (marked.emplace(key, 0).second) {
            for (auto nb : edge_tets[key]) work.push_back(nb);
        }
    };
    auto edge_mask = [&](std::uint32_t t) {
        unsigned m = 0;
        for (int e = 0; e < 6; ++e)
            if (marked.count(edge_key(grid.tets[t][kTetEdges[e][0]], grid.tets[t][kTetEdges[e][1]]))) m |= 1u << e;
        return m;
    };

    for (auto t : selected) {
        red[t] = 1;
        for (int e = 0; e < 6; ++e) mark(t, e);
    }

    // Red-green closure: every non-red tet must end with 0 or 1 marked
    // edges, or exactly the three edges of one face.
    while (!work.empty()) {
        const std::uint32_t t = work.back();
        work.pop_back();
        if (red[t]) continue;
        const unsigned m = edge_mask(t);
        if (m == 0 || (m & (m - 1)) == 0) continue;
        int face = -1;
        for (int f = 0; f < 4; ++f)
            if ((m & ~kFaceEdgeMask[f]) == 0) face = f;
        if (face >= 0) {
            for (int e = 0; e < 6; ++e)
                if (kFaceEdgeMask[face] & (1u << e)) mark(t, e);
        } else {
            red[t] = 1;
            for (int e = 0; e < 6; ++e) mark(t, e);
        }
    }

    SubdivisionResult out;
    out.grid.resolution = grid.resolution * 2;
    out.grid.vertices = grid.vertices;
    out.field = field;
    out.field.deform_bound = field.deform_bound * 0.5;

    std::vector<std::uint64_t> keys;
    keys.reserve(marked.size());
    for (const auto& kv : marked) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    for (auto key : keys) {
        const auto a = static_cast<std::uint32_t>(key >> 32);
        const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
        marked[key] = static_cast<std::uint32_t>(out.grid.vertices.size());
        out.grid.vertices.push_back((grid.vertices[a] + grid.vertices[b]) * 0.5);
        out.field.sdf.push_back(0.5 * (field.sdf[a] + field.sdf[b]));
        out.field.deform.push_back((field.deform[a] + field.deform[b]) * 0.5);
    }
    const double bound = out.field.deform_bound;
    for (auto& d : out.field.deform) {
        d = Vec3(std::clamp(d.x, -bound, bound), std::clamp(d.y, -bound, bound), std::clamp(d.z, -bound, bound));
    }

    auto mid = [&](const Tet& t, int a, int b) { return marked.at(edge_key(t[a], t[b])); };
    auto emit = [&](Tet t) {
        orient(t, out.grid.vertices);
        out.grid.tets.push_back(t);
    };

    for (std::uint32_t ti = 0; ti < ntets; ++ti) {
        const Tet& t = grid.tets[ti];
        if (red[ti]) {
            const std::uint32_t m01 = mid(t, 0, 1), m02 = mid(t, 0, 2), m03 = mid(t, 0, 3);
            const std::uint32_t m12 = mid(t, 1, 2), m13 = mid(t, 1, 3), m23 = mid(t, 2, 3);
            emit({t[0], m01, m02, m03});
            emit({m01, t[1], m12, m13});
            emit({m02, m12, t[2], m23});
            emit({m03, m13, m23, t[3]});
            // Inner octahedron: split along its shortest diagonal.
            const std::array<std::array<std::uint32_t, 2>, 3> diags{{{m01, m23}, {m02, m13}, {m03, m12}}};
            int best = 0;
            double best_len = 0.0;
            for (int d = 0; d < 3; ++d) {
                const double len = squared_norm(out.grid.vertices[diags[d][0]] - out.grid.vertices[diags[d][1]]);
                if (d == 0 || len < best_len) {
                    best = d;
                    best_len = len;
                }
            }
            const auto& o1 = diags[(best + 1) % 3];
            const auto& o2 = diags[(best + 2) % 3];
            const std::array<std::uint32_t, 4> ring{o1[0], o2[0], o1[1], o2[1]};
            for (int r = 0; r < 4; ++r) emit({diags[best][0], diags[best][1], ring[r], ring[(r + 1) % 4]});
            continue;
        }
        const unsigned m = edge_mask(ti);
        if (m == 0) {
            out.grid.tets.push_back(t);
        } else if ((m & (m - 1)) == 0) {
            int e = 0;
            while (!(m & (1u << e))) ++e;
            const int a = kTetEdges[e][0], b = kTetEdges[e][1];
            const std::uint32_t mv = mid(t, a, b);
            Tet c1 = t, c2 = t;
            c1[a] = mv;
            c2[b] = mv;
            emit(c1);
            emit(c2);
        } else {
            int f = 0;
            while (m != kFaceEdgeMask[f]) ++f;
            std::array<int, 3> fv{};
            int n = 0;
            for (int v = 0; v < 4; ++v)
                if (v != f) fv[n++] = v;
            const std::uint32_t a = t[fv[0]], b = t[fv[1]], c = t[fv[2]], d = t[f];
            const std::uint32_t mab = mid(t, fv[0], fv[1]), mac = mid(t, fv[0], fv[2]), mbc = mid(t, fv[1], fv[2]);
            emit({a, mab, mac, d});
            emit({mab, b, mbc, d});
            emit({mac, mbc, c, d});
            emit({mab, mbc, mac, d});
        }
    }
    out.grid.edges = unique_edges(out.grid.tets);
    return out;
}

GeometryField apply_residuals(const GeometryField& field, std::span<const double> dsdf, std::span<const Vec3> ddeform)
{
    if (dsdf.size() != field.sdf.size() || ddeform.size() != field.deform.size())
        throw std::invalid_argument("residual sizes do not match field");
    GeometryField out = field;
    const double b = field.deform_bound;
    for (std::size_t i = 0; i < field.sdf.size(); ++i) {
        out.sdf[i] = std::clamp(field.sdf[i] + dsdf[i], -1.0, 1.0);
        const Vec3 d = field.deform[i] + ddeform[i];
        out.deform[i] = Vec3(std::clamp(d.x, -b, b), std::clamp(d.y, -b, b), std::clamp(d.z, -b, b));
    }
    return out;
}

} // namespace texmesh
