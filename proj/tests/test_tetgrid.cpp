#include <doctest.h>

#include <map>
#include <set>

#include "support.hpp"
#include "texmesh/tetgrid.hpp"

using namespace texmesh;

namespace {

std::set<std::pair<std::uint32_t, std::uint32_t>> pair_scan(const std::vector<Tet>& tets)
{
    std::set<std::pair<std::uint32_t, std::uint32_t>> s;
    for (const Tet& t : tets)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (t[a] < t[b]) s.insert({t[a], t[b]});
    return s;
}

std::map<std::array<std::uint32_t, 3>, int> face_counts(const std::vector<Tet>& tets)
{
    std::map<std::array<std::uint32_t, 3>, int> m;
    for (const Tet& t : tets)
        for (int skip = 0; skip < 4; ++skip) {
            std::array<std::uint32_t, 3> f{};
            int n = 0;
            for (int v = 0; v < 4; ++v)
                if (v != skip) f[n++] = t[v];
            std::sort(f.begin(), f.end());
            ++m[f];
        }
    return m;
}

double tet_volume(const TetGrid& g, const Tet& t)
{
    return signed_volume(g.vertices[t[0]], g.vertices[t[1]], g.vertices[t[2]], g.vertices[t[3]]);
}

/// Two tets sharing the face (1,2,3).
TetGrid two_tets()
{
    TetGrid g;
    g.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
    g.tets = {Tet{0, 1, 2, 3}, Tet{1, 2, 3, 4}};
    for (Tet& t : g.tets)
        if (tet_volume(g, t) < 0) std::swap(t[2], t[3]);
    g.edges = unique_edges(g);
    g.resolution = 1;
    return g;
}

} // namespace

TEST_CASE("build_regular_grid counts")
{
    const TetGrid g1 = build_regular_grid(1);
    CHECK(g1.vertex_count() == 8);
    CHECK(g1.tet_count() == 6);
    CHECK(g1.edges.size() == 19);
    const TetGrid g2 = build_regular_grid(2);
    CHECK(g2.vertex_count() == 27);
    CHECK(g2.tet_count() == 48);
    CHECK_THROWS_AS(build_regular_grid(0), std::invalid_argument);
}

TEST_CASE("res 1 edges are 12 cube edges, 6 face diagonals and 1 body diagonal")
{
    const TetGrid g = build_regular_grid(1);
    int cube = 0, face = 0, body = 0;
    for (const auto& [a, b] : g.edges) {
        const Vec3 d = g.vertices[b] - g.vertices[a];
        int nonzero = 0;
        for (int k = 0; k < 3; ++k) nonzero += std::abs(d[k]) > 0.5;
        (nonzero == 1 ? cube : nonzero == 2 ? face : body) += 1;
    }
    CHECK(cube == 12);
    CHECK(face == 6);
    CHECK(body == 1);
}

TEST_CASE("unique_edges matches a brute-force pair scan")
{
    CHECK(unique_edges(std::vector<Tet>{Tet{0, 1, 2, 3}}).size() == 6);
    CHECK(unique_edges(std::vector<Tet>{}).empty());
    for (int res : {1, 2, 3, 5}) {
        const TetGrid g = build_regular_grid(res);
        const auto scan = pair_scan(g.tets);
        REQUIRE(g.edges.size() == scan.size());
        std::size_t i = 0;
        for (const auto& p : scan) {
            CHECK(g.edges[i].first == p.first);
            CHECK(g.edges[i].second == p.second);
            ++i;
        }
    }
}

TEST_CASE("grid covers the cube, is positively oriented and conforming")
{
    for (int res : {1, 2, 4, 7}) {
        const TetGrid g = build_regular_grid(res);
        double vol = 0.0;
        for (const Tet& t : g.tets) {
            for (auto v : t) REQUIRE(v < g.vertex_count());
            const double v = tet_volume(g, t);
            CHECK(v > 0.0);
            vol += v;
        }
        CHECK(vol == doctest::Approx(8.0).epsilon(1e-12));
        // Interior faces are shared by exactly two tets, boundary faces by one:
        // 6 cube sides * res^2 squares * 2 triangles.
        long boundary = 0;
        for (const auto& [f, n] : face_counts(g.tets)) {
            CHECK((n == 1 || n == 2));
            boundary += n == 1;
        }
        CHECK(boundary == 12L * res * res);
    }
}

TEST_CASE("surface_tets equals a brute-force sign scan")
{
    const TetGrid g = build_regular_grid(8);
    GeometryField f = GeometryField::zeros(g.vertex_count(), 1.0 / 8);
    CHECK(surface_tets(g, GeometryField{std::vector<double>(g.vertex_count(), 0.5), f.deform, f.deform_bound}).empty());
    for (std::size_t v = 0; v < g.vertex_count(); ++v) f.sdf[v] = norm(g.vertices[v]) - 0.6;
    const auto got = surface_tets(g, f);
    std::vector<std::uint32_t> expect;
    for (std::uint32_t t = 0; t < g.tet_count(); ++t) {
        int inside = 0;
        for (auto v : g.tets[t]) inside += f.sdf[v] <= 0.0;
        if (inside != 0 && inside != 4) expect.push_back(t);
    }
    CHECK(got == expect);

    TetGrid one;
    one.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    one.tets = {Tet{0, 1, 2, 3}};
    one.edges = unique_edges(one);
    GeometryField fo = GeometryField::zeros(4, 1.0);
    fo.sdf = {-1, 1, 1, 1};
    CHECK(surface_tets(one, fo) == std::vector<std::uint32_t>{0});
    fo.sdf.pop_back();
    CHECK_THROWS_AS(surface_tets(one, fo), std::invalid_argument);
}

TEST_CASE("subdivide a single tet")
{
    TetGrid g;
    g.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    g.tets = {Tet{0, 1, 2, 3}};
    g.edges = unique_edges(g);
    g.resolution = 1;
    GeometryField f = GeometryField::zeros(4, 0.5);
    f.sdf = {-1, 1, 0.5, 0.25};
    f.deform = {{0.4, 0, 0}, {0.2, 0, 0}, {0, 0, 0}, {0, -0.4, 0}};
    const std::uint32_t sel[] = {0};
    const auto r = subdivide(g, f, sel);
    CHECK(r.grid.tet_count() == 8);
    CHECK(r.grid.vertex_count() == 10);
    double vol = 0.0;
    for (const Tet& t : r.grid.tets) vol += tet_volume(r.grid, t);
    CHECK(std::abs(vol - tet_volume(g, g.tets[0])) < 1e-12);
    // The new vertex between vertices 0 and 1 has sdf mean(-1, 1) = 0.
    bool found = false;
    for (std::size_t v = 4; v < r.grid.vertex_count(); ++v) {
        const Vec3 p = r.grid.vertices[v];
        if (std::abs(p.x - 0.5) < 1e-15 && p.y == 0.0 && p.z == 0.0) {
            found = true;
            CHECK(r.field.sdf[v] == 0.0);
            // mean deform 0.3 re-clamped to the halved bound 0.25
            CHECK(r.field.deform[v].x == doctest::Approx(0.25));
        }
    }
    CHECK(found);
    CHECK(r.field.deform_bound == doctest::Approx(0.25));
    const std::uint32_t bad[] = {1};
    CHECK_THROWS_AS(subdivide(g, f, bad), std::invalid_argument);
}

TEST_CASE("subdivide welds midpoints across a shared face")
{
    const TetGrid g = two_tets();
    const GeometryField f = GeometryField::zeros(g.vertex_count(), 0.5);
    const std::uint32_t sel[] = {0, 1};
    const auto r = subdivide(g, f, sel);
    CHECK(r.grid.vertex_count() == 14);
    CHECK(r.grid.tet_count() == 16);
}

TEST_CASE("subdivision keeps the grid conforming and volume-conserving")
{
    const TetGrid g = build_regular_grid(4);
    GeometryField f = GeometryField::zeros(g.vertex_count(), 1.0 / 4);
    for (std::size_t v = 0; v < g.vertex_count(); ++v) f.sdf[v] = norm(g.vertices[v]) - 0.55;
    const auto sel = surface_tets(g, f);
    const auto r = subdivide(g, f, sel);
    double vol = 0.0;
    for (const Tet& t : r.grid.tets) {
        const double v = tet_volume(r.grid, t);
        CHECK(v > 0.0);
        vol += v;
    }
    CHECK(std::abs(vol - 8.0) < 1e-12);
    for (const auto& [face, n] : face_counts(r.grid.tets)) CHECK((n == 1 || n == 2));
    const auto scan = pair_scan(r.grid.tets);
    CHECK(r.grid.edges.size() == scan.size());
    for (const Vec3& d : r.field.deform)
        for (int k = 0; k < 3; ++k) CHECK(std::abs(d[k]) <= r.field.deform_bound);
}

TEST_CASE("apply_residuals")
{
    std::mt19937_64 rng(3);
    const std::size_t n = 50;
    GeometryField f = GeometryField::zeros(n, 0.125);
    f.sdf = testsupport::uniform_vec(n, -1, 1, rng);
    for (auto& d : f.deform) d = testsupport::uniform_vec3(-0.125, 0.125, rng);

    const auto same = apply_residuals(f, std::vector<double>(n, 0.0), std::vector<Vec3>(n));
    CHECK(same.sdf == f.sdf);
    CHECK(same.deform == f.deform);

    GeometryField one = GeometryField::zeros(1, 0.1);
    one.sdf = {0.9};
    CHECK(apply_residuals(one, std::vector<double>{0.5}, std::vector<Vec3>(1)).sdf[0] == 1.0);

    const auto ds = testsupport::uniform_vec(n, -0.5, 0.5, rng);
    std::vector<Vec3> dd(n);
    for (auto& d : dd) d = testsupport::uniform_vec3(-0.2, 0.2, rng);
    const auto r = apply_residuals(f, ds, dd);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::min(1.0, std::max(-1.0, f.sdf[i] + ds[i]));
        CHECK(r.sdf[i] == s);
        for (int k = 0; k < 3; ++k) {
            const double d = std::min(0.125, std::max(-0.125, f.deform[i][k] + dd[i][k]));
            CHECK(r.deform[i][k] == d);
        }
    }
    // Repeated residuals never push deformations past the bound.
    GeometryField acc = f;
    for (int step = 0; step < 20; ++step) {
        for (auto& d : dd) d = testsupport::uniform_vec3(-0.3, 0.3, rng);
        acc = apply_residuals(acc, std::vector<double>(n, 0.0), dd);
        for (const Vec3& d : acc.deform)
            for (int k = 0; k < 3; ++k) CHECK(std::abs(d[k]) <= 0.125);
    }
    CHECK_THROWS_AS(apply_residuals(f, std::vector<double>(n - 1), dd), std::invalid_argument);
}
