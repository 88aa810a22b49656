#include <doctest.h>

#include <numbers>

#include "support.hpp"
#include "texmesh/render.hpp"

using namespace texmesh;
using testsupport::rel_err;

namespace {

/// Default camera on +z looking at the origin: right = +x, up = +y.
Camera front_camera(int size = 64)
{
    Camera c;
    c.width = c.height = size;
    return c;
}

double focal_px(const Camera& c) { return 0.5 * c.height / std::tan(0.5 * c.fov_y_deg * std::numbers::pi / 180.0); }

/// Pixel coordinates of a point, computed directly for the front camera.
std::array<double, 2> front_project(const Camera& c, const Vec3& p)
{
    const double f = focal_px(c), z = c.radius - p.z;
    return {0.5 * c.width + f * p.x / z, 0.5 * c.height - f * p.y / z};
}

/// World point on the plane z = 0 at pixel coordinate (u, v) of the front camera.
Vec3 front_unproject(const Camera& c, double u, double v)
{
    const double f = focal_px(c);
    return {(u - 0.5 * c.width) * c.radius / f, -(v - 0.5 * c.height) * c.radius / f, 0.0};
}

SurfaceMesh triangle_mesh(std::vector<Vec3> v, std::vector<Face> f)
{
    SurfaceMesh m;
    m.vertices = std::move(v);
    m.faces = std::move(f);
    return m;
}

using Poly = std::vector<std::array<double, 2>>;

Poly clip(const Poly& in, int axis, double bound, bool keep_less)
{
    Poly out;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto& p = in[i];
        const auto& q = in[(i + 1) % in.size()];
        const bool pin = keep_less ? p[axis] <= bound : p[axis] >= bound;
        const bool qin = keep_less ? q[axis] <= bound : q[axis] >= bound;
        if (pin) out.push_back(p);
        if (pin != qin) {
            const double t = (bound - p[axis]) / (q[axis] - p[axis]);
            out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
        }
    }
    return out;
}

double poly_area(const Poly& p)
{
    double a = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& u = p[i];
        const auto& v = p[(i + 1) % p.size()];
        a += u[0] * v[1] - v[0] * u[1];
    }
    return std::abs(a) / 2.0;
}

SurfaceMesh sphere_mesh(double r, int res)
{
    const TetGrid g = build_regular_grid(res);
    GeometryField f = GeometryField::zeros(g.vertex_count(), 0.5 / res);
    for (std::size_t v = 0; v < g.vertex_count(); ++v) f.sdf[v] = norm(g.vertices[v]) - r;
    return marching_tetrahedra(g, f);
}

double sum(const Image& im)
{
    double s = 0.0;
    for (double v : im.data) s += v;
    return s;
}

} // namespace

TEST_CASE("sample_camera")
{
    CameraDistribution d;
    d.azimuth_min = d.azimuth_max = 0.7;
    d.elevation_min = d.elevation_max = -0.2;
    d.radius = 2.0;
    std::mt19937_64 rng(1);
    const Camera c = sample_camera(d, rng);
    CHECK(c.azimuth == 0.7);
    CHECK(c.elevation == -0.2);
    CHECK(c.radius == 2.0);

    d.azimuth_min = 0.0;
    d.azimuth_max = 2 * std::numbers::pi;
    d.elevation_min = -0.3;
    d.elevation_max = 0.5;
    double amin = 1e9, amax = -1e9, emin = 1e9, emax = -1e9;
    for (int i = 0; i < 10000; ++i) {
        const Camera s = sample_camera(d, rng);
        amin = std::min(amin, s.azimuth);
        amax = std::max(amax, s.azimuth);
        emin = std::min(emin, s.elevation);
        emax = std::max(emax, s.elevation);
    }
    CHECK(amin >= 0.0);
    CHECK(amax <= 2 * std::numbers::pi);
    CHECK(emin >= -0.3);
    CHECK(emax <= 0.5);
    CHECK(amin < 0.01);
    CHECK(emax > 0.49);

    std::mt19937_64 r1(42), r2(42);
    for (int i = 0; i < 20; ++i) {
        const Camera a = sample_camera(d, r1), b = sample_camera(d, r2);
        CHECK(a.azimuth == b.azimuth);
        CHECK(a.elevation == b.elevation);
    }
    d.elevation_max = -1.0;
    CHECK_THROWS_AS(sample_camera(d, rng), std::invalid_argument);
}

TEST_CASE("camera projection agrees with a direct pinhole model")
{
    const Camera c = front_camera(48);
    const CameraFrame fr(c);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const Vec3 p = testsupport::uniform_vec3(-0.5, 0.5, rng);
        const Vec3 got = fr.project(p);
        const auto want = front_project(c, p);
        CHECK(std::abs(got.x - want[0]) < 1e-9);
        CHECK(std::abs(got.y - want[1]) < 1e-9);
        CHECK(got.z == doctest::Approx(c.radius - p.z));
    }
    Camera bad = c;
    bad.fov_y_deg = 180.0;
    CHECK_THROWS_AS(CameraFrame{bad}, std::invalid_argument);
}

TEST_CASE("rasterize coverage examples")
{
    const Camera c = front_camera();
    const GBuffer full = rasterize(triangle_mesh({{-5, -5, 0}, {5, -5, 0}, {0, 5, 0}}, {{0, 1, 2}}), c);
    for (auto m : full.mask) CHECK(m == 1);

    const GBuffer none = rasterize(SurfaceMesh{}, c);
    CHECK(none.coverage() == 0.0);

    // Half-image triangle; exact projected area clipped to the image rectangle.
    const std::vector<Vec3> tri{front_unproject(c, -6.3, -4.1), front_unproject(c, 70.2, 68.7),
                                front_unproject(c, -3.7, 69.4)};
    const GBuffer g = rasterize(triangle_mesh(tri, {{0, 1, 2}}), c);
    Poly poly;
    for (const Vec3& v : tri) poly.push_back(front_project(c, v));
    poly = clip(clip(clip(clip(poly, 0, 0.0, false), 0, 64.0, true), 1, 0.0, false), 1, 64.0, true);
    const double expect = poly_area(poly) / (64.0 * 64.0);
    CHECK(expect == doctest::Approx(0.5).epsilon(0.1));
    CHECK(std::abs(g.coverage() - expect) < 2.0 / 64);
}

TEST_CASE("rasterize depth test keeps the nearer triangle")
{
    const Camera c = front_camera();
    // Far triangle first so submission order cannot decide the result.
    const double zf = c.radius - 0.9, zn = c.radius - 0.5;
    const SurfaceMesh m = triangle_mesh({{-0.3, -0.3, zf}, {0.3, -0.3, zf}, {0, 0.3, zf}, {-0.1, -0.4, zn},
                                         {0.4, 0.0, zn}, {-0.1, 0.2, zn}},
                                        {{0, 1, 2}, {3, 4, 5}});
    const GBuffer g = rasterize(m, c);
    const GBuffer far_only = rasterize(triangle_mesh({m.vertices[0], m.vertices[1], m.vertices[2]}, {{0, 1, 2}}), c);
    const GBuffer near_only = rasterize(triangle_mesh({m.vertices[3], m.vertices[4], m.vertices[5]}, {{0, 1, 2}}), c);
    int overlap = 0;
    for (std::size_t i = 0; i < g.mask.size(); ++i) {
        if (far_only.mask[i] && near_only.mask[i]) {
            ++overlap;
            CHECK(g.tri[i] == 1);
            CHECK(g.depth[i] == doctest::Approx(0.5));
        } else if (far_only.mask[i]) {
            CHECK(g.tri[i] == 0);
            CHECK(g.depth[i] == doctest::Approx(0.9));
        }
    }
    CHECK(overlap > 50);
}

TEST_CASE("G-buffer invariants on a sphere")
{
    const SurfaceMesh m = sphere_mesh(0.5, 16);
    Camera c = front_camera();
    c.azimuth = 0.4;
    c.elevation = 0.3;
    const GBuffer g = rasterize(m, c);
    const CameraFrame fr(c);
    int covered = 0;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const std::size_t i = g.index(x, y);
            CHECK((g.mask[i] == 1) == (g.tri[i] >= 0));
            if (!g.mask[i]) continue;
            ++covered;
            const Vec3& b = g.bary[i];
            CHECK(std::abs(b.x + b.y + b.z - 1.0) < 1e-6);
            CHECK((b.x >= -1e-12 && b.y >= -1e-12 && b.z >= -1e-12));
            const Face& f = m.faces[g.tri[i]];
            const Vec3 p = m.vertices[f[0]] * b.x + m.vertices[f[1]] * b.y + m.vertices[f[2]] * b.z;
            CHECK(norm(p - g.position[i]) < 1e-9);
            // The hit lies on the pixel's ray at the stored depth.
            const Vec3 on_ray = fr.eye + fr.ray(x + 0.5, y + 0.5) * g.depth[i];
            CHECK(norm(on_ray - g.position[i]) < 1e-9);
        }
    CHECK(covered > 0);

    // Projected disc of a sphere of radius r seen from distance R has
    // angular radius asin(r/R); the coverage fraction follows from the focal length.
    const double ang = std::asin(0.5 / c.radius);
    const double rpx = focal_px(c) * std::tan(ang);
    const double disc = std::numbers::pi * rpx * rpx / (64.0 * 64.0);
    CHECK(std::abs(g.coverage() - disc) < 0.03);

    Camera c2 = c;
    c2.width = c2.height = 128;
    CHECK(std::abs(rasterize(m, c2).coverage() - g.coverage()) < 2.0 / 64);

    const GBuffer again = rasterize(m, c);
    CHECK(again.mask == g.mask);
    CHECK(again.tri == g.tri);
    CHECK(again.depth == g.depth);
}

TEST_CASE("shade_with_texture")
{
    const Camera c = front_camera(32);
    const GBuffer full = rasterize(triangle_mesh({{-5, -5, 0}, {5, -5, 0}, {0, 5, 0}}, {{0, 1, 2}}), c);
    const Image red = shade_with_texture(full, [](const Vec3&) { return Rgb{1, 0, 0}; });
    for (std::size_t i = 0; i < red.pixel_count(); ++i) {
        CHECK(red.data[3 * i] == 1.0);
        CHECK(red.data[3 * i + 1] == 0.0);
        CHECK(red.data[3 * i + 2] == 0.0);
    }
    const Image bg = shade_with_texture(rasterize(SurfaceMesh{}, c), [](const Vec3&) { return Rgb{1, 1, 1}; },
                                        Rgb{0.1, 0.2, 0.3});
    for (std::size_t i = 0; i < bg.pixel_count(); ++i) CHECK(bg.data[3 * i + 2] == 0.3);

    // Colour = (p + 1) / 2 against the ray/plane intersection computed directly.
    const Image pos = shade_with_texture(full, [](const Vec3& p) { return (p + Vec3(1, 1, 1)) * 0.5; });
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const Vec3 p = front_unproject(c, x + 0.5, y + 0.5);
            for (int k = 0; k < 3; ++k) CHECK(std::abs(pos.at(x, y, k) - (p[k] + 1) / 2) < 1e-9);
        }
}

TEST_CASE("antialias_silhouette examples")
{
    const Camera c = front_camera();
    // Square with edges on pixel boundaries: every centre is half a pixel away.
    auto square = [&](double u0, double u1, double v0, double v1) {
        return triangle_mesh({front_unproject(c, u0, v1), front_unproject(c, u1, v1), front_unproject(c, u1, v0),
                              front_unproject(c, u0, v0)},
                             {{0, 1, 2}, {0, 2, 3}});
    };
    const SurfaceMesh aligned = square(16, 48, 20, 40);
    const GBuffer ga = rasterize(aligned, c);
    const SoftMask sa = antialias_silhouette(ga, aligned, c);
    for (std::size_t i = 0; i < ga.mask.size(); ++i) CHECK(std::abs(sa.mask.data[i] - ga.mask[i]) < 1e-6);

    // Right edge through the centres of column 40.
    const SurfaceMesh half = square(16.2, 40.5, 20.3, 40.3);
    const GBuffer gh = rasterize(half, c);
    const SoftMask sh = antialias_silhouette(gh, half, c);
    for (int y = 22; y < 39; ++y) CHECK(std::abs(sh.mask.at(40, y) - 0.5) < 1e-6);
    for (int y = 22; y < 39; ++y) CHECK(sh.mask.at(30, y) == 1.0);

    // Moving one vertex of a slanted triangle: the soft area tracks the exact
    // projected area and the analytic gradient matches FD.
    const double px_world = c.radius / focal_px(c);
    const std::vector<std::array<double, 2>> corners{{13.37, 51.21}, {47.73, 42.19}, {22.91, 9.83}};
    SurfaceMesh tri;
    for (const auto& q : corners) tri.vertices.push_back(front_unproject(c, q[0], q[1]));
    tri.faces = {{0, 1, 2}};
    auto soft_sum = [&](std::size_t v, double shift_px) {
        SurfaceMesh m = tri;
        m.vertices[v].x += shift_px * px_world;
        return sum(antialias_silhouette(rasterize(m, c), m, c).mask);
    };
    Image ones(64, 64, 1, 1.0);
    const auto g = antialias_backward(antialias_silhouette(rasterize(tri, c), tri, c), tri, c, ones);
    for (std::size_t v = 0; v < 3; ++v) {
        Poly moved(corners.begin(), corners.end());
        moved[v][0] += 0.1;
        const double exact = poly_area(moved) - poly_area(Poly(corners.begin(), corners.end()));
        const double change = soft_sum(v, 0.1) - soft_sum(v, 0.0);
        // Bands are cut at the edge ends, so corner pixels make this approximate.
        CHECK(rel_err(change, exact) < 0.15);
        // Narrow step: a wide one lets corner pixels switch owning edge.
        const double fd = (soft_sum(v, 0.005) - soft_sum(v, -0.005)) / 0.01;
        CHECK(rel_err(g[v].x * px_world, fd) < 0.05);
    }

    // Moving an axis-aligned right edge by 0.1 px adds edge length x 0.1.
    const SurfaceMesh strip = square(10.3, 30.27, 12.4, 52.6);
    auto strip_sum = [&](double shift_px) {
        SurfaceMesh m = strip;
        for (std::size_t v : {1u, 2u}) m.vertices[v].x += shift_px * px_world;
        return sum(antialias_silhouette(rasterize(m, c), m, c).mask);
    };
    CHECK(rel_err(strip_sum(0.1) - strip_sum(0.0), 0.1 * (52.6 - 12.4)) < 0.05);

    Camera other = c;
    other.width = 32;
    CHECK_THROWS_AS(antialias_silhouette(ga, aligned, other), std::invalid_argument);
}

TEST_CASE("rasterize_backward")
{
    const Camera c = front_camera(32);
    SurfaceMesh m = triangle_mesh({{-0.31, -0.27, 0.05}, {0.33, -0.21, 0.0}, {0.02, 0.36, -0.04}}, {{0, 1, 2}});
    const GBuffer g = rasterize(m, c);
    GBufferGrad zero(g);
    for (const Vec3& v : rasterize_backward(g, m, c, zero)) CHECK(v == Vec3{});

    std::mt19937_64 rng(5);
    GBufferGrad up(g);
    for (std::size_t i = 0; i < up.position.size(); ++i) {
        up.position[i] = testsupport::uniform_vec3(-1, 1, rng);
        up.depth[i] = testsupport::uniform_vec(1, -1, 1, rng)[0];
    }
    auto loss = [&] {
        const GBuffer gg = rasterize(m, c);
        REQUIRE(gg.mask == g.mask);
        double s = 0.0;
        for (std::size_t i = 0; i < gg.mask.size(); ++i)
            if (gg.mask[i]) s += dot(up.position[i], gg.position[i]) + up.depth[i] * gg.depth[i];
        return s;
    };
    const auto grad = rasterize_backward(g, m, c, up);
    for (std::size_t v = 0; v < 3; ++v)
        for (int k = 0; k < 3; ++k) {
            double& x = k == 0 ? m.vertices[v].x : k == 1 ? m.vertices[v].y : m.vertices[v].z;
            CHECK(rel_err(grad[v][k], testsupport::central_diff(loss, x, 1e-7)) < 1e-4);
        }

    // Second triangle entirely outside the view receives nothing.
    SurfaceMesh two = m;
    two.vertices.insert(two.vertices.end(), {{5, 5, 0}, {6, 5, 0}, {5, 6, 0}});
    two.faces.push_back({3, 4, 5});
    const GBuffer g2 = rasterize(two, c);
    GBufferGrad up2(g2);
    up2.position = up.position;
    const auto grad2 = rasterize_backward(g2, two, c, up2);
    for (std::size_t v = 3; v < 6; ++v) CHECK(grad2[v] == Vec3{});
    Image ones(32, 32, 1, 1.0);
    const auto ag = antialias_backward(antialias_silhouette(g2, two, c), two, c, ones);
    for (std::size_t v = 3; v < 6; ++v) CHECK(ag[v] == Vec3{});

    CHECK_THROWS_AS(rasterize_backward(g, two, c, up), std::invalid_argument);
}
