#include "texmesh/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

#include "texmesh/simd/kernels.hpp"

namespace texmesh {

namespace {

constexpr double kNearPlane = 1e-3;

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

std::uint64_t undirected_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct RayHit {
    double t, b1, b2;
    bool ok;
};

// Solves o + t d = v0 + b1 (v1 - v0) + b2 (v2 - v0).
RayHit intersect(const Vec3& o, const Vec3& d, const Vec3& v0, const Vec3& v1, const Vec3& v2)
{
    const Vec3 e1 = v1 - v0, e2 = v2 - v0;
    const Vec3 pvec = cross(d, e2);
    const double det = dot(e1, pvec);
    if (std::abs(det) < 1e-300) return {0, 0, 0, false};
    const double inv = 1.0 / det;
    const Vec3 tvec = o - v0;
    const double b1 = dot(tvec, pvec) * inv;
    const Vec3 qvec = cross(tvec, e1);
    const double b2 = dot(d, qvec) * inv;
    const double t = dot(e2, qvec) * inv;
    return {t, b1, b2, true};
}

} // namespace

void Camera::validate() const
{
    if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0)) throw std::invalid_argument("camera fov must be in (0, 180)");
    if (!(radius > 0.0)) throw std::invalid_argument("camera radius must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("camera image size must be positive");
}

CameraFrame::CameraFrame(const Camera& cam)
{
    cam.validate();
    const double ce = std::cos(cam.elevation);
    eye = Vec3(ce * std::sin(cam.azimuth), std::sin(cam.elevation), ce * std::cos(cam.azimuth)) * cam.radius;
    forward = normalized(-eye);
    Vec3 r = cross(forward, Vec3(0, 1, 0));
    if (norm(r) < 1e-9) r = cross(forward, Vec3(0, 0, cam.elevation > 0 ? -1.0 : 1.0));
    right = normalized(r);
    up = cross(right, forward);
    focal = 0.5 * cam.height / std::tan(0.5 * cam.fov_y_deg * std::numbers::pi / 180.0);
    cx = 0.5 * cam.width;
    cy = 0.5 * cam.height;
}

Vec3 CameraFrame::project(const Vec3& p) const
{
    const Vec3 v = p - eye;
    const double z = dot(v, forward);
    return {cx + focal * dot(v, right) / z, cy - focal * dot(v, up) / z, z};
}

void CameraFrame::project_jacobian(const Vec3& p, Vec3& dpx, Vec3& dpy) const
{
    const Vec3 v = p - eye;
    const double z = dot(v, forward), xc = dot(v, right), yc = dot(v, up);
    dpx = (right / z - forward * (xc / (z * z))) * focal;
    dpy = (up / z - forward * (yc / (z * z))) * (-focal);
}

Vec3 CameraFrame::ray(double x, double y) const
{
    return forward + right * ((x - cx) / focal) - up * ((y - cy) / focal);
}

Camera sample_camera(const CameraDistribution& dist, std::mt19937_64& rng)
{
    if (dist.azimuth_max < dist.azimuth_min || dist.elevation_max < dist.elevation_min)
        throw std::invalid_argument("camera distribution ranges are empty");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Camera c;
    c.fov_y_deg = dist.fov_y_deg;
    c.radius = dist.radius;
    c.width = dist.width;
    c.height = dist.height;
    const double ua = u(rng), ue = u(rng);
    c.azimuth = dist.azimuth_min + (dist.azimuth_max - dist.azimuth_min) * ua;
    c.elevation = dist.elevation_min + (dist.elevation_max - dist.elevation_min) * ue;
    return c;
}

double GBuffer::coverage() const
{
    if (mask.empty()) return 0.0;
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return static_cast<double>(n) / static_cast<double>(mask.size());
}

GBuffer rasterize(const SurfaceMesh& mesh, const Camera& cam)
{
    const CameraFrame frame(cam);
    const int W = cam.width, H = cam.height;
    GBuffer g;
    g.width = W;
    g.height = H;
    const std::size_t n = static_cast<std::size_t>(W) * H;
    g.mask.assign(n, 0);
    g.tri.assign(n, -1);
    g.bary.assign(n, Vec3{});
    g.depth.assign(n, std::numeric_limits<double>::infinity());
    g.position.assign(n, Vec3{});
    g.mesh_vertex_count = mesh.vertices.size();
    g.mesh_face_count = mesh.faces.size();

    std::vector<Vec3> proj(mesh.vertices.size());
    for (std::size_t v = 0; v < proj.size(); ++v) proj[v] = frame.project(mesh.vertices[v]);

    const auto& k = simd::kernels();
    std::vector<std::uint8_t> row(W);

    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& face = mesh.faces[f];
        const Vec3 &p0 = proj[face[0]], &p1 = proj[face[1]], &p2 = proj[face[2]];
        if (p0.z < kNearPlane || p1.z < kNearPlane || p2.z < kNearPlane) continue;

        simd::EdgeFunctions ef{};
        const Vec3* pts[3] = {&p0, &p1, &p2};
        for (int e = 0; e < 3; ++e) {
            const Vec3& a = *pts[e];
            const Vec3& b = *pts[(e + 1) % 3];
            ef.a[e] = -(b.y - a.y);
            ef.b[e] = b.x - a.x;
            ef.c[e] = (b.y - a.y) * a.x - (b.x - a.x) * a.y;
        }
        const double area = cross2(p1.x - p0.x, p1.y - p0.y, p2.x - p0.x, p2.y - p0.y);
        if (area == 0.0 || !std::isfinite(area)) continue;
        if (area < 0.0)
            for (int e = 0; e < 3; ++e) {
                ef.a[e] = -ef.a[e];
                ef.b[e] = -ef.b[e];
                ef.c[e] = -ef.c[e];
            }

        const double minx = std::min({p0.x, p1.x, p2.x}), maxx = std::max({p0.x, p1.x, p2.x});
        const double miny = std::min({p0.y, p1.y, p2.y}), maxy = std::max({p0.y, p1.y, p2.y});
        const int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
        const int x1 = std::min(W - 1, static_cast<int>(std::floor(maxx - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
        const int y1 = std::min(H - 1, static_cast<int>(std::floor(maxy - 0.5)));
        if (x0 > x1 || y0 > y1) continue;

        const Vec3 &v0 = mesh.vertices[face[0]], &v1 = mesh.vertices[face[1]], &v2 = mesh.vertices[face[2]];
        for (int y = y0; y <= y1; ++y) {
            k.edge_coverage_row(ef, y + 0.5, x0, x1 + 1, row.data());
            for (int x = x0; x <= x1; ++x) {
                if (!row[x - x0]) continue;
                const Vec3 dir = frame.ray(x + 0.5, y + 0.5);
                const RayHit hit = intersect(frame.eye, dir, v0, v1, v2);
                if (!hit.ok || hit.t < kNearPlane) continue;
                const std::size_t i = g.index(x, y);
                if (!(hit.t < g.depth[i])) continue;
                Vec3 b(1.0 - hit.b1 - hit.b2, hit.b1, hit.b2);
                b = Vec3(std::max(b.x, 0.0), std::max(b.y, 0.0), std::max(b.z, 0.0));
                b = b / (b.x + b.y + b.z);
                g.mask[i] = 1;
                g.tri[i] = static_cast<std::int32_t>(f);
                g.bary[i] = b;
                g.depth[i] = hit.t;
                g.position[i] = v0 * b.x + v1 * b.y + v2 * b.z;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!g.mask[i]) g.depth[i] = 0.0;
    return g;
}

Image shade_with_texture(const GBuffer& gbuf, const TextureQuery& texture, const Rgb& background)
{
    Image img(gbuf.width, gbuf.height, 3);
    for (std::size_t i = 0; i < gbuf.mask.size(); ++i) {
        const Rgb c = gbuf.mask[i] ? texture(gbuf.position[i]) : background;
        for (int k = 0; k < 3; ++k) img.data[i * 3 + k] = c[k];
    }
    return img;
}

namespace {

void check_provenance(const GBuffer& gbuf, const SurfaceMesh& mesh, const Camera& cam)
{
    if (gbuf.mesh_vertex_count != mesh.vertices.size() || gbuf.mesh_face_count != mesh.faces.size() ||
        gbuf.width != cam.width || gbuf.height != cam.height)
        throw std::invalid_argument("G-buffer was not rasterized from this mesh and camera");
}

struct EdgeInfo {
    std::uint32_t a, b;
    int faces = 0;
    std::uint32_t opposite[2] = {0, 0};
    std::uint32_t face[2] = {0, 0};
};

} // namespace

SoftMask antialias_silhouette(const GBuffer& gbuf, const SurfaceMesh& mesh, const Camera& cam)
{
    check_provenance(gbuf, mesh, cam);
    const CameraFrame frame(cam);
    const int W = gbuf.width, H = gbuf.height;

    SoftMask out;
    out.mask = Image(W, H, 1);
    for (std::size_t i = 0; i < gbuf.mask.size(); ++i) out.mask.data[i] = gbuf.mask[i];
    std::vector<std::int32_t> owner(gbuf.mask.size(), -1);

    std::vector<Vec3> proj(mesh.vertices.size());
    for (std::size_t v = 0; v < proj.size(); ++v) proj[v] = frame.project(mesh.vertices[v]);

    std::unordered_map<std::uint64_t, EdgeInfo> edges;
    edges.reserve(mesh.faces.size() * 2);
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& face = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            const std::uint32_t a = face[k], b = face[(k + 1) % 3], c = face[(k + 2) % 3];
            auto& e = edges[undirected_key(a, b)];
            if (e.faces == 0) {
                e.a = std::min(a, b);
                e.b = std::max(a, b);
            }
            if (e.faces < 2) {
                e.opposite[e.faces] = c;
                e.face[e.faces] = f;
            }
            ++e.faces;
        }
    }

    // Deterministic edge order.
    std::vector<const EdgeInfo*> order;
    order.reserve(edges.size());
    for (const auto& kv : edges) order.push_back(&kv.second);
    std::sort(order.begin(), order.end(),
              [](const EdgeInfo* l, const EdgeInfo* r) { return std::tie(l->a, l->b) < std::tie(r->a, r->b); });

    auto shares_vertex = [&](std::int32_t tri, std::uint32_t a, std::uint32_t b) {
        if (tri < 0) return false;
        const Face& f = mesh.faces[tri];
        return f[0] == a || f[1] == a || f[2] == a || f[0] == b || f[1] == b || f[2] == b;
    };

    // A covered pixel is only on the boundary when the pixel one step across
    // the edge (outward) is background; folds inside the silhouette stay 1.
    auto covered_across = [&](double px, double py) {
        const int cx = static_cast<int>(std::floor(px)), cy = static_cast<int>(std::floor(py));
        if (cx < 0 || cy < 0 || cx >= W || cy >= H) return false;
        return gbuf.mask[gbuf.index(cx, cy)] != 0;
    };

    for (const EdgeInfo* e : order) {
        if (e->faces > 2) continue;
        const Vec3 &A = proj[e->a], &B = proj[e->b];
        if (A.z < kNearPlane || B.z < kNearPlane) continue;
        const double ex = B.x - A.x, ey = B.y - A.y;
        const double len2 = ex * ex + ey * ey;
        if (len2 < 1e-18) continue;
        double side = 0.0;
        bool silhouette = false;
        const Vec3& C0 = proj[e->opposite[0]];
        const double s0 = cross2(ex, ey, C0.x - A.x, C0.y - A.y);
        if (e->faces == 1) {
            silhouette = s0 != 0.0;
            side = s0 > 0.0 ? 1.0 : -1.0;
        } else {
            const Vec3& C1 = proj[e->opposite[1]];
            const double s1 = cross2(ex, ey, C1.x - A.x, C1.y - A.y);
            silhouette = (s0 > 0.0 && s1 > 0.0) || (s0 < 0.0 && s1 < 0.0);
            side = s0 > 0.0 ? 1.0 : -1.0;
        }
        if (!silhouette) continue;

        const double len = std::sqrt(len2);
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(A.x, B.x) - 1.0)));
        const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max(A.x, B.x) + 1.0)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(A.y, B.y) - 1.0)));
        const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max(A.y, B.y) + 1.0)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double qx = x + 0.5 - A.x, qy = y + 0.5 - A.y;
                const double s = (qx * ex + qy * ey) / len2;
                if (s < 0.0 || s > 1.0) continue;
                const double d = side * cross2(ex, ey, qx, qy) / len;
                if (std::abs(d) >= 0.5) continue;
                const std::size_t i = gbuf.index(x, y);
                const double val = 0.5 + d;
                bool take = false;
                if (!gbuf.mask[i]) {
                    take = d < 0.0 && val > out.mask.data[i];
                } else {
                    take = d >= 0.0 && val < out.mask.data[i] && shares_vertex(gbuf.tri[i], e->a, e->b) &&
                           !covered_across(x + 0.5 + side * ey / len, y + 0.5 - side * ex / len);
                }
                if (!take) continue;
                out.mask.data[i] = val;
                const SilhouetteSample smp{static_cast<std::uint32_t>(i), e->a, e->b, side};
                if (owner[i] < 0) {
                    owner[i] = static_cast<std::int32_t>(out.samples.size());
                    out.samples.push_back(smp);
                } else {
                    out.samples[owner[i]] = smp;
                }
            }
        }
    }
    return out;
}

std::vector<Vec3> antialias_backward(const SoftMask& soft, const SurfaceMesh& mesh, const Camera& cam,
                                     const Image& d_mask)
{
    if (d_mask.width != soft.mask.width || d_mask.height != soft.mask.height || d_mask.channels != 1)
        throw std::invalid_argument("soft-mask gradient has wrong shape");
    const CameraFrame frame(cam);
    std::vector<Vec3> grad(mesh.vertices.size());
    const int W = soft.mask.width;
    for (const auto& smp : soft.samples) {
        const double up = d_mask.data[smp.pixel];
        if (up == 0.0) continue;
        const Vec3 A = frame.project(mesh.vertices[smp.a]);
        const Vec3 B = frame.project(mesh.vertices[smp.b]);
        const double px = static_cast<double>(smp.pixel % W) + 0.5, py = static_cast<double>(smp.pixel / W) + 0.5;
        const double ex = B.x - A.x, ey = B.y - A.y, qx = px - A.x, qy = py - A.y;
        const double len = std::sqrt(ex * ex + ey * ey);
        const double cr = ex * qy - ey * qx;
        // d = side * cr / len
        const double dcr_dax = ey - qy, dcr_day = qx - ex, dcr_dbx = qy, dcr_dby = -qx;
        const double g = up * smp.side;
        const double inv = 1.0 / len, crl3 = cr / (len * len * len);
        const double dax = g * (dcr_dax * inv + crl3 * ex);
        const double day = g * (dcr_day * inv + crl3 * ey);
        const double dbx = g * (dcr_dbx * inv - crl3 * ex);
        const double dby = g * (dcr_dby * inv - crl3 * ey);
        Vec3 jx, jy;
        frame.project_jacobian(mesh.vertices[smp.a], jx, jy);
        grad[smp.a] += jx * dax + jy * day;
        frame.project_jacobian(mesh.vertices[smp.b], jx, jy);
        grad[smp.b] += jx * dbx + jy * dby;
    }
    return grad;
}

std::vector<Vec3> rasterize_backward(const GBuffer& gbuf, const SurfaceMesh& mesh, const Camera& cam,
                                     const GBufferGrad& upstream)
{
    check_provenance(gbuf, mesh, cam);
    if (upstream.position.size() != gbuf.mask.size() || upstream.depth.size() != gbuf.mask.size())
        throw std::invalid_argument("G-buffer gradient has wrong size");
    const CameraFrame frame(cam);
    std::vector<Vec3> grad(mesh.vertices.size());
    for (int y = 0; y < gbuf.height; ++y) {
        for (int x = 0; x < gbuf.width; ++x) {
            const std::size_t i = gbuf.index(x, y);
            if (!gbuf.mask[i]) continue;
            const Vec3 dir = frame.ray(x + 0.5, y + 0.5);
            const double gt = dot(upstream.position[i], dir) + upstream.depth[i];
            if (gt == 0.0) continue;
            const Face& f = mesh.faces[gbuf.tri[i]];
            const Vec3 &v0 = mesh.vertices[f[0]], &v1 = mesh.vertices[f[1]], &v2 = mesh.vertices[f[2]];
            const Vec3 n = cross(v1 - v0, v2 - v0);
            const double dn = dot(dir, n);
            if (dn == 0.0) continue;
            // t = n.(v0 - eye) / n.dir; dt/dv_k = b_k n / (n.dir) for a fixed ray.
            const Vec3 base = n * (gt / dn);
            const Vec3& b = gbuf.bary[i];
            grad[f[0]] += base * b.x;
            grad[f[1]] += base * b.y;
            grad[f[2]] += base * b.z;
        }
    }
    return grad;
}

} // namespace texmesh
