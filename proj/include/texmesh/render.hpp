#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "texmesh/isosurface.hpp"

namespace texmesh {

/// Linear-light float image, interleaved channels, row 0 at the top.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill)
    {
    }
    double& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Pinhole camera on a sphere around the origin, looking at the origin
/// with +y up. Azimuth rotates about +y starting from +z.
struct Camera {
    double fov_y_deg = 49.13;
    double radius = 1.2;
    double azimuth = 0.0;
    double elevation = 0.0;
    int width = 64;
    int height = 64;

    void validate() const;
};

/// Camera basis and projection helpers.
struct CameraFrame {
    Vec3 eye, right, up, forward;
    double focal = 1.0; ///< pixels
    double cx = 0.0, cy = 0.0;

    explicit CameraFrame(const Camera& cam);

    /// Pixel coordinates (x right, y down) and view depth of a point.
    Vec3 project(const Vec3& p) const;
    /// d(px)/dp and d(py)/dp.
    void project_jacobian(const Vec3& p, Vec3& dpx, Vec3& dpy) const;
    /// Unnormalized ray direction through pixel coordinate (x, y), with
    /// dot(dir, forward) = 1 so the ray parameter equals view depth.
    Vec3 ray(double x, double y) const;
};

struct CameraDistribution {
    double azimuth_min = 0.0;
    double azimuth_max = 6.283185307179586;
    double elevation_min = 0.0;
    double elevation_max = 0.0;
    double fov_y_deg = 49.13;
    double radius = 1.2;
    int width = 64;
    int height = 64;
};

Camera sample_camera(const CameraDistribution& dist, std::mt19937_64& rng);

struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;
    std::vector<std::int32_t> tri; ///< -1 where uncovered
    std::vector<Vec3> bary;
    std::vector<double> depth;
    std::vector<Vec3> position;
    std::size_t mesh_vertex_count = 0;
    std::size_t mesh_face_count = 0;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    double coverage() const;
};

GBuffer rasterize(const SurfaceMesh& mesh, const Camera& cam);

using TextureQuery = std::function<Rgb(const Vec3&)>;

Image shade_with_texture(const GBuffer& gbuf, const TextureQuery& texture, const Rgb& background = {});

/// One pixel's soft value driven by a silhouette edge.
struct SilhouetteSample {
    std::uint32_t pixel;
    std::uint32_t a, b; ///< mesh vertex indices of the edge
    double side;        ///< +1 or -1: orientation of the inside normal
};

struct SoftMask {
    Image mask; ///< single channel
    std::vector<SilhouetteSample> samples;
};

/// Pixels whose centre lies within half a pixel of a projected silhouette
/// edge get coverage 0.5 + signed distance (inside positive); all others
/// keep their hard value.
SoftMask antialias_silhouette(const GBuffer& gbuf, const SurfaceMesh& mesh, const Camera& cam);

std::vector<Vec3> antialias_backward(const SoftMask& soft, const SurfaceMesh& mesh, const Camera& cam,
                                     const Image& d_mask);

/// Upstream gradients per pixel on the G-buffer's continuous outputs.
struct GBufferGrad {
    std::vector<Vec3> position;
    std::vector<double> depth;

    explicit GBufferGrad(const GBuffer& g) : position(g.mask.size()), depth(g.mask.size(), 0.0) {}
};

/// Gradients on mesh vertex positions from covered pixels. Each pixel's
/// surface point is the ray/triangle intersection; the Jacobian includes the
/// dependence of the hit point on all three triangle vertices.
std::vector<Vec3> rasterize_backward(const GBuffer& gbuf, const SurfaceMesh& mesh, const Camera& cam,
                                     const GBufferGrad& upstream);

} // namespace texmesh
