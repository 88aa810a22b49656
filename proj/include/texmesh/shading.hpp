#pragma once

#include <span>
#include <vector>

#include "texmesh/render.hpp"

namespace texmesh {

/// a * exp(sharpness * (axis . d - 1)), amplitude per RGB channel.
struct SGLobe {
    Vec3 axis{0, 0, 1};
    double sharpness = 1.0;
    Rgb amplitude{1, 1, 1};
};

struct Reflectance {
    Rgb base_color{1, 1, 1};
    double roughness = 0.5;
    double metallic = 0.0;
};

/// Equirectangular radiance map. Row 0 is the +y pole (theta = 0), column
/// u maps to phi = 2 pi (u + 0.5) / W with direction
/// (sin theta sin phi, cos theta, sin theta cos phi).
struct EnvironmentMap {
    Image radiance; ///< 3 channels, linear, nonnegative

    Vec3 direction(int x, int y) const;
    /// Solid angle of a pixel: sin(theta) dtheta dphi.
    double solid_angle(int y) const;
};

/// Single-SG stand-in for the clamped cosine max(n.w, 0). The amplitude is
/// set so the lobe integrates to pi over the sphere.
inline constexpr double kCosineLobeSharpness = 2.133;
double cosine_lobe_amplitude();

/// Specular lobes narrower than this roughness are clamped.
inline constexpr double kMinRoughness = 0.08;

Rgb sg_eval(const SGLobe& lobe, const Vec3& dir);
Rgb sg_integral(const SGLobe& lobe);
SGLobe sg_product(const SGLobe& a, const SGLobe& b);

/// Outgoing radiance at one surface point toward `view` (unit, pointing
/// from the surface to the eye).
Rgb shade_point(const Vec3& normal, const Vec3& view, const Reflectance& mat, std::span<const SGLobe> light);

struct ShadingInputs {
    const GBuffer* gbuf = nullptr;
    std::vector<Reflectance> reflectance; ///< per pixel
    std::vector<Vec3> normal;             ///< per pixel, unit length on covered pixels
};

Image shade_sg(const ShadingInputs& in, std::span<const SGLobe> light, const Camera& cam);

/// Area-weighted vertex normals; isolated vertices get +z.
std::vector<Vec3> mesh_normals(const SurfaceMesh& mesh);

/// Interpolated, renormalized vertex normals on covered pixels.
std::vector<Vec3> gbuffer_normals(const GBuffer& gbuf, const SurfaceMesh& mesh, std::span<const Vec3> vertex_normals);

struct SGFitOptions {
    int lobes = 32;
    int steps = 7000;
    double step_size = 0.01;
    unsigned long long seed = 0;
};

struct SGFitResult {
    std::vector<SGLobe> lobes;
    double loss = 0.0;
    std::vector<double> loss_trace; ///< accepted loss after each step
};

/// Solid-angle-weighted MSE between an SG mixture and the map.
double sg_environment_loss(const EnvironmentMap& env, std::span<const SGLobe> lobes);

SGFitResult fit_sg_environment(const EnvironmentMap& env, const SGFitOptions& opts);

} // namespace texmesh
