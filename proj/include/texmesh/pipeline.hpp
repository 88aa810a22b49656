#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "texmesh/fields.hpp"
#include "texmesh/io.hpp"
#include "texmesh/losses.hpp"
#include "texmesh/optim.hpp"
#include "texmesh/render.hpp"

namespace texmesh {

// ---------------------------------------------------------------- analytic scenes

/// Closed-form shape used to render targets and score reconstructions.
struct AnalyticShape {
    std::function<double(const Vec3&)> sdf;
    TextureQuery color;
};

AnalyticShape sphere_shape(double radius);
/// Torus around the y axis.
AnalyticShape torus_shape(double major, double minor);
/// Same geometry, constant colour.
AnalyticShape with_color(AnalyticShape shape, const Rgb& color);

/// Grid SDF sampled from `sdf`, no deformation.
GeometryField sample_field(const TetGrid& grid, const std::function<double(const Vec3&)>& sdf);

/// Marching tetrahedra of an analytic SDF on a regular grid.
SurfaceMesh extract_analytic(const std::function<double(const Vec3&)>& sdf, int res);

/// `n` cameras on a Fibonacci sphere.
std::vector<Camera> fibonacci_cameras(int n, double radius, int size, double fov_y_deg = 49.13);

/// Even-odd inside test against a closed triangle mesh, evaluated on the
/// centres of a res^3 voxel grid over [-1,1]^3. Index is (z*res + y)*res + x.
std::vector<std::uint8_t> voxelize_mesh(const SurfaceMesh& mesh, int res);
std::vector<std::uint8_t> voxelize_sdf(const std::function<double(const Vec3&)>& sdf, int res);
double voxel_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

// ---------------------------------------------------------------- rendering chain

/// One rendered view: G-buffer, antialiased silhouette, and colour image
/// with a black background.
struct RenderedView {
    GBuffer gbuf;
    SoftMask soft;
    Image rgb;
};

RenderedView render_view(const SurfaceMesh& mesh, const Camera& cam, const TriPlane& tp, const ModFCStackEval& decoder);

/// Pushes image-space gradients back to mesh vertices (accumulated into
/// `d_vertices`) and to the texture field.
void render_view_backward(const RenderedView& view, const SurfaceMesh& mesh, const Camera& cam, const TriPlane& tp,
                          ModFCStackEval& decoder, const Image& d_rgb, const Image& d_mask,
                          std::vector<Vec3>& d_vertices, TriPlane& d_tp, ModFCStack& d_decoder);

// ---------------------------------------------------------------- shape fitting

struct FitTarget {
    Camera camera;
    Image rgb;  ///< 3 channels
    Image mask; ///< 1 channel, values in [0,1]
};

std::vector<FitTarget> render_targets(const AnalyticShape& shape, const std::vector<Camera>& cameras,
                                      int mesh_res = 96);

struct FitConfig {
    int views = 16;
    int image_size = 64;
    int steps = 400;
    AdamConfig adam{0.002, 0.9, 0.999, 1e-8};
    double mask_weight = 1.0;
    double rgb_weight = 1.0;
    double reg_weight = 0.01;
    int tet_res = 24;
    int triplane_res = 32;
    int triplane_channels = 8;
    int decoder_hidden = 16;
    int latent_dim = 8;
    std::string init = "sphere"; ///< "sphere" or "visual_hull"
    double init_radius = 0.6;
    bool freeze_geometry = false;
    bool freeze_texture = false;
    unsigned long long seed = 0;

    void validate() const;
};

/// Optimized quantities. The field is tanh(raw_sdf) and
/// deform_bound * tanh(raw_deform).
struct FitState {
    TetGrid grid;
    std::vector<double> raw_sdf;
    std::vector<double> raw_deform; ///< 3 per vertex
    double deform_bound = 0.0;
    TriPlane triplane;
    ModFCStack decoder;
    LatentCode latent;

    GeometryField field() const;
    /// Parameter tensors in a fixed order: sdf, deform, tri-plane planes,
    /// then each decoder layer's tensors.
    std::vector<std::vector<double>*> tensors();
    FitState zeros_like() const;
};

FitState init_fit_state(const FitConfig& cfg, const std::vector<FitTarget>& targets);

struct FitTerms {
    double mask = 0.0;
    double rgb = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

/// Total fitting loss averaged over views; fills `grad` (same layout as
/// `state`) when non-null.
FitTerms fit_objective(const FitState& state, const std::vector<FitTarget>& targets, const FitConfig& cfg,
                       FitState* grad);

struct FitResult {
    FitState state;
    std::vector<FitTerms> history; ///< loss before each step
};

FitResult fit_shape(const std::vector<FitTarget>& targets, const FitConfig& cfg);
FitResult fit_shape(const std::vector<FitTarget>& targets, const FitConfig& cfg, FitState init);

SurfaceMesh fit_mesh(const FitState& state);
std::vector<Rgb> fit_vertex_colors(const FitState& state, const SurfaceMesh& mesh);
std::vector<TraceRow> fit_trace(const FitResult& r);

TensorBundle fit_checkpoint(const FitState& state);
FitState fit_state_from_checkpoint(const TensorBundle& bundle);

// ---------------------------------------------------------------- toy GAN

struct ToyGANConfig {
    int latent_dim = 8;
    int w_dim = 8;
    int batch = 4;
    int steps = 200;
    int image_size = 32;
    int tet_res = 8;
    int geo_hidden = 32;
    int triplane_res = 16;
    int triplane_channels = 4;
    int decoder_hidden = 16;
    int disc_pool = 4;
    int disc_hidden = 32;
    double r1_weight = 10.0;
    int r1_interval = 16;
    double reg_weight = 1.0; ///< on the per-flip-edge mean of L_reg
    AdamConfig adam{0.002, 0.9, 0.999, 1e-8};
    double prior_sharpness = 4.0; ///< slope of the sphere prior added to the SDF logit
    double field_scale = 0.5;     ///< scale of the net's SDF output before the tanh
    double radius_min = 0.3;
    double radius_max = 0.6;
    CameraDistribution cameras{0.0, 6.283185307179586, -0.5, 0.5, 49.13, 1.6, 32, 32};
    unsigned long long seed = 0;

    void validate() const;
};

/// Average pool, linear, leaky ReLU, linear to one logit.
struct Discriminator {
    int width = 0, height = 0, channels = 0, pool = 1, hidden = 0;
    std::vector<double> w1, b1, w2, b2; ///< b2 has one element

    static Discriminator random(int width, int height, int channels, int pool, int hidden, std::mt19937_64& rng);
    int features() const { return (width / pool) * (height / pool) * channels; }

    double forward(const Image& x) const;
    /// Accumulates parameter gradients scaled by `d_logit` into `grad`
    /// and returns d logit / d image scaled by `d_logit`.
    Image backward(const Image& x, double d_logit, Discriminator& grad) const;
    /// |d logit / d image|^2 and, when `grad` is non-null, the gradient of
    /// that penalty scaled by `scale`.
    double r1(const Image& x, Discriminator* grad, double scale) const;

    Discriminator zeros_like() const;
    std::vector<std::vector<double>*> tensors();
};

struct ToyGenerator {
    std::vector<FCLayer> map_geo, map_tex;
    ModFCStack geo_net;
    TriPlane triplane;
    ModFCStack decoder;
    TetGrid grid;
    double prior_radius = 0.45;
    double prior_sharpness = 4.0;
    double field_scale = 0.5;

    std::vector<std::vector<double>*> tensors();
    ToyGenerator zeros_like() const;
};

ToyGenerator make_toy_generator(const ToyGANConfig& cfg, std::mt19937_64& rng);

/// Geometry for a latent `w_geo`: the net's first output is added to a
/// sphere prior before the tanh.
GeometryField generator_field(const ToyGenerator& gen, std::span<const double> w_geo);
SurfaceMesh generate_mesh(const ToyGenerator& gen, std::span<const double> z);

struct GANStep {
    int step = 0;
    double d_rgb = 0.0, d_mask = 0.0;
    double g_rgb = 0.0, g_mask = 0.0;
    double reg = 0.0;
    double r1_rgb = 0.0, r1_mask = 0.0; ///< 0 on steps without the penalty
    bool r1_applied = false;
};

struct ToyGANResult {
    ToyGenerator generator;
    Discriminator d_rgb, d_mask;
    std::vector<GANStep> history;
};

ToyGANResult toy_gan_train(const ToyGANConfig& cfg);
std::vector<TraceRow> gan_trace(const ToyGANResult& r);

// ---------------------------------------------------------------- latents

LatentCode interpolate_latents(std::span<const double> a, std::span<const double> b, double t);
LatentCode perturb_latent(std::span<const double> w, double scale, std::mt19937_64& rng);

} // namespace texmesh
