#pragma once

#include <array>
#include <random>
#include <span>
#include <vector>

#include "texmesh/tetgrid.hpp"

namespace texmesh {

using LatentCode = std::vector<double>;

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kDemodEps = 1e-8;

/// Three axis-aligned feature planes (xy, xz, yz), each `resolution` x
/// `resolution` nodes with `channels` features. Node (0,0) sits at (-1,-1)
/// and node (N-1,N-1) at (1,1). Storage is [row][col][channel], row
/// indexing the second axis of the plane.
struct TriPlane {
    int resolution = 0;
    int channels = 0;
    std::array<std::vector<double>, 3> planes;

    static TriPlane zeros(int resolution, int channels);
    static TriPlane random(int resolution, int channels, double scale, std::mt19937_64& rng);
    TriPlane zeros_like() const { return zeros(resolution, channels); }
    std::vector<std::vector<double>*> tensors() { return {&planes[0], &planes[1], &planes[2]}; }
    double& at(int plane, int row, int col, int c)
    {
        return planes[plane][(static_cast<std::size_t>(row) * resolution + col) * channels + c];
    }
};

std::vector<double> sample_triplane(const TriPlane& tp, const Vec3& p);

/// Accumulates d(feature)/d(planes) into `d_tp` and returns d(feature)/dp.
Vec3 sample_triplane_backward(const TriPlane& tp, const Vec3& p, std::span<const double> d_feature, TriPlane& d_tp);

std::array<double, 6> positional_encoding(const Vec3& p);
Vec3 positional_encoding_backward(const Vec3& p, std::span<const double> d_pe);

/// Fully connected layer whose weights are modulated by a per-input style
/// and demodulated so every output row has unit norm. The style is an
/// affine map of the latent code.
struct ModFCLayer {
    int in_dim = 0;
    int out_dim = 0;
    int style_dim = 0;
    bool activation = true; ///< leaky ReLU (slope 0.2) when set
    std::vector<double> weight;        // out x in
    std::vector<double> bias;          // out
    std::vector<double> affine_weight; // in x style
    std::vector<double> affine_bias;   // in

    static ModFCLayer create(int in, int out, int style, bool activation);
    static ModFCLayer random(int in, int out, int style, bool activation, std::mt19937_64& rng);
    ModFCLayer zeros_like() const;
    std::vector<std::vector<double>*> tensors() { return {&weight, &bias, &affine_weight, &affine_bias}; }
};

/// Demodulated weights for one fixed latent code.
struct ModulatedWeights {
    std::vector<double> style;    // in
    std::vector<double> row_norm; // out
    std::vector<double> weight;   // out x in, rows of unit norm
};

ModulatedWeights modulate(const ModFCLayer& layer, std::span<const double> w);

/// Applies modulated weights to `x`. `pre` receives the pre-activation if non-null.
std::vector<double> modfc_apply(const ModFCLayer& layer, const ModulatedWeights& mod, std::span<const double> x,
                                std::vector<double>* pre = nullptr);

std::vector<double> modfc_forward(const ModFCLayer& layer, std::span<const double> x, std::span<const double> w);

/// Per-point backward through modfc_apply. Accumulates the gradient of the
/// demodulated weights into `d_weight` (out x in) and of the bias into
/// `grad.bias`; writes d/dx into `dx`.
void modfc_apply_backward(const ModFCLayer& layer, const ModulatedWeights& mod, std::span<const double> x,
                          std::span<const double> pre, std::span<const double> dy, std::span<double> d_weight,
                          ModFCLayer& grad, std::span<double> dx);

/// Backward through modulation/demodulation, given the accumulated gradient of
/// the demodulated weights. Accumulates into `grad` and `dw`.
void modulate_backward(const ModFCLayer& layer, const ModulatedWeights& mod, std::span<const double> w,
                       std::span<const double> d_weight, ModFCLayer& grad, std::span<double> dw);

/// Stack of ModFC layers sharing one conditioning latent.
using ModFCStack = std::vector<ModFCLayer>;

ModFCStack make_modfc_stack(std::span<const int> dims, int style_dim, std::mt19937_64& rng);
ModFCStack zeros_like(const ModFCStack& stack);

/// Modulated stack plus the gradient buffers of its demodulated weights.
/// Per-point evaluations accumulate into `d_weight`; `finish` pushes the
/// totals back through modulation.
class ModFCStackEval {
public:
    ModFCStackEval(const ModFCStack& stack, std::span<const double> w);

    std::vector<double> forward(std::span<const double> x, std::vector<std::vector<double>>* acts = nullptr) const;

    /// `acts` comes from forward on the same point. Returns d/dx.
    std::vector<double> backward(const std::vector<std::vector<double>>& acts, std::span<const double> dy,
                                 ModFCStack& grad);

    void finish(ModFCStack& grad, std::span<double> dw) const;

    const ModFCStack& stack() const { return *stack_; }

private:
    const ModFCStack* stack_;
    std::vector<double> w_;
    std::vector<ModulatedWeights> mods_;
    std::vector<std::vector<double>> d_weight_;
};

/// Plain fully connected layer with leaky ReLU, used by the mapping network.
struct FCLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> weight; // out x in
    std::vector<double> bias;

    static FCLayer random(int in, int out, std::mt19937_64& rng);
    FCLayer zeros_like() const;
    std::vector<std::vector<double>*> tensors() { return {&weight, &bias}; }
};

LatentCode mapping_network(std::span<const double> z, std::span<const FCLayer> layers,
                           std::vector<std::vector<double>>* acts = nullptr);

/// Returns d/dz and accumulates layer gradients. `acts` from mapping_network.
std::vector<double> mapping_network_backward(std::span<const FCLayer> layers,
                                             const std::vector<std::vector<double>>& acts,
                                             std::span<const double> dy, std::span<FCLayer> grad);

/// Colour decoder query: tri-plane features (optionally concatenated with
/// the positional encoding when the first layer expects C + 6 inputs)
/// through the decoder, then a sigmoid. `eval` must be built from w_geo ⊕ w_tex.
Rgb texture_color(const Vec3& p, const TriPlane& tp, const ModFCStackEval& eval);
Rgb texture_color(const Vec3& p, const TriPlane& tp, const ModFCStack& decoder, std::span<const double> w_geo,
                  std::span<const double> w_tex);

/// Backward of texture_color for one point. Returns d/dp.
Vec3 texture_color_backward(const Vec3& p, const TriPlane& tp, ModFCStackEval& eval, const Rgb& d_rgb,
                            TriPlane& d_tp, ModFCStack& d_decoder);

LatentCode concat(std::span<const double> a, std::span<const double> b);

/// Per-vertex PE -> decoder(w) -> tanh. Channel 0 is the SDF, channels
/// 1..3 the deformation scaled by 1/grid.resolution.
GeometryField toy_geometry_field(const TetGrid& grid, std::span<const double> w, const ModFCStack& net);

/// Backward of toy_geometry_field. Accumulates into `d_net` and `dw`.
void toy_geometry_field_backward(const TetGrid& grid, std::span<const double> w, const ModFCStack& net,
                                 std::span<const double> d_sdf, std::span<const Vec3> d_deform,
                                 ModFCStack& d_net, std::span<double> dw);

} // namespace texmesh
