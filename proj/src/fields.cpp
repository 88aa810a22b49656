#include "texmesh/fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace texmesh {

namespace {

struct PlaneSample {
    int i0, j0;     // lower corner node (col, row)
    double fu, fv;  // fractional offsets
    bool clamped_u, clamped_v;
};

// Planes: 0 -> (x, y), 1 -> (x, z), 2 -> (y, z).
constexpr std::array<std::array<int, 2>, 3> kPlaneAxes{{{0, 1}, {0, 2}, {1, 2}}};

PlaneSample locate(int n, double u, double v)
{
    PlaneSample s{};
    auto axis = [n](double c, int& i0, double& f, bool& clamped) {
        clamped = c < -1.0 || c > 1.0;
        const double t = (std::clamp(c, -1.0, 1.0) + 1.0) * 0.5 * (n - 1);
        i0 = std::clamp(static_cast<int>(std::floor(t)), 0, n - 2);
        f = t - i0;
    };
    axis(u, s.i0, s.fu, s.clamped_u);
    axis(v, s.j0, s.fv, s.clamped_v);
    return s;
}

double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_normal(std::vector<double>& v, double stddev, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : v) x = dist(rng);
}

} // namespace

TriPlane TriPlane::zeros(int resolution, int channels)
{
    if (resolution < 2 || channels < 1) throw std::invalid_argument("tri-plane needs resolution >= 2 and channels >= 1");
    TriPlane tp;
    tp.resolution = resolution;
    tp.channels = channels;
    for (auto& p : tp.planes) p.assign(static_cast<std::size_t>(resolution) * resolution * channels, 0.0);
    return tp;
}

TriPlane TriPlane::random(int resolution, int channels, double scale, std::mt19937_64& rng)
{
    TriPlane tp = zeros(resolution, channels);
    for (auto& p : tp.planes) fill_normal(p, scale, rng);
    return tp;
}

std::vector<double> sample_triplane(const TriPlane& tp, const Vec3& p)
{
    const int n = tp.resolution, c = tp.channels;
    std::vector<double> out(c, 0.0);
    for (int e = 0; e < 3; ++e) {
        const auto s = locate(n, p[kPlaneAxes[e][0]], p[kPlaneAxes[e][1]]);
        const double w00 = (1 - s.fu) * (1 - s.fv), w10 = s.fu * (1 - s.fv), w01 = (1 - s.fu) * s.fv, w11 = s.fu * s.fv;
        const double* base = tp.planes[e].data();
        const double* f00 = base + (static_cast<std::size_t>(s.j0) * n + s.i0) * c;
        const double* f10 = f00 + c;
        const double* f01 = f00 + static_cast<std::size_t>(n) * c;
        const double* f11 = f01 + c;
        for (int k = 0; k < c; ++k) out[k] += w00 * f00[k] + w10 * f10[k] + w01 * f01[k] + w11 * f11[k];
    }
    return out;
}

Vec3 sample_triplane_backward(const TriPlane& tp, const Vec3& p, std::span<const double> d_feature, TriPlane& d_tp)
{
    const int n = tp.resolution, c = tp.channels;
    if (static_cast<int>(d_feature.size()) != c) throw std::invalid_argument("feature gradient has wrong length");
    Vec3 dp;
    const double scale = 0.5 * (n - 1);
    for (int e = 0; e < 3; ++e) {
        const auto s = locate(n, p[kPlaneAxes[e][0]], p[kPlaneAxes[e][1]]);
        const double w00 = (1 - s.fu) * (1 - s.fv), w10 = s.fu * (1 - s.fv), w01 = (1 - s.fu) * s.fv, w11 = s.fu * s.fv;
        const std::size_t o00 = (static_cast<std::size_t>(s.j0) * n + s.i0) * c;
        const std::size_t o10 = o00 + c, o01 = o00 + static_cast<std::size_t>(n) * c, o11 = o01 + c;
        const double* f = tp.planes[e].data();
        double* g = d_tp.planes[e].data();
        double du = 0.0, dv = 0.0;
        for (int k = 0; k < c; ++k) {
            const double d = d_feature[k];
            g[o00 + k] += w00 * d;
            g[o10 + k] += w10 * d;
            g[o01 + k] += w01 * d;
            g[o11 + k] += w11 * d;
            du += d * ((1 - s.fv) * (f[o10 + k] - f[o00 + k]) + s.fv * (f[o11 + k] - f[o01 + k]));
            dv += d * ((1 - s.fu) * (f[o01 + k] - f[o00 + k]) + s.fu * (f[o11 + k] - f[o10 + k]));
        }
        if (!s.clamped_u) dp[kPlaneAxes[e][0]] += du * scale;
        if (!s.clamped_v) dp[kPlaneAxes[e][1]] += dv * scale;
    }
    return dp;
}

std::array<double, 6> positional_encoding(const Vec3& p)
{
    return {std::sin(p.x), std::sin(p.y), std::sin(p.z), std::cos(p.x), std::cos(p.y), std::cos(p.z)};
}

Vec3 positional_encoding_backward(const Vec3& p, std::span<const double> d_pe)
{
    Vec3 dp;
    for (int k = 0; k < 3; ++k) dp[k] = d_pe[k] * std::cos(p[k]) - d_pe[k + 3] * std::sin(p[k]);
    return dp;
}

// ---------------------------------------------------------------- ModFC

ModFCLayer ModFCLayer::create(int in, int out, int style, bool activation)
{
    if (in < 1 || out < 1 || style < 1) throw std::invalid_argument("ModFC dimensions must be positive");
    ModFCLayer l;
    l.in_dim = in;
    l.out_dim = out;
    l.style_dim = style;
    l.activation = activation;
    l.weight.assign(static_cast<std::size_t>(out) * in, 0.0);
    l.bias.assign(out, 0.0);
    l.affine_weight.assign(static_cast<std::size_t>(in) * style, 0.0);
    l.affine_bias.assign(in, 0.0);
    return l;
}

ModFCLayer ModFCLayer::random(int in, int out, int style, bool activation, std::mt19937_64& rng)
{
    ModFCLayer l = create(in, out, style, activation);
    fill_normal(l.weight, 1.0, rng);
    fill_normal(l.affine_weight, 1.0 / std::sqrt(static_cast<double>(style)), rng);
    std::fill(l.affine_bias.begin(), l.affine_bias.end(), 1.0);
    return l;
}

ModFCLayer ModFCLayer::zeros_like() const { return create(in_dim, out_dim, style_dim, activation); }

ModulatedWeights modulate(const ModFCLayer& layer, std::span<const double> w)
{
    if (static_cast<int>(w.size()) != layer.style_dim)
        throw std::invalid_argument("latent length " + std::to_string(w.size()) + " != style dim " +
                                    std::to_string(layer.style_dim));
    const int in = layer.in_dim, out = layer.out_dim;
    ModulatedWeights m;
    m.style.assign(in, 0.0);
    for (int i = 0; i < in; ++i) {
        double h = layer.affine_bias[i];
        for (int k = 0; k < layer.style_dim; ++k) h += layer.affine_weight[static_cast<std::size_t>(i) * layer.style_dim + k] * w[k];
        m.style[i] = h;
    }
    m.row_norm.assign(out, 0.0);
    m.weight.assign(static_cast<std::size_t>(out) * in, 0.0);
    for (int j = 0; j < out; ++j) {
        double sq = 0.0;
        for (int i = 0; i < in; ++i) {
            const double t = layer.weight[static_cast<std::size_t>(j) * in + i] * m.style[i];
            m.weight[static_cast<std::size_t>(j) * in + i] = t;
            sq += t * t;
        }
        const double nrm = std::sqrt(sq + kDemodEps);
        m.row_norm[j] = nrm;
        for (int i = 0; i < in; ++i) m.weight[static_cast<std::size_t>(j) * in + i] /= nrm;
    }
    return m;
}

std::vector<double> modfc_apply(const ModFCLayer& layer, const ModulatedWeights& mod, std::span<const double> x,
                                std::vector<double>* pre)
{
    if (static_cast<int>(x.size()) != layer.in_dim)
        throw std::invalid_argument("ModFC input length " + std::to_string(x.size()) + " != " +
                                    std::to_string(layer.in_dim));
    const int in = layer.in_dim, out = layer.out_dim;
    std::vector<double> y(out);
    if (pre) pre->resize(out);
    for (int j = 0; j < out; ++j) {
        const double* row = mod.weight.data() + static_cast<std::size_t>(j) * in;
        double z = layer.bias[j];
        for (int i = 0; i < in; ++i) z += row[i] * x[i];
        if (pre) (*pre)[j] = z;
        y[j] = layer.activation ? leaky(z) : z;
    }
    return y;
}

std::vector<double> modfc_forward(const ModFCLayer& layer, std::span<const double> x, std::span<const double> w)
{
    return modfc_apply(layer, modulate(layer, w), x);
}

void modfc_apply_backward(const ModFCLayer& layer, const ModulatedWeights& mod, std::span<const double> x,
                          std::span<const double> pre, std::span<const double> dy, std::span<double> d_weight,
                          ModFCLayer& grad, std::span<double> dx)
{
    const int in = layer.in_dim, out = layer.out_dim;
    std::fill(dx.begin(), dx.end(), 0.0);
    for (int j = 0; j < out; ++j) {
        const double dz = layer.activation ? dy[j] * leaky_grad(pre[j]) : dy[j];
        if (dz == 0.0) continue;
        grad.bias[j] += dz;
        const double* row = mod.weight.data() + static_cast<std::size_t>(j) * in;
        double* drow = d_weight.data() + static_cast<std::size_t>(j) * in;
        for (int i = 0; i < in; ++i) {
            dx[i] += row[i] * dz;
            drow[i] += dz * x[i];
        }
    }
}

void modulate_backward(const ModFCLayer& layer, const ModulatedWeights& mod, std::span<const double> w,
                       std::span<const double> d_weight, ModFCLayer& grad, std::span<double> dw)
{
    const int in = layer.in_dim, out = layer.out_dim, sd = layer.style_dim;
    std::vector<double> dh(in, 0.0);
    for (int j = 0; j < out; ++j) {
        const double nrm = mod.row_norm[j];
        const double* wd = mod.weight.data() + static_cast<std::size_t>(j) * in; // theta'' = theta' / n
        const double* g = d_weight.data() + static_cast<std::size_t>(j) * in;
        double proj = 0.0; // sum_k g_k theta''_k
        for (int i = 0; i < in; ++i) proj += g[i] * wd[i];
        for (int i = 0; i < in; ++i) {
            // d theta'_i = (g_i - theta''_i * proj) / n
            const double dt = (g[i] - wd[i] * proj) / nrm;
            const std::size_t idx = static_cast<std::size_t>(j) * in + i;
            grad.weight[idx] += dt * mod.style[i];
            dh[i] += dt * layer.weight[idx];
        }
    }
    for (int i = 0; i < in; ++i) {
        grad.affine_bias[i] += dh[i];
        for (int k = 0; k < sd; ++k) {
            grad.affine_weight[static_cast<std::size_t>(i) * sd + k] += dh[i] * w[k];
            dw[k] += layer.affine_weight[static_cast<std::size_t>(i) * sd + k] * dh[i];
        }
    }
}

ModFCStack make_modfc_stack(std::span<const int> dims, int style_dim, std::mt19937_64& rng)
{
    if (dims.size() < 2) throw std::invalid_argument("ModFC stack needs at least two dims");
    ModFCStack s;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        s.push_back(ModFCLayer::random(dims[l], dims[l + 1], style_dim, l + 2 < dims.size(), rng));
    return s;
}

ModFCStack zeros_like(const ModFCStack& stack)
{
    ModFCStack g;
    g.reserve(stack.size());
    for (const auto& l : stack) g.push_back(l.zeros_like());
    return g;
}

ModFCStackEval::ModFCStackEval(const ModFCStack& stack, std::span<const double> w)
    : stack_(&stack), w_(w.begin(), w.end())
{
    if (stack.empty()) throw std::invalid_argument("empty ModFC stack");
    for (std::size_t l = 0; l < stack.size(); ++l) {
        if (l > 0 && stack[l].in_dim != stack[l - 1].out_dim)
            throw std::invalid_argument("ModFC stack layer " + std::to_string(l) + " input dim mismatch");
        mods_.push_back(modulate(stack[l], w));
        d_weight_.emplace_back(stack[l].weight.size(), 0.0);
    }
}

std::vector<double> ModFCStackEval::forward(std::span<const double> x, std::vector<std::vector<double>>* acts) const
{
    // acts layout: [input, pre_0, pre_1, ...]
    if (acts) {
        acts->clear();
        acts->emplace_back(x.begin(), x.end());
    }
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < stack_->size(); ++l) {
        std::vector<double> pre;
        cur = modfc_apply((*stack_)[l], mods_[l], cur, acts ? &pre : nullptr);
        if (acts) acts->push_back(std::move(pre));
    }
    return cur;
}

std::vector<double> ModFCStackEval::backward(const std::vector<std::vector<double>>& acts, std::span<const double> dy,
                                             ModFCStack& grad)
{
    std::vector<double> cur_dy(dy.begin(), dy.end());
    for (std::size_t l = stack_->size(); l-- > 0;) {
        const auto& layer = (*stack_)[l];
        // Input to layer l: acts[0] for l == 0, else activation of pre_{l-1}.
        std::vector<double> x;
        if (l == 0) {
            x = acts[0];
        } else {
            x = acts[l];
            if ((*stack_)[l - 1].activation)
                for (auto& v : x) v = leaky(v);
        }
        std::vector<double> dx(layer.in_dim);
        modfc_apply_backward(layer, mods_[l], x, acts[l + 1], cur_dy, d_weight_[l], grad[l], dx);
        cur_dy = std::move(dx);
    }
    return cur_dy;
}

void ModFCStackEval::finish(ModFCStack& grad, std::span<double> dw) const
{
    for (std::size_t l = 0; l < stack_->size(); ++l)
        modulate_backward((*stack_)[l], mods_[l], w_, d_weight_[l], grad[l], dw);
}

// ---------------------------------------------------------------- mapping

FCLayer FCLayer::random(int in, int out, std::mt19937_64& rng)
{
    FCLayer l;
    l.in_dim = in;
    l.out_dim = out;
    l.weight.assign(static_cast<std::size_t>(in) * out, 0.0);
    l.bias.assign(out, 0.0);
    fill_normal(l.weight, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    return l;
}

FCLayer FCLayer::zeros_like() const
{
    FCLayer l = *this;
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
    return l;
}

LatentCode mapping_network(std::span<const double> z, std::span<const FCLayer> layers,
                           std::vector<std::vector<double>>* acts)
{
    std::vector<double> cur(z.begin(), z.end());
    if (acts) {
        acts->clear();
        acts->push_back(cur);
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        if (static_cast<int>(cur.size()) != L.in_dim)
            throw std::invalid_argument("mapping layer " + std::to_string(l) + " expects " + std::to_string(L.in_dim) +
                                        " inputs, got " + std::to_string(cur.size()));
        std::vector<double> pre(L.out_dim);
        for (int j = 0; j < L.out_dim; ++j) {
            double s = L.bias[j];
            for (int i = 0; i < L.in_dim; ++i) s += L.weight[static_cast<std::size_t>(j) * L.in_dim + i] * cur[i];
            pre[j] = s;
        }
        if (acts) acts->push_back(pre);
        for (auto& v : pre) v = leaky(v);
        cur = std::move(pre);
    }
    return cur;
}

std::vector<double> mapping_network_backward(std::span<const FCLayer> layers,
                                             const std::vector<std::vector<double>>& acts,
                                             std::span<const double> dy, std::span<FCLayer> grad)
{
    std::vector<double> cur(dy.begin(), dy.end());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& L = layers[l];
        std::vector<double> x = acts[l];
        if (l > 0)
            for (auto& v : x) v = leaky(v);
        std::vector<double> dx(L.in_dim, 0.0);
        for (int j = 0; j < L.out_dim; ++j) {
            const double dz = cur[j] * leaky_grad(acts[l + 1][j]);
            grad[l].bias[j] += dz;
            for (int i = 0; i < L.in_dim; ++i) {
                grad[l].weight[static_cast<std::size_t>(j) * L.in_dim + i] += dz * x[i];
                dx[i] += L.weight[static_cast<std::size_t>(j) * L.in_dim + i] * dz;
            }
        }
        cur = std::move(dx);
    }
    return cur;
}

// ---------------------------------------------------------------- texture

LatentCode concat(std::span<const double> a, std::span<const double> b)
{
    LatentCode out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

namespace {

std::vector<double> decoder_input(const Vec3& p, const TriPlane& tp, const ModFCStack& decoder)
{
    auto feat = sample_triplane(tp, p);
    const int in = decoder.front().in_dim;
    if (in == tp.channels + 6) {
        const auto pe = positional_encoding(p);
        feat.insert(feat.end(), pe.begin(), pe.end());
    } else if (in != tp.channels) {
        throw std::invalid_argument("decoder input dim " + std::to_string(in) + " does not match tri-plane channels " +
                                    std::to_string(tp.channels));
    }
    if (decoder.back().out_dim != 3) throw std::invalid_argument("colour decoder must output 3 channels");
    return feat;
}

} // namespace

Rgb texture_color(const Vec3& p, const TriPlane& tp, const ModFCStackEval& eval)
{
    const auto y = eval.forward(decoder_input(p, tp, eval.stack()));
    return {sigmoid(y[0]), sigmoid(y[1]), sigmoid(y[2])};
}

Rgb texture_color(const Vec3& p, const TriPlane& tp, const ModFCStack& decoder, std::span<const double> w_geo,
                  std::span<const double> w_tex)
{
    const auto w = concat(w_geo, w_tex);
    ModFCStackEval eval(decoder, w);
    return texture_color(p, tp, eval);
}

Vec3 texture_color_backward(const Vec3& p, const TriPlane& tp, ModFCStackEval& eval, const Rgb& d_rgb,
                            TriPlane& d_tp, ModFCStack& d_decoder)
{
    std::vector<std::vector<double>> acts;
    const auto x = decoder_input(p, tp, eval.stack());
    const auto y = eval.forward(x, &acts);
    std::array<double, 3> dy{};
    for (int k = 0; k < 3; ++k) {
        const double s = sigmoid(y[k]);
        dy[k] = d_rgb[k] * s * (1.0 - s);
    }
    const auto dx = eval.backward(acts, dy, d_decoder);
    Vec3 dp = sample_triplane_backward(tp, p, std::span<const double>(dx.data(), tp.channels), d_tp);
    if (static_cast<int>(dx.size()) == tp.channels + 6)
        dp += positional_encoding_backward(p, std::span<const double>(dx.data() + tp.channels, 6));
    return dp;
}

// ---------------------------------------------------------------- geometry

GeometryField toy_geometry_field(const TetGrid& grid, std::span<const double> w, const ModFCStack& net)
{
    if (net.empty() || net.front().in_dim != 6 || net.back().out_dim != 4)
        throw std::invalid_argument("toy geometry net must map 6 PE inputs to 4 outputs");
    ModFCStackEval eval(net, w);
    const double scale = 1.0 / grid.resolution;
    GeometryField f = GeometryField::zeros(grid.vertex_count(), scale);
    for (std::size_t v = 0; v < grid.vertex_count(); ++v) {
        const auto pe = positional_encoding(grid.vertices[v]);
        const auto y = eval.forward(pe);
        f.sdf[v] = std::tanh(y[0]);
        f.deform[v] = Vec3(std::tanh(y[1]), std::tanh(y[2]), std::tanh(y[3])) * scale;
    }
    return f;
}

void toy_geometry_field_backward(const TetGrid& grid, std::span<const double> w, const ModFCStack& net,
                                 std::span<const double> d_sdf, std::span<const Vec3> d_deform,
                                 ModFCStack& d_net, std::span<double> dw)
{
    if (d_sdf.size() != grid.vertex_count() || d_deform.size() != grid.vertex_count())
        throw std::invalid_argument("field gradient size does not match grid");
    ModFCStackEval eval(net, w);
    const double scale = 1.0 / grid.resolution;
    std::vector<std::vector<double>> acts;
    for (std::size_t v = 0; v < grid.vertex_count(); ++v) {
        if (d_sdf[v] == 0.0 && d_deform[v] == Vec3{}) continue;
        const auto pe = positional_encoding(grid.vertices[v]);
        const auto y = eval.forward(pe, &acts);
        std::array<double, 4> dy{};
        const double t0 = std::tanh(y[0]);
        dy[0] = d_sdf[v] * (1.0 - t0 * t0);
        for (int k = 0; k < 3; ++k) {
            const double t = std::tanh(y[k + 1]);
            dy[k + 1] = d_deform[v][k] * scale * (1.0 - t * t);
        }
        eval.backward(acts, dy, d_net);
    }
    eval.finish(d_net, dw);
}

} // namespace texmesh
