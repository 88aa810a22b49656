#include "texmesh/shading.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "texmesh/optim.hpp"
#include "texmesh/simd/kernels.hpp"

namespace texmesh {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMinSharpness = 1e-12;

// (1 - e^{-2 lambda}) / lambda, stable as lambda -> 0.
double integral_factor(double lambda) { return -std::expm1(-2.0 * lambda) / lambda; }

Rgb clamp01(const Rgb& c)
{
    return {std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0), std::clamp(c.z, 0.0, 1.0)};
}

} // namespace

double cosine_lobe_amplitude()
{
    return kCosineLobeSharpness / (2.0 * -std::expm1(-2.0 * kCosineLobeSharpness));
}

Vec3 EnvironmentMap::direction(int x, int y) const
{
    const double theta = kPi * (y + 0.5) / radiance.height;
    const double phi = 2.0 * kPi * (x + 0.5) / radiance.width;
    return {std::sin(theta) * std::sin(phi), std::cos(theta), std::sin(theta) * std::cos(phi)};
}

double EnvironmentMap::solid_angle(int y) const
{
    const double theta = kPi * (y + 0.5) / radiance.height;
    return std::sin(theta) * (kPi / radiance.height) * (2.0 * kPi / radiance.width);
}

Rgb sg_eval(const SGLobe& lobe, const Vec3& dir)
{
    return lobe.amplitude * std::exp(lobe.sharpness * (dot(lobe.axis, dir) - 1.0));
}

Rgb sg_integral(const SGLobe& lobe)
{
    return lobe.amplitude * (2.0 * kPi * integral_factor(lobe.sharpness));
}

SGLobe sg_product(const SGLobe& a, const SGLobe& b)
{
    const Vec3 um = a.axis * a.sharpness + b.axis * b.sharpness;
    double lm = norm(um);
    SGLobe out;
    out.axis = lm > kMinSharpness ? um / lm : a.axis;
    lm = std::max(lm, kMinSharpness);
    out.sharpness = lm;
    out.amplitude = hadamard(a.amplitude, b.amplitude) * std::exp(lm - a.sharpness - b.sharpness);
    return out;
}

Rgb shade_point(const Vec3& normal, const Vec3& view, const Reflectance& mat, std::span<const SGLobe> light)
{
    if (light.empty()) return {};
    const Rgb base = clamp01(mat.base_color);
    const double metallic = std::clamp(mat.metallic, 0.0, 1.0);
    const double rough = std::max(std::clamp(mat.roughness, 0.0, 1.0), kMinRoughness);

    const double ndotv = std::max(dot(normal, view), 0.0);
    const Rgb f0 = Rgb(0.04, 0.04, 0.04) * (1.0 - metallic) + base * metallic;
    const double schlick = std::pow(1.0 - ndotv, 5.0);
    const Rgb fresnel = f0 + (Rgb(1, 1, 1) - f0) * schlick;

    const Rgb diffuse_w = hadamard(Rgb(1, 1, 1) - fresnel, base) * ((1.0 - metallic) / kPi);
    const SGLobe cosine{normal, kCosineLobeSharpness, Rgb(1, 1, 1) * cosine_lobe_amplitude()};

    const double r4 = rough * rough * rough * rough;
    const Vec3 refl = normal * (2.0 * dot(normal, view)) - view;
    const SGLobe spec{normalized(refl), 2.0 / r4, Rgb(1, 1, 1) / (kPi * r4)};

    Rgb irradiance, specular;
    for (const auto& l : light) {
        irradiance += sg_integral(sg_product(l, cosine));
        specular += sg_integral(sg_product(l, spec));
    }
    const Rgb out = hadamard(diffuse_w, irradiance) + hadamard(fresnel, specular) * ndotv;
    return {std::max(out.x, 0.0), std::max(out.y, 0.0), std::max(out.z, 0.0)};
}

Image shade_sg(const ShadingInputs& in, std::span<const SGLobe> light, const Camera& cam)
{
    if (!in.gbuf) throw std::invalid_argument("shade_sg needs a G-buffer");
    const GBuffer& g = *in.gbuf;
    if (in.reflectance.size() != g.mask.size() || in.normal.size() != g.mask.size())
        throw std::invalid_argument("per-pixel reflectance/normal buffers must match the G-buffer");
    for (std::size_t i = 0; i < g.mask.size(); ++i)
        if (g.mask[i] && std::abs(norm(in.normal[i]) - 1.0) > 1e-6)
            throw std::invalid_argument("shade_sg: normal at pixel " + std::to_string(i) + " is not unit length");

    const CameraFrame frame(cam);
    Image img(g.width, g.height, 3);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const std::size_t i = g.index(x, y);
            if (!g.mask[i]) continue;
            const Vec3 view = normalized(frame.eye - g.position[i]);
            const Rgb c = shade_point(in.normal[i], view, in.reflectance[i], light);
            for (int k = 0; k < 3; ++k) img.data[i * 3 + k] = c[k];
        }
    }
    return img;
}

std::vector<Vec3> mesh_normals(const SurfaceMesh& mesh)
{
    std::vector<Vec3> n(mesh.vertices.size());
    for (const Face& f : mesh.faces) {
        const Vec3 fn = cross(mesh.vertices[f[1]] - mesh.vertices[f[0]], mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        for (auto v : f) n[v] += fn;
    }
    for (auto& v : n) v = norm(v) > 0.0 ? normalized(v) : Vec3(0, 0, 1);
    return n;
}

std::vector<Vec3> gbuffer_normals(const GBuffer& gbuf, const SurfaceMesh& mesh, std::span<const Vec3> vertex_normals)
{
    std::vector<Vec3> out(gbuf.mask.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!gbuf.mask[i]) continue;
        const Face& f = mesh.faces[gbuf.tri[i]];
        const Vec3& b = gbuf.bary[i];
        Vec3 n = vertex_normals[f[0]] * b.x + vertex_normals[f[1]] * b.y + vertex_normals[f[2]] * b.z;
        if (norm(n) == 0.0)
            n = cross(mesh.vertices[f[1]] - mesh.vertices[f[0]], mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        out[i] = norm(n) > 0.0 ? normalized(n) : Vec3(0, 0, 1);
    }
    return out;
}

// ---------------------------------------------------------------- fitting

namespace {

struct EnvSamples {
    std::vector<double> xs, ys, zs, weight;
    std::vector<double> target[3];
    double weight_sum = 0.0;

    explicit EnvSamples(const EnvironmentMap& env)
    {
        const Image& im = env.radiance;
        if (im.channels != 3 || im.width < 1 || im.height < 1)
            throw std::invalid_argument("environment map must be a non-empty 3-channel image");
        for (int y = 0; y < im.height; ++y) {
            const double w = env.solid_angle(y);
            for (int x = 0; x < im.width; ++x) {
                const Vec3 d = env.direction(x, y);
                xs.push_back(d.x);
                ys.push_back(d.y);
                zs.push_back(d.z);
                weight.push_back(w);
                weight_sum += w;
                for (int c = 0; c < 3; ++c) {
                    const double v = im.at(x, y, c);
                    if (!(v >= 0.0) || !std::isfinite(v))
                        throw std::invalid_argument("environment map values must be finite and nonnegative");
                    target[c].push_back(v);
                }
            }
        }
    }
    std::size_t size() const { return xs.size(); }
};

// Evaluates basis values per lobe and returns the weighted MSE (averaged
// over channels). `basis` is K x P, `resid` 3 x P.
double evaluate(const EnvSamples& s, std::span<const SGLobe> lobes, std::vector<double>& basis,
                std::vector<double>& resid)
{
    const auto& k = simd::kernels();
    const std::size_t P = s.size(), K = lobes.size();
    basis.resize(K * P);
    resid.assign(3 * P, 0.0);
    for (std::size_t l = 0; l < K; ++l)
        k.sg_basis(lobes[l].axis.x, lobes[l].axis.y, lobes[l].axis.z, lobes[l].sharpness, s.xs.data(), s.ys.data(),
                   s.zs.data(), P, basis.data() + l * P);
    for (int c = 0; c < 3; ++c) {
        double* r = resid.data() + c * P;
        for (std::size_t l = 0; l < K; ++l) {
            const double a = lobes[l].amplitude[c];
            const double* b = basis.data() + l * P;
            for (std::size_t p = 0; p < P; ++p) r[p] += a * b[p];
        }
        for (std::size_t p = 0; p < P; ++p) r[p] -= s.target[c][p];
    }
    double loss = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double* r = resid.data() + c * P;
        for (std::size_t p = 0; p < P; ++p) loss += s.weight[p] * r[p] * r[p];
    }
    return loss / (3.0 * s.weight_sum);
}

} // namespace

double sg_environment_loss(const EnvironmentMap& env, std::span<const SGLobe> lobes)
{
    EnvSamples s(env);
    std::vector<double> basis, resid;
    return evaluate(s, lobes, basis, resid);
}

SGFitResult fit_sg_environment(const EnvironmentMap& env, const SGFitOptions& opts)
{
    if (opts.lobes < 1) throw std::invalid_argument("lobe count must be >= 1");
    if (opts.steps < 0) throw std::invalid_argument("step count must be >= 0");
    if (!(opts.step_size > 0.0)) throw std::invalid_argument("step size must be positive");

    const EnvSamples s(env);
    const std::size_t K = opts.lobes, P = s.size();

    double mean = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < P; ++p) mean += s.weight[p] * s.target[c][p];
    mean /= 3.0 * s.weight_sum;

    // Parameters per lobe: axis (3), log sharpness (1), amplitude (3).
    std::vector<SGLobe> lobes(K);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (std::size_t l = 0; l < K; ++l) {
        const double y = K == 1 ? 1.0 : 1.0 - 2.0 * (l + 0.5) / K;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const Vec3 d(r * std::sin(golden * l), y, r * std::cos(golden * l));
        lobes[l].axis = normalized(d + Vec3(jitter(rng), jitter(rng), jitter(rng)));
        lobes[l].sharpness = std::max(1.0, 0.5 * K);
        const double a = mean / std::max(1e-12, 2.0 * kPi * integral_factor(lobes[l].sharpness) / (4.0 * kPi) * K);
        lobes[l].amplitude = Rgb(a, a, a);
    }

    std::vector<double> basis, resid;
    double loss = evaluate(s, lobes, basis, resid);
    SGFitResult result;
    result.loss_trace.reserve(opts.steps);

    AdamConfig adam{opts.step_size, 0.9, 0.999, 1e-12};
    AdamState state;
    std::vector<double> params(7 * K), grads(7 * K);
    auto pack = [&] {
        for (std::size_t l = 0; l < K; ++l) {
            double* p = params.data() + 7 * l;
            p[0] = lobes[l].axis.x;
            p[1] = lobes[l].axis.y;
            p[2] = lobes[l].axis.z;
            p[3] = std::log(lobes[l].sharpness);
            p[4] = lobes[l].amplitude.x;
            p[5] = lobes[l].amplitude.y;
            p[6] = lobes[l].amplitude.z;
        }
    };
    auto unpack = [&](std::vector<SGLobe>& out) {
        for (std::size_t l = 0; l < K; ++l) {
            const double* p = params.data() + 7 * l;
            Vec3 axis(p[0], p[1], p[2]);
            out[l].axis = norm(axis) > 0.0 ? normalized(axis) : lobes[l].axis;
            out[l].sharpness = std::exp(std::clamp(p[3], -30.0, 30.0));
            out[l].amplitude = Rgb(std::max(p[4], 0.0), std::max(p[5], 0.0), std::max(p[6], 0.0));
        }
    };

    std::vector<SGLobe> trial(K);
    const double norm_factor = 2.0 / (3.0 * s.weight_sum);
    for (int step = 0; step < opts.steps; ++step) {
        std::fill(grads.begin(), grads.end(), 0.0);
        for (std::size_t l = 0; l < K; ++l) {
            const double* b = basis.data() + l * P;
            const SGLobe& lobe = lobes[l];
            Vec3 g_axis;
            double g_lambda = 0.0;
            Rgb g_amp;
            for (std::size_t p = 0; p < P; ++p) {
                const double wb = s.weight[p] * b[p];
                const double r0 = resid[p], r1 = resid[P + p], r2 = resid[2 * P + p];
                g_amp += Rgb(r0, r1, r2) * wb;
                const double ra = r0 * lobe.amplitude.x + r1 * lobe.amplitude.y + r2 * lobe.amplitude.z;
                const double cosv = lobe.axis.x * s.xs[p] + lobe.axis.y * s.ys[p] + lobe.axis.z * s.zs[p];
                g_lambda += wb * ra * (cosv - 1.0);
                g_axis += Vec3(s.xs[p], s.ys[p], s.zs[p]) * (wb * ra * lobe.sharpness);
            }
            // Tangential component only: the axis is renormalized every step.
            g_axis -= lobe.axis * dot(g_axis, lobe.axis);
            double* g = grads.data() + 7 * l;
            g[0] = g_axis.x * norm_factor;
            g[1] = g_axis.y * norm_factor;
            g[2] = g_axis.z * norm_factor;
            g[3] = g_lambda * lobe.sharpness * norm_factor;
            g[4] = g_amp.x * norm_factor;
            g[5] = g_amp.y * norm_factor;
            g[6] = g_amp.z * norm_factor;
        }

        pack();
        AdamState saved = state;
        adam_update(params, grads, state, adam);
        unpack(trial);
        std::vector<double> tb, tr;
        const double trial_loss = evaluate(s, trial, tb, tr);
        if (trial_loss <= loss) {
            lobes = trial;
            basis = std::move(tb);
            resid = std::move(tr);
            loss = trial_loss;
        } else {
            state = std::move(saved);
            adam.lr *= 0.5;
        }
        result.loss_trace.push_back(loss);
    }
    result.lobes = std::move(lobes);
    result.loss = loss;
    return result;
}

} // namespace texmesh
