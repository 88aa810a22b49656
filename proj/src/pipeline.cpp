#include "texmesh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace texmesh {

// ---------------------------------------------------------------- analytic scenes

namespace {

Rgb position_color(const Vec3& p, double extent)
{
    auto ch = [&](double v) { return std::clamp(0.5 + 0.5 * v / extent, 0.0, 1.0); };
    return {ch(p.x), ch(p.y), ch(p.z)};
}

} // namespace

AnalyticShape sphere_shape(double radius)
{
    if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
    return {[radius](const Vec3& p) { return norm(p) - radius; },
            [radius](const Vec3& p) { return position_color(p, radius); }};
}

AnalyticShape torus_shape(double major, double minor)
{
    if (!(minor > 0.0) || !(major > minor)) throw std::invalid_argument("torus needs major > minor > 0");
    return {[major, minor](const Vec3& p) {
                const double q = std::hypot(p.x, p.z) - major;
                return std::hypot(q, p.y) - minor;
            },
            [major, minor](const Vec3& p) { return position_color(p, major + minor); }};
}

AnalyticShape with_color(AnalyticShape shape, const Rgb& color)
{
    shape.color = [color](const Vec3&) { return color; };
    return shape;
}

GeometryField sample_field(const TetGrid& grid, const std::function<double(const Vec3&)>& sdf)
{
    GeometryField f = GeometryField::zeros(grid.vertex_count(), 1.0 / grid.resolution);
    for (std::size_t v = 0; v < grid.vertex_count(); ++v) f.sdf[v] = sdf(grid.vertices[v]);
    return f;
}

SurfaceMesh extract_analytic(const std::function<double(const Vec3&)>& sdf, int res)
{
    const TetGrid grid = build_regular_grid(res);
    return marching_tetrahedra(grid, sample_field(grid, sdf));
}

std::vector<Camera> fibonacci_cameras(int n, double radius, int size, double fov_y_deg)
{
    if (n < 1) throw std::invalid_argument("camera count must be >= 1");
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Camera> cams;
    for (int i = 0; i < n; ++i) {
        Camera c;
        c.fov_y_deg = fov_y_deg;
        c.radius = radius;
        c.width = c.height = size;
        c.elevation = std::asin(1.0 - 2.0 * (i + 0.5) / n);
        c.azimuth = std::fmod(golden * i, 2.0 * std::numbers::pi);
        c.validate();
        cams.push_back(c);
    }
    return cams;
}

std::vector<std::uint8_t> voxelize_sdf(const std::function<double(const Vec3&)>& sdf, int res)
{
    std::vector<std::uint8_t> out(static_cast<std::size_t>(res) * res * res);
    const double h = 2.0 / res;
    for (int z = 0; z < res; ++z)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                out[(static_cast<std::size_t>(z) * res + y) * res + x] =
                    is_inside(sdf({-1.0 + (x + 0.5) * h, -1.0 + (y + 0.5) * h, -1.0 + (z + 0.5) * h}));
    return out;
}

std::vector<std::uint8_t> voxelize_mesh(const SurfaceMesh& mesh, int res)
{
    if (res < 1) throw std::invalid_argument("voxel resolution must be >= 1");
    const double h = 2.0 / res;
    // Rays run along +x; a tiny irrational offset keeps them off mesh edges.
    const double oy = 1e-7 * std::numbers::sqrt2, oz = 1e-7 * std::numbers::sqrt3;
    const std::size_t cells = static_cast<std::size_t>(res) * res;
    std::vector<std::vector<std::uint32_t>> bucket(cells);
    auto cell = [&](double v) { return std::clamp(static_cast<int>(std::floor((v + 1.0) / h)), 0, res - 1); };
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        double ylo = 1e300, yhi = -1e300, zlo = 1e300, zhi = -1e300;
        for (auto v : t) {
            ylo = std::min(ylo, mesh.vertices[v].y);
            yhi = std::max(yhi, mesh.vertices[v].y);
            zlo = std::min(zlo, mesh.vertices[v].z);
            zhi = std::max(zhi, mesh.vertices[v].z);
        }
        if (yhi < -1.0 || ylo > 1.0 || zhi < -1.0 || zlo > 1.0) continue;
        for (int z = cell(zlo); z <= cell(zhi); ++z)
            for (int y = cell(ylo); y <= cell(yhi); ++y) bucket[static_cast<std::size_t>(z) * res + y].push_back(f);
    }

    std::vector<std::uint8_t> out(cells * res, 0);
    std::vector<double> hits;
    for (int z = 0; z < res; ++z)
        for (int y = 0; y < res; ++y) {
            const double py = -1.0 + (y + 0.5) * h + oy, pz = -1.0 + (z + 0.5) * h + oz;
            hits.clear();
            for (auto f : bucket[static_cast<std::size_t>(z) * res + y]) {
                const Vec3 &a = mesh.vertices[mesh.faces[f][0]], &b = mesh.vertices[mesh.faces[f][1]],
                           &c = mesh.vertices[mesh.faces[f][2]];
                const double d0 = (b.y - a.y) * (pz - a.z) - (b.z - a.z) * (py - a.y);
                const double d1 = (c.y - b.y) * (pz - b.z) - (c.z - b.z) * (py - b.y);
                const double d2 = (a.y - c.y) * (pz - c.z) - (a.z - c.z) * (py - c.y);
                const bool pos = d0 > 0 && d1 > 0 && d2 > 0, neg = d0 < 0 && d1 < 0 && d2 < 0;
                if (!pos && !neg) continue;
                const double sum = d0 + d1 + d2;
                // d1, d2, d0 weight a, b, c respectively.
                hits.push_back((a.x * d1 + b.x * d2 + c.x * d0) / sum);
            }
            std::sort(hits.begin(), hits.end());
            std::size_t k = 0;
            for (int x = 0; x < res; ++x) {
                const double px = -1.0 + (x + 0.5) * h;
                while (k < hits.size() && hits[k] < px) ++k;
                out[(static_cast<std::size_t>(z) * res + y) * res + x] = k % 2;
            }
        }
    return out;
}

double voxel_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("voxel grids differ in size");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] && b[i];
        uni += a[i] || b[i];
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

// ---------------------------------------------------------------- rendering chain

RenderedView render_view(const SurfaceMesh& mesh, const Camera& cam, const TriPlane& tp, const ModFCStackEval& decoder)
{
    RenderedView v;
    v.gbuf = rasterize(mesh, cam);
    v.soft = antialias_silhouette(v.gbuf, mesh, cam);
    v.rgb = Image(cam.width, cam.height, 3);
    for (std::size_t i = 0; i < v.gbuf.mask.size(); ++i) {
        if (!v.gbuf.mask[i]) continue;
        const Rgb c = texture_color(v.gbuf.position[i], tp, decoder);
        for (int k = 0; k < 3; ++k) v.rgb.data[3 * i + k] = c[k];
    }
    return v;
}

void render_view_backward(const RenderedView& view, const SurfaceMesh& mesh, const Camera& cam, const TriPlane& tp,
                          ModFCStackEval& decoder, const Image& d_rgb, const Image& d_mask,
                          std::vector<Vec3>& d_vertices, TriPlane& d_tp, ModFCStack& d_decoder)
{
    if (d_vertices.size() != mesh.vertices.size()) throw std::invalid_argument("vertex gradient has wrong size");
    GBufferGrad up(view.gbuf);
    bool any = false;
    for (std::size_t i = 0; i < view.gbuf.mask.size(); ++i) {
        if (!view.gbuf.mask[i]) continue;
        const Rgb d(d_rgb.data[3 * i], d_rgb.data[3 * i + 1], d_rgb.data[3 * i + 2]);
        if (d == Rgb{}) continue;
        up.position[i] = texture_color_backward(view.gbuf.position[i], tp, decoder, d, d_tp, d_decoder);
        any = true;
    }
    if (any) {
        const auto g = rasterize_backward(view.gbuf, mesh, cam, up);
        for (std::size_t v = 0; v < g.size(); ++v) d_vertices[v] += g[v];
    }
    const auto g = antialias_backward(view.soft, mesh, cam, d_mask);
    for (std::size_t v = 0; v < g.size(); ++v) d_vertices[v] += g[v];
}

// ---------------------------------------------------------------- shape fitting

std::vector<FitTarget> render_targets(const AnalyticShape& shape, const std::vector<Camera>& cameras, int mesh_res)
{
    const SurfaceMesh mesh = extract_analytic(shape.sdf, mesh_res);
    std::vector<FitTarget> out;
    for (const Camera& cam : cameras) {
        const GBuffer g = rasterize(mesh, cam);
        FitTarget t;
        t.camera = cam;
        t.rgb = shade_with_texture(g, shape.color);
        t.mask = antialias_silhouette(g, mesh, cam).mask;
        out.push_back(std::move(t));
    }
    return out;
}

void FitConfig::validate() const
{
    auto positive = [](int v, const char* key) {
        if (v < 1) throw std::invalid_argument(std::string("fit.") + key + " must be >= 1");
    };
    positive(views, "views");
    positive(image_size, "image_size");
    positive(tet_res, "tet_res");
    positive(triplane_res, "triplane_res");
    positive(triplane_channels, "triplane_channels");
    positive(decoder_hidden, "decoder_hidden");
    positive(latent_dim, "latent_dim");
    if (steps < 0) throw std::invalid_argument("fit.steps must be >= 0");
    if (triplane_res < 2) throw std::invalid_argument("fit.triplane_res must be >= 2");
    if (!(adam.lr > 0.0)) throw std::invalid_argument("fit.lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw std::invalid_argument("fit.beta1 must be in [0,1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw std::invalid_argument("fit.beta2 must be in [0,1)");
    if (!(mask_weight >= 0.0)) throw std::invalid_argument("fit.mask_weight must be >= 0");
    if (!(rgb_weight >= 0.0)) throw std::invalid_argument("fit.rgb_weight must be >= 0");
    if (!(reg_weight >= 0.0)) throw std::invalid_argument("fit.reg_weight must be >= 0");
    if (init != "sphere" && init != "visual_hull")
        throw std::invalid_argument("fit.init must be 'sphere' or 'visual_hull'");
    if (!(init_radius > 0.0 && init_radius < 1.0)) throw std::invalid_argument("fit.init_radius must be in (0,1)");
}

GeometryField FitState::field() const
{
    GeometryField f = GeometryField::zeros(raw_sdf.size(), deform_bound);
    for (std::size_t v = 0; v < raw_sdf.size(); ++v) {
        f.sdf[v] = std::tanh(raw_sdf[v]);
        for (int k = 0; k < 3; ++k) f.deform[v][k] = deform_bound * std::tanh(raw_deform[3 * v + k]);
    }
    return f;
}

std::vector<std::vector<double>*> FitState::tensors()
{
    std::vector<std::vector<double>*> t{&raw_sdf, &raw_deform};
    for (auto* p : triplane.tensors()) t.push_back(p);
    for (auto& layer : decoder)
        for (auto* p : layer.tensors()) t.push_back(p);
    return t;
}

FitState FitState::zeros_like() const
{
    FitState z;
    z.raw_sdf.assign(raw_sdf.size(), 0.0);
    z.raw_deform.assign(raw_deform.size(), 0.0);
    z.deform_bound = deform_bound;
    z.triplane = triplane.zeros_like();
    z.decoder = texmesh::zeros_like(decoder);
    z.latent.assign(latent.size(), 0.0);
    return z;
}

namespace {

void check_targets(const std::vector<FitTarget>& targets)
{
    if (targets.empty()) throw std::invalid_argument("fit needs at least one target view");
    for (const auto& t : targets) {
        t.camera.validate();
        if (t.rgb.width != t.camera.width || t.rgb.height != t.camera.height || t.rgb.channels != 3 ||
            t.mask.width != t.camera.width || t.mask.height != t.camera.height || t.mask.channels != 1)
            throw std::invalid_argument("target image sizes do not match their camera");
        if (t.camera.width != targets[0].camera.width || t.camera.height != targets[0].camera.height)
            throw std::invalid_argument("target views have inconsistent image sizes");
    }
}

double atanh_clamped(double s) { return std::atanh(std::clamp(s, -0.999, 0.999)); }

} // namespace

FitState init_fit_state(const FitConfig& cfg, const std::vector<FitTarget>& targets)
{
    cfg.validate();
    check_targets(targets);
    std::mt19937_64 rng(cfg.seed);
    FitState s;
    s.grid = build_regular_grid(cfg.tet_res);
    s.grid.edges = unique_edges(s.grid);
    const std::size_t n = s.grid.vertex_count();
    s.deform_bound = 0.5 / cfg.tet_res;
    s.raw_sdf.resize(n);
    s.raw_deform.assign(3 * n, 0.0);
    const double cell = 2.0 / cfg.tet_res;
    if (cfg.init == "sphere") {
        for (std::size_t v = 0; v < n; ++v) s.raw_sdf[v] = atanh_clamped(norm(s.grid.vertices[v]) - cfg.init_radius);
    } else {
        std::vector<CameraFrame> frames;
        for (const auto& t : targets) frames.emplace_back(t.camera);
        for (std::size_t v = 0; v < n; ++v) {
            bool inside = true;
            for (std::size_t k = 0; k < targets.size() && inside; ++k) {
                const Vec3 q = frames[k].project(s.grid.vertices[v]);
                const int x = static_cast<int>(std::floor(q.x)), y = static_cast<int>(std::floor(q.y));
                const Image& m = targets[k].mask;
                inside = q.z > 0.0 && x >= 0 && y >= 0 && x < m.width && y < m.height && m.at(x, y) >= 0.5;
            }
            s.raw_sdf[v] = atanh_clamped(inside ? -0.5 * cell : 0.5 * cell);
        }
    }
    s.triplane = TriPlane::random(cfg.triplane_res, cfg.triplane_channels, 0.1, rng);
    const int dims[] = {cfg.triplane_channels + 6, cfg.decoder_hidden, 3};
    s.decoder = make_modfc_stack(dims, cfg.latent_dim, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    s.latent.resize(cfg.latent_dim);
    for (auto& x : s.latent) x = normal(rng);
    return s;
}

FitTerms fit_objective(const FitState& state, const std::vector<FitTarget>& targets, const FitConfig& cfg,
                       FitState* grad)
{
    check_targets(targets);
    const GeometryField field = state.field();
    const SurfaceMesh mesh = marching_tetrahedra(state.grid, field);
    ModFCStackEval decoder(state.decoder, state.latent);
    const double V = static_cast<double>(targets.size());

    FitTerms terms;
    std::vector<Vec3> d_vertices(mesh.vertices.size());
    for (const FitTarget& t : targets) {
        const double P = static_cast<double>(t.mask.pixel_count());
        Image d_mask(t.camera.width, t.camera.height, 1);
        Image d_rgb(t.camera.width, t.camera.height, 3);
        if (mesh.empty()) {
            for (double m : t.mask.data) terms.mask += m * m / (P * V);
            continue;
        }
        const RenderedView view = render_view(mesh, t.camera, state.triplane, decoder);
        for (std::size_t i = 0; i < view.soft.mask.data.size(); ++i) {
            const double r = view.soft.mask.data[i] - t.mask.data[i];
            terms.mask += r * r / (P * V);
            d_mask.data[i] = cfg.mask_weight * 2.0 * r / (P * V);
            if (!view.gbuf.mask[i] || t.mask.data[i] < 0.5) continue;
            for (int k = 0; k < 3; ++k) {
                const double rc = view.rgb.data[3 * i + k] - t.rgb.data[3 * i + k];
                terms.rgb += rc * rc / (3.0 * P * V);
                d_rgb.data[3 * i + k] = cfg.rgb_weight * 2.0 * rc / (3.0 * P * V);
            }
        }
        if (grad) {
            render_view_backward(view, mesh, t.camera, state.triplane, decoder, d_rgb, d_mask, d_vertices,
                                 grad->triplane, grad->decoder);
        }
    }
    // Mean over sign-flip edges so the weight is independent of grid size.
    const double flips = std::max<double>(1.0, sign_flip_count(field.sdf, state.grid.edges));
    terms.reg = sdf_regularizer(field, state.grid.edges) / flips;
    terms.total = cfg.mask_weight * terms.mask + cfg.rgb_weight * terms.rgb + cfg.reg_weight * terms.reg;

    if (grad) {
        std::vector<double> d_sdf = sdf_regularizer_grad(field.sdf, state.grid.edges);
        for (auto& d : d_sdf) d *= cfg.reg_weight / flips;
        if (!mesh.empty()) {
            const MeshGradients mg = marching_tetrahedra_backward(state.grid, field, mesh, d_vertices);
            for (std::size_t v = 0; v < d_sdf.size(); ++v) {
                d_sdf[v] += mg.d_sdf[v];
                for (int k = 0; k < 3; ++k) {
                    const double tk = field.deform[v][k] / state.deform_bound;
                    grad->raw_deform[3 * v + k] += mg.d_deform[v][k] * state.deform_bound * (1.0 - tk * tk);
                }
            }
        }
        for (std::size_t v = 0; v < d_sdf.size(); ++v) grad->raw_sdf[v] += d_sdf[v] * (1.0 - field.sdf[v] * field.sdf[v]);
        decoder.finish(grad->decoder, grad->latent);
    }
    return terms;
}

FitResult fit_shape(const std::vector<FitTarget>& targets, const FitConfig& cfg)
{
    return fit_shape(targets, cfg, init_fit_state(cfg, targets));
}

FitResult fit_shape(const std::vector<FitTarget>& targets, const FitConfig& cfg, FitState init)
{
    cfg.validate();
    check_targets(targets);
    FitResult r;
    r.state = std::move(init);
    const std::size_t n_tensors = r.state.tensors().size();
    std::vector<AdamState> adam(n_tensors);
    for (int step = 0; step < cfg.steps; ++step) {
        FitState grad = r.state.zeros_like();
        r.history.push_back(fit_objective(r.state, targets, cfg, &grad));
        auto params = r.state.tensors();
        auto grads = grad.tensors();
        for (std::size_t k = 0; k < n_tensors; ++k) {
            const bool geometry = k < 2;
            if ((geometry && cfg.freeze_geometry) || (!geometry && cfg.freeze_texture)) continue;
            adam_update(*params[k], *grads[k], adam[k], cfg.adam);
        }
    }
    return r;
}

SurfaceMesh fit_mesh(const FitState& state) { return marching_tetrahedra(state.grid, state.field()); }

std::vector<Rgb> fit_vertex_colors(const FitState& state, const SurfaceMesh& mesh)
{
    ModFCStackEval decoder(state.decoder, state.latent);
    std::vector<Rgb> c;
    c.reserve(mesh.vertices.size());
    for (const Vec3& p : mesh.vertices) c.push_back(texture_color(p, state.triplane, decoder));
    return c;
}

std::vector<TraceRow> fit_trace(const FitResult& r)
{
    std::vector<TraceRow> rows;
    for (std::size_t s = 0; s < r.history.size(); ++s) {
        const auto& t = r.history[s];
        const int step = static_cast<int>(s);
        rows.push_back({step, "mask", t.mask});
        rows.push_back({step, "rgb", t.rgb});
        rows.push_back({step, "reg", t.reg});
        rows.push_back({step, "total", t.total});
    }
    return rows;
}

TensorBundle fit_checkpoint(const FitState& s)
{
    TensorBundle b;
    const std::size_t n = s.raw_sdf.size();
    b.meta["model"] = "fit";
    b.meta["tet_res"] = s.grid.resolution;
    b.meta["deform_bound"] = s.deform_bound;
    b.meta["triplane_res"] = s.triplane.resolution;
    b.meta["triplane_channels"] = s.triplane.channels;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.decoder)
        layers.push_back({{"in", l.in_dim}, {"out", l.out_dim}, {"style", l.style_dim}, {"activation", l.activation}});
    b.meta["decoder"] = layers;
    b.put("raw_sdf", {n}, s.raw_sdf);
    b.put("raw_deform", {n, 3}, s.raw_deform);
    const auto R = static_cast<std::size_t>(s.triplane.resolution), C = static_cast<std::size_t>(s.triplane.channels);
    for (int p = 0; p < 3; ++p) b.put("triplane." + std::to_string(p), {R, R, C}, s.triplane.planes[p]);
    for (std::size_t i = 0; i < s.decoder.size(); ++i) {
        const auto& l = s.decoder[i];
        const std::string k = "decoder." + std::to_string(i) + ".";
        const auto in = static_cast<std::size_t>(l.in_dim), out = static_cast<std::size_t>(l.out_dim),
                   st = static_cast<std::size_t>(l.style_dim);
        b.put(k + "weight", {out, in}, l.weight);
        b.put(k + "bias", {out}, l.bias);
        b.put(k + "affine_weight", {in, st}, l.affine_weight);
        b.put(k + "affine_bias", {in}, l.affine_bias);
    }
    b.put("latent", {s.latent.size()}, s.latent);
    return b;
}

FitState fit_state_from_checkpoint(const TensorBundle& b)
{
    if (b.meta.value("model", "") != "fit") throw std::invalid_argument("checkpoint is not a fit state");
    FitState s;
    try {
        s.grid = build_regular_grid(b.meta.at("tet_res").get<int>());
        s.grid.edges = unique_edges(s.grid);
        s.deform_bound = b.meta.at("deform_bound").get<double>();
        s.raw_sdf = b.get("raw_sdf").values;
        s.raw_deform = b.get("raw_deform").values;
        if (s.raw_sdf.size() != s.grid.vertex_count() || s.raw_deform.size() != 3 * s.grid.vertex_count())
            throw std::invalid_argument("checkpoint field size does not match its grid");
        s.triplane = TriPlane::zeros(b.meta.at("triplane_res").get<int>(), b.meta.at("triplane_channels").get<int>());
        for (int p = 0; p < 3; ++p) {
            const auto& t = b.get("triplane." + std::to_string(p)).values;
            if (t.size() != s.triplane.planes[p].size()) throw std::invalid_argument("tri-plane size mismatch");
            s.triplane.planes[p] = t;
        }
        std::size_t i = 0;
        for (const auto& l : b.meta.at("decoder")) {
            ModFCLayer layer = ModFCLayer::create(l.at("in").get<int>(), l.at("out").get<int>(),
                                                  l.at("style").get<int>(), l.at("activation").get<bool>());
            const std::string k = "decoder." + std::to_string(i++) + ".";
            layer.weight = b.get(k + "weight").values;
            layer.bias = b.get(k + "bias").values;
            layer.affine_weight = b.get(k + "affine_weight").values;
            layer.affine_bias = b.get(k + "affine_bias").values;
            s.decoder.push_back(std::move(layer));
        }
        s.latent = b.get("latent").values;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed fit checkpoint: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------- latents

LatentCode interpolate_latents(std::span<const double> a, std::span<const double> b, double t)
{
    if (a.size() != b.size()) throw std::invalid_argument("latent codes differ in dimension");
    LatentCode out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - t) * a[i] + t * b[i];
    return out;
}

LatentCode perturb_latent(std::span<const double> w, double scale, std::mt19937_64& rng)
{
    if (!(scale >= 0.0)) throw std::invalid_argument("perturbation scale must be >= 0");
    LatentCode out(w.begin(), w.end());
    if (w.empty()) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> dir(w.size());
    double len = 0.0;
    while (len == 0.0) {
        len = 0.0;
        for (auto& d : dir) {
            d = normal(rng);
            len += d * d;
        }
        len = std::sqrt(len);
    }
    for (std::size_t i = 0; i < w.size(); ++i) out[i] += scale * dir[i] / len;
    return out;
}

} // namespace texmesh
