#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "texmesh/pipeline.hpp"

namespace texmesh {

namespace {

double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_slope(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

} // namespace

// ---------------------------------------------------------------- config

void ToyGANConfig::validate() const
{
    auto positive = [](int v, const char* key) {
        if (v < 1) throw std::invalid_argument(std::string("gan.") + key + " must be >= 1");
    };
    positive(latent_dim, "latent_dim");
    positive(w_dim, "w_dim");
    positive(batch, "batch");
    positive(image_size, "image_size");
    positive(tet_res, "tet_res");
    positive(geo_hidden, "geo_hidden");
    positive(triplane_channels, "triplane_channels");
    positive(decoder_hidden, "decoder_hidden");
    positive(disc_pool, "disc_pool");
    positive(disc_hidden, "disc_hidden");
    positive(r1_interval, "r1_interval");
    if (steps < 0) throw std::invalid_argument("gan.steps must be >= 0");
    if (triplane_res < 2) throw std::invalid_argument("gan.triplane_res must be >= 2");
    if (image_size % disc_pool != 0) throw std::invalid_argument("gan.image_size must be divisible by gan.disc_pool");
    if (!(prior_sharpness >= 0.0)) throw std::invalid_argument("gan.prior_sharpness must be >= 0");
    if (!(field_scale > 0.0)) throw std::invalid_argument("gan.field_scale must be positive");
    if (!(r1_weight >= 0.0)) throw std::invalid_argument("gan.r1_weight must be >= 0");
    if (!(reg_weight >= 0.0)) throw std::invalid_argument("gan.reg_weight must be >= 0");
    if (!(adam.lr > 0.0)) throw std::invalid_argument("gan.lr must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw std::invalid_argument("gan.beta1 must be in [0,1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw std::invalid_argument("gan.beta2 must be in [0,1)");
    if (!(radius_min > 0.0 && radius_max >= radius_min && radius_max < 1.0))
        throw std::invalid_argument("gan.radius_min/radius_max must satisfy 0 < min <= max < 1");
    if (cameras.azimuth_max < cameras.azimuth_min || cameras.elevation_max < cameras.elevation_min)
        throw std::invalid_argument("gan.cameras ranges must be nonempty");
    Camera probe;
    probe.fov_y_deg = cameras.fov_y_deg;
    probe.radius = cameras.radius;
    probe.width = probe.height = image_size;
    probe.validate();
}

// ---------------------------------------------------------------- discriminator

Discriminator Discriminator::random(int width, int height, int channels, int pool, int hidden, std::mt19937_64& rng)
{
    if (width % pool || height % pool) throw std::invalid_argument("discriminator: image size not divisible by pool");
    Discriminator d;
    d.width = width;
    d.height = height;
    d.channels = channels;
    d.pool = pool;
    d.hidden = hidden;
    const int f = d.features();
    std::normal_distribution<double> n1(0.0, 1.0 / std::sqrt(f)), n2(0.0, 1.0 / std::sqrt(hidden));
    d.w1.resize(static_cast<std::size_t>(hidden) * f);
    for (auto& x : d.w1) x = n1(rng);
    d.b1.assign(hidden, 0.0);
    d.b2 = {0.0};
    d.w2.resize(hidden);
    for (auto& x : d.w2) x = n2(rng);
    return d;
}

Discriminator Discriminator::zeros_like() const
{
    Discriminator z = *this;
    std::fill(z.w1.begin(), z.w1.end(), 0.0);
    std::fill(z.b1.begin(), z.b1.end(), 0.0);
    std::fill(z.w2.begin(), z.w2.end(), 0.0);
    z.b2 = {0.0};
    return z;
}

std::vector<std::vector<double>*> Discriminator::tensors() { return {&w1, &b1, &w2, &b2}; }

namespace {

std::vector<double> avg_pool(const Discriminator& d, const Image& x)
{
    if (x.width != d.width || x.height != d.height || x.channels != d.channels)
        throw std::invalid_argument("discriminator input has wrong shape");
    const int pw = d.width / d.pool, ph = d.height / d.pool, C = d.channels;
    std::vector<double> f(static_cast<std::size_t>(pw) * ph * C, 0.0);
    const double inv = 1.0 / (d.pool * d.pool);
    for (int y = 0; y < d.height; ++y)
        for (int xx = 0; xx < d.width; ++xx)
            for (int c = 0; c < C; ++c)
                f[((y / d.pool) * pw + xx / d.pool) * C + c] += x.at(xx, y, c) * inv;
    return f;
}

std::vector<double> hidden_pre(const Discriminator& d, const std::vector<double>& f)
{
    const int F = d.features();
    std::vector<double> h(d.hidden);
    for (int i = 0; i < d.hidden; ++i) {
        double s = d.b1[i];
        for (int j = 0; j < F; ++j) s += d.w1[static_cast<std::size_t>(i) * F + j] * f[j];
        h[i] = s;
    }
    return h;
}

} // namespace

double Discriminator::forward(const Image& x) const
{
    const auto h = hidden_pre(*this, avg_pool(*this, x));
    double out = b2[0];
    for (int i = 0; i < hidden; ++i) out += w2[i] * leaky(h[i]);
    return out;
}

Image Discriminator::backward(const Image& x, double d_logit, Discriminator& grad) const
{
    const auto f = avg_pool(*this, x);
    const auto h = hidden_pre(*this, f);
    const int F = features();
    std::vector<double> df(F, 0.0);
    grad.b2[0] += d_logit;
    for (int i = 0; i < hidden; ++i) {
        grad.w2[i] += d_logit * leaky(h[i]);
        const double dh = d_logit * w2[i] * leaky_slope(h[i]);
        grad.b1[i] += dh;
        for (int j = 0; j < F; ++j) {
            grad.w1[static_cast<std::size_t>(i) * F + j] += dh * f[j];
            df[j] += dh * w1[static_cast<std::size_t>(i) * F + j];
        }
    }
    Image dx(width, height, channels);
    const int pw = width / pool, C = channels;
    const double inv = 1.0 / (pool * pool);
    for (int y = 0; y < height; ++y)
        for (int xx = 0; xx < width; ++xx)
            for (int c = 0; c < C; ++c) dx.at(xx, y, c) = df[((y / pool) * pw + xx / pool) * C + c] * inv;
    return dx;
}

double Discriminator::r1(const Image& x, Discriminator* grad, double scale) const
{
    // d logit / d pooled = v = W1^T u with u = slope * w2; each pooled value
    // averages pool^2 pixels, so |d logit / d image|^2 = |v|^2 / pool^2.
    // The slopes are piecewise constant, so the penalty is quadratic in
    // (W1, w2) almost everywhere.
    const auto h = hidden_pre(*this, avg_pool(*this, x));
    const int F = features();
    const double k2 = static_cast<double>(pool * pool);
    std::vector<double> u(hidden), v(F, 0.0);
    for (int i = 0; i < hidden; ++i) {
        u[i] = leaky_slope(h[i]) * w2[i];
        for (int j = 0; j < F; ++j) v[j] += w1[static_cast<std::size_t>(i) * F + j] * u[i];
    }
    double sq = 0.0;
    for (double vj : v) sq += vj * vj;
    sq /= k2;
    if (grad) {
        for (int i = 0; i < hidden; ++i) {
            double w1v = 0.0;
            for (int j = 0; j < F; ++j) {
                grad->w1[static_cast<std::size_t>(i) * F + j] += scale * 2.0 * u[i] * v[j] / k2;
                w1v += w1[static_cast<std::size_t>(i) * F + j] * v[j];
            }
            grad->w2[i] += scale * 2.0 * leaky_slope(h[i]) * w1v / k2;
        }
    }
    return sq;
}

// ---------------------------------------------------------------- generator

std::vector<std::vector<double>*> ToyGenerator::tensors()
{
    std::vector<std::vector<double>*> t;
    for (auto& l : map_geo)
        for (auto* p : l.tensors()) t.push_back(p);
    for (auto& l : map_tex)
        for (auto* p : l.tensors()) t.push_back(p);
    for (auto& l : geo_net)
        for (auto* p : l.tensors()) t.push_back(p);
    for (auto* p : triplane.tensors()) t.push_back(p);
    for (auto& l : decoder)
        for (auto* p : l.tensors()) t.push_back(p);
    return t;
}

ToyGenerator ToyGenerator::zeros_like() const
{
    ToyGenerator z;
    for (const auto& l : map_geo) z.map_geo.push_back(l.zeros_like());
    for (const auto& l : map_tex) z.map_tex.push_back(l.zeros_like());
    z.geo_net = texmesh::zeros_like(geo_net);
    z.triplane = triplane.zeros_like();
    z.decoder = texmesh::zeros_like(decoder);
    z.prior_radius = prior_radius;
    z.prior_sharpness = prior_sharpness;
    z.field_scale = field_scale;
    return z;
}

ToyGenerator make_toy_generator(const ToyGANConfig& cfg, std::mt19937_64& rng)
{
    ToyGenerator g;
    g.map_geo = {FCLayer::random(cfg.latent_dim, cfg.w_dim, rng), FCLayer::random(cfg.w_dim, cfg.w_dim, rng)};
    g.map_tex = {FCLayer::random(cfg.latent_dim, cfg.w_dim, rng), FCLayer::random(cfg.w_dim, cfg.w_dim, rng)};
    const int geo_dims[] = {6, cfg.geo_hidden, cfg.geo_hidden, 4};
    g.geo_net = make_modfc_stack(geo_dims, cfg.w_dim, rng);
    g.triplane = TriPlane::random(cfg.triplane_res, cfg.triplane_channels, 0.1, rng);
    const int dec_dims[] = {cfg.triplane_channels + 6, cfg.decoder_hidden, 3};
    g.decoder = make_modfc_stack(dec_dims, 2 * cfg.w_dim, rng);
    g.grid = build_regular_grid(cfg.tet_res);
    g.grid.edges = unique_edges(g.grid);
    g.prior_radius = 0.5 * (cfg.radius_min + cfg.radius_max);
    g.prior_sharpness = cfg.prior_sharpness;
    g.field_scale = cfg.field_scale;
    return g;
}

GeometryField generator_field(const ToyGenerator& gen, std::span<const double> w_geo)
{
    ModFCStackEval eval(gen.geo_net, w_geo);
    const double bound = 0.5 / gen.grid.resolution;
    GeometryField f = GeometryField::zeros(gen.grid.vertex_count(), bound);
    for (std::size_t v = 0; v < gen.grid.vertex_count(); ++v) {
        const Vec3& p = gen.grid.vertices[v];
        const auto y = eval.forward(positional_encoding(p));
        f.sdf[v] = std::tanh(gen.field_scale * y[0] + gen.prior_sharpness * (norm(p) - gen.prior_radius));
        f.deform[v] = Vec3(std::tanh(y[1]), std::tanh(y[2]), std::tanh(y[3])) * bound;
    }
    return f;
}

namespace {

void generator_field_backward(const ToyGenerator& gen, std::span<const double> w_geo, const GeometryField& f,
                              std::span<const double> d_sdf, std::span<const Vec3> d_deform, ModFCStack& d_net,
                              std::span<double> dw)
{
    ModFCStackEval eval(gen.geo_net, w_geo);
    std::vector<std::vector<double>> acts;
    for (std::size_t v = 0; v < gen.grid.vertex_count(); ++v) {
        if (d_sdf[v] == 0.0 && d_deform[v] == Vec3{}) continue;
        eval.forward(positional_encoding(gen.grid.vertices[v]), &acts);
        std::array<double, 4> dy{};
        dy[0] = d_sdf[v] * (1.0 - f.sdf[v] * f.sdf[v]) * gen.field_scale;
        for (int k = 0; k < 3; ++k) {
            const double t = f.deform[v][k] / f.deform_bound;
            dy[k + 1] = d_deform[v][k] * f.deform_bound * (1.0 - t * t);
        }
        eval.backward(acts, dy, d_net);
    }
    eval.finish(d_net, dw);
}

struct FakeSample {
    std::vector<double> z;
    std::vector<std::vector<double>> acts_geo, acts_tex;
    LatentCode w_geo, w_tex;
    GeometryField field;
    SurfaceMesh mesh;
    Camera cam;
    RenderedView view;
};

FakeSample make_fake(const ToyGenerator& gen, std::vector<double> z, const Camera& cam)
{
    FakeSample s;
    s.z = std::move(z);
    s.cam = cam;
    s.w_geo = mapping_network(s.z, gen.map_geo, &s.acts_geo);
    s.w_tex = mapping_network(s.z, gen.map_tex, &s.acts_tex);
    s.field = generator_field(gen, s.w_geo);
    s.mesh = marching_tetrahedra(gen.grid, s.field);
    ModFCStackEval decoder(gen.decoder, concat(s.w_geo, s.w_tex));
    s.view = render_view(s.mesh, cam, gen.triplane, decoder);
    return s;
}

// Mean over sign-flip edges, matching fit_objective.
double normalized_reg(const GeometryField& f, const std::vector<Edge>& edges, std::vector<double>* grad)
{
    const double flips = std::max<double>(1.0, sign_flip_count(f.sdf, edges));
    if (grad) {
        *grad = sdf_regularizer_grad(f.sdf, edges);
        for (auto& g : *grad) g /= flips;
    }
    return sdf_regularizer(f, edges) / flips;
}

} // namespace

SurfaceMesh generate_mesh(const ToyGenerator& gen, std::span<const double> z)
{
    const auto w_geo = mapping_network(z, gen.map_geo);
    return marching_tetrahedra(gen.grid, generator_field(gen, w_geo));
}

// ---------------------------------------------------------------- training

ToyGANResult toy_gan_train(const ToyGANConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    ToyGANResult res;
    res.generator = make_toy_generator(cfg, rng);
    ToyGenerator& gen = res.generator;
    const int S = cfg.image_size;
    res.d_rgb = Discriminator::random(S, S, 3, cfg.disc_pool, cfg.disc_hidden, rng);
    res.d_mask = Discriminator::random(S, S, 1, cfg.disc_pool, cfg.disc_hidden, rng);

    // Real data: spheres of a few radii, coloured by normalized position.
    constexpr int kFamily = 8;
    std::vector<SurfaceMesh> family;
    std::vector<AnalyticShape> shapes;
    for (int i = 0; i < kFamily; ++i) {
        const double r = cfg.radius_min + (cfg.radius_max - cfg.radius_min) * i / (kFamily - 1);
        shapes.push_back(sphere_shape(r));
        family.push_back(extract_analytic(shapes.back().sdf, 24));
    }
    CameraDistribution cams = cfg.cameras;
    cams.width = cams.height = S;

    std::vector<AdamState> adam_g(gen.tensors().size()), adam_dr(4), adam_dm(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, kFamily - 1);
    const int B = cfg.batch;

    for (int step = 0; step < cfg.steps; ++step) {
        GANStep h;
        h.step = step;

        std::vector<Image> real_rgb, real_mask;
        for (int b = 0; b < B; ++b) {
            const Camera cam = sample_camera(cams, rng);
            const int k = pick(rng);
            const GBuffer g = rasterize(family[k], cam);
            real_rgb.push_back(shade_with_texture(g, shapes[k].color));
            real_mask.push_back(antialias_silhouette(g, family[k], cam).mask);
        }
        std::vector<FakeSample> fakes;
        for (int b = 0; b < B; ++b) {
            std::vector<double> z(cfg.latent_dim);
            for (auto& x : z) x = normal(rng);
            fakes.push_back(make_fake(gen, std::move(z), sample_camera(cams, rng)));
        }

        // Discriminator update.
        h.r1_applied = step % cfg.r1_interval == 0;
        const double r1_scale = cfg.r1_weight * cfg.r1_interval;
        auto d_update = [&](Discriminator& d, std::vector<AdamState>& st, const std::vector<Image>& real,
                            auto fake_image, double& loss_out, double& r1_out) {
            Discriminator grad = d.zeros_like();
            std::vector<double> lr(B), lf(B), sq;
            for (int b = 0; b < B; ++b) {
                lr[b] = d.forward(real[b]);
                lf[b] = d.forward(fake_image(fakes[b]));
                d.backward(fake_image(fakes[b]), g_grad(-lf[b]) / B, grad);
                d.backward(real[b], -g_grad(lr[b]) / B, grad);
                if (h.r1_applied) sq.push_back(d.r1(real[b], &grad, r1_scale / B));
            }
            loss_out = discriminator_objective(lr, lf, sq, h.r1_applied ? r1_scale : 0.0);
            r1_out = 0.0;
            for (double v : sq) r1_out += v / static_cast<double>(sq.size());
            auto p = d.tensors();
            auto g = grad.tensors();
            for (std::size_t k = 0; k < p.size(); ++k) adam_update(*p[k], *g[k], st[k], cfg.adam);
        };
        d_update(res.d_rgb, adam_dr, real_rgb, [](const FakeSample& f) -> const Image& { return f.view.rgb; },
                 h.d_rgb, h.r1_rgb);
        d_update(res.d_mask, adam_dm, real_mask,
                 [](const FakeSample& f) -> const Image& { return f.view.soft.mask; }, h.d_mask, h.r1_mask);

        // Generator update on the same samples against the updated discriminators.
        ToyGenerator grad = gen.zeros_like();
        std::vector<double> logit_rgb(B), logit_mask(B);
        double reg = 0.0;
        for (int b = 0; b < B; ++b) {
            FakeSample& f = fakes[b];
            logit_rgb[b] = res.d_rgb.forward(f.view.rgb);
            logit_mask[b] = res.d_mask.forward(f.view.soft.mask);
            Discriminator scratch_r = res.d_rgb.zeros_like(), scratch_m = res.d_mask.zeros_like();
            const Image d_rgb = res.d_rgb.backward(f.view.rgb, -g_grad(logit_rgb[b]) / B, scratch_r);
            const Image d_mask = res.d_mask.backward(f.view.soft.mask, -g_grad(logit_mask[b]) / B, scratch_m);

            const LatentCode w = concat(f.w_geo, f.w_tex);
            ModFCStackEval decoder(gen.decoder, w);
            std::vector<Vec3> d_vertices(f.mesh.vertices.size());
            if (!f.mesh.empty())
                render_view_backward(f.view, f.mesh, f.cam, gen.triplane, decoder, d_rgb, d_mask, d_vertices,
                                     grad.triplane, grad.decoder);
            std::vector<double> dw(w.size(), 0.0);
            decoder.finish(grad.decoder, dw);

            std::vector<double> d_sdf;
            reg += normalized_reg(f.field, gen.grid.edges, &d_sdf) / B;
            for (auto& d : d_sdf) d *= cfg.reg_weight / B;
            std::vector<Vec3> d_deform(gen.grid.vertex_count());
            if (!f.mesh.empty()) {
                const MeshGradients mg = marching_tetrahedra_backward(gen.grid, f.field, f.mesh, d_vertices);
                for (std::size_t v = 0; v < d_sdf.size(); ++v) d_sdf[v] += mg.d_sdf[v];
                d_deform = mg.d_deform;
            }
            std::vector<double> dw_geo(dw.begin(), dw.begin() + cfg.w_dim);
            const std::vector<double> dw_tex(dw.begin() + cfg.w_dim, dw.end());
            generator_field_backward(gen, f.w_geo, f.field, d_sdf, d_deform, grad.geo_net, dw_geo);
            mapping_network_backward(gen.map_geo, f.acts_geo, dw_geo, grad.map_geo);
            mapping_network_backward(gen.map_tex, f.acts_tex, dw_tex, grad.map_tex);
        }
        h.g_rgb = generator_loss(logit_rgb);
        h.g_mask = generator_loss(logit_mask);
        h.reg = reg;
        auto p = gen.tensors();
        auto g = grad.tensors();
        for (std::size_t k = 0; k < p.size(); ++k) adam_update(*p[k], *g[k], adam_g[k], cfg.adam);
        res.history.push_back(h);
    }
    return res;
}

std::vector<TraceRow> gan_trace(const ToyGANResult& r)
{
    std::vector<TraceRow> rows;
    for (const auto& h : r.history) {
        rows.push_back({h.step, "d_rgb", h.d_rgb});
        rows.push_back({h.step, "d_mask", h.d_mask});
        rows.push_back({h.step, "g_rgb", h.g_rgb});
        rows.push_back({h.step, "g_mask", h.g_mask});
        rows.push_back({h.step, "reg", h.reg});
        if (h.r1_applied) {
            rows.push_back({h.step, "r1_rgb", h.r1_rgb});
            rows.push_back({h.step, "r1_mask", h.r1_mask});
        }
    }
    return rows;
}

} // namespace texmesh
