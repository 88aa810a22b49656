#include <doctest.h>

#include "support.hpp"
#include "texmesh/fields.hpp"
#include "texmesh/isosurface.hpp"

using namespace texmesh;
using testsupport::central_diff;
using testsupport::rel_err;

namespace {

/// Independent bilinear lookup: plane e covers axes (a, b) with a along
/// columns; node (i, j) sits at (-1 + 2i/(N-1), -1 + 2j/(N-1)).
std::vector<double> oracle_sample(const TriPlane& tp, const Vec3& p)
{
    const int axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    const int n = tp.resolution, c = tp.channels;
    std::vector<double> out(c, 0.0);
    for (int e = 0; e < 3; ++e) {
        const double u = (std::clamp(p[axes[e][0]], -1.0, 1.0) + 1.0) / 2.0 * (n - 1);
        const double v = (std::clamp(p[axes[e][1]], -1.0, 1.0) + 1.0) / 2.0 * (n - 1);
        const int i = std::min(static_cast<int>(u), n - 2), j = std::min(static_cast<int>(v), n - 2);
        const double a = u - i, b = v - j;
        for (int k = 0; k < c; ++k) {
            auto node = [&](int ii, int jj) { return tp.planes[e][(static_cast<std::size_t>(jj) * n + ii) * c + k]; };
            out[k] += (1 - a) * (1 - b) * node(i, j) + a * (1 - b) * node(i + 1, j) + (1 - a) * b * node(i, j + 1) +
                      a * b * node(i + 1, j + 1);
        }
    }
    return out;
}

double weighted(const std::vector<double>& y, const std::vector<double>& c)
{
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * c[i];
    return s;
}

} // namespace

TEST_CASE("sample_triplane examples")
{
    TriPlane tp = TriPlane::zeros(5, 1);
    for (int e = 0; e < 3; ++e) std::fill(tp.planes[e].begin(), tp.planes[e].end(), e + 1.0);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) CHECK(sample_triplane(tp, testsupport::uniform_vec3(-1, 1, rng))[0] == doctest::Approx(6.0));

    // Nodes store a + b*u + c*v on each plane; sampling reproduces it exactly.
    const int n = 7;
    TriPlane lin = TriPlane::zeros(n, 1);
    const double coef[3][3] = {{0.3, -1.2, 0.7}, {1.0, 0.25, -0.5}, {-0.4, 0.9, 2.0}};
    const int axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int e = 0; e < 3; ++e)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double u = -1.0 + 2.0 * i / (n - 1), v = -1.0 + 2.0 * j / (n - 1);
                lin.at(e, j, i, 0) = coef[e][0] + coef[e][1] * u + coef[e][2] * v;
            }
    for (int t = 0; t < 50; ++t) {
        const Vec3 p = testsupport::uniform_vec3(-1, 1, rng);
        double expect = 0.0;
        for (int e = 0; e < 3; ++e) expect += coef[e][0] + coef[e][1] * p[axes[e][0]] + coef[e][2] * p[axes[e][1]];
        CHECK(std::abs(sample_triplane(lin, p)[0] - expect) < 1e-12);
    }

    const TriPlane r = TriPlane::random(6, 4, 1.0, rng);
    for (int t = 0; t < 100; ++t) {
        const Vec3 p = testsupport::uniform_vec3(-1.2, 1.2, rng);
        const auto got = sample_triplane(r, p);
        const auto want = oracle_sample(r, p);
        for (int k = 0; k < 4; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-12);
    }
}

TEST_CASE("sample_triplane is linear in the plane features")
{
    std::mt19937_64 rng(2);
    const TriPlane a = TriPlane::random(5, 3, 1.0, rng), b = TriPlane::random(5, 3, 1.0, rng);
    TriPlane mix = TriPlane::zeros(5, 3);
    const double alpha = 0.7, beta = -1.9;
    for (int e = 0; e < 3; ++e)
        for (std::size_t i = 0; i < mix.planes[e].size(); ++i)
            mix.planes[e][i] = alpha * a.planes[e][i] + beta * b.planes[e][i];
    for (int t = 0; t < 30; ++t) {
        const Vec3 p = testsupport::uniform_vec3(-1, 1, rng);
        const auto sa = sample_triplane(a, p), sb = sample_triplane(b, p), sm = sample_triplane(mix, p);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(sm[k] - (alpha * sa[k] + beta * sb[k])) < 1e-12);
    }
}

TEST_CASE("sample_triplane backward matches central differences")
{
    std::mt19937_64 rng(3);
    for (int inst = 0; inst < 20; ++inst) {
        TriPlane tp = TriPlane::random(4 + inst % 3, 3, 1.0, rng);
        const Vec3 p0 = testsupport::uniform_vec3(-0.95, 0.95, rng);
        const auto c = testsupport::uniform_vec(3, -1, 1, rng);
        Vec3 p = p0;
        auto loss = [&] { return weighted(sample_triplane(tp, p), c); };
        TriPlane d = tp.zeros_like();
        const Vec3 dp = sample_triplane_backward(tp, p, c, d);
        for (int k = 0; k < 3; ++k) CHECK(rel_err(dp[k], central_diff(loss, p[k])) < 1e-4);
        for (int e = 0; e < 3; ++e)
            for (std::size_t i = 0; i < tp.planes[e].size(); ++i)
                if (d.planes[e][i] != 0.0) CHECK(rel_err(d.planes[e][i], central_diff(loss, tp.planes[e][i])) < 1e-4);
    }
}

TEST_CASE("positional_encoding")
{
    const auto z = positional_encoding({0, 0, 0});
    CHECK(z == std::array<double, 6>{0, 0, 0, 1, 1, 1});
    const auto h = positional_encoding({M_PI / 2, 0, 0});
    CHECK(h[0] == doctest::Approx(1.0));
    CHECK(std::abs(h[3]) < 1e-15);
    CHECK(h[4] == 1.0);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        Vec3 p = testsupport::uniform_vec3(-3, 3, rng);
        const auto pe = positional_encoding(p);
        for (int k = 0; k < 3; ++k) {
            CHECK(pe[k] == doctest::Approx(std::sin(p[k])).epsilon(1e-15));
            CHECK(pe[k + 3] == doctest::Approx(std::cos(p[k])).epsilon(1e-15));
        }
        const auto c = testsupport::uniform_vec(6, -1, 1, rng);
        auto loss = [&] {
            const auto e = positional_encoding(p);
            return weighted(std::vector<double>(e.begin(), e.end()), c);
        };
        const Vec3 dp = positional_encoding_backward(p, c);
        for (int k = 0; k < 3; ++k) CHECK(rel_err(dp[k], central_diff(loss, p[k])) < 1e-6);
    }
}

TEST_CASE("modulation and demodulation")
{
    ModFCLayer l = ModFCLayer::create(2, 1, 1, false);
    l.weight = {3, 4};
    l.affine_bias = {1, 1};
    const auto mod = modulate(l, std::vector<double>{0.0});
    CHECK(mod.weight[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(mod.weight[1] == doctest::Approx(0.8).epsilon(1e-9));

    std::mt19937_64 rng(5);
    ModFCLayer r = ModFCLayer::random(5, 4, 3, true, rng);
    const auto x = testsupport::uniform_vec(5, -1, 1, rng);
    // A uniform positive style c*1 (zero affine weights, bias c) is cancelled by demodulation.
    std::fill(r.affine_weight.begin(), r.affine_weight.end(), 0.0);
    std::fill(r.affine_bias.begin(), r.affine_bias.end(), 1.0);
    const auto y1 = modfc_forward(r, x, std::vector<double>(3, 0.0));
    for (double c : {0.5, 7.0}) {
        std::fill(r.affine_bias.begin(), r.affine_bias.end(), c);
        const auto yc = modfc_forward(r, x, std::vector<double>(3, 0.0));
        for (int j = 0; j < 4; ++j) CHECK(yc[j] == doctest::Approx(y1[j]).epsilon(1e-6));
    }

    ModFCLayer q = ModFCLayer::random(6, 5, 4, true, rng);
    const auto m = modulate(q, testsupport::uniform_vec(4, -1, 1, rng));
    for (int j = 0; j < 5; ++j) {
        double s = 0.0;
        for (int i = 0; i < 6; ++i) s += m.weight[j * 6 + i] * m.weight[j * 6 + i];
        CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-6);
    }
    CHECK_THROWS_AS(modfc_forward(q, std::vector<double>(5), std::vector<double>(4)), std::invalid_argument);
    CHECK_THROWS_AS(modfc_forward(q, std::vector<double>(6), std::vector<double>(3)), std::invalid_argument);

    // Pure: same inputs give bitwise-same outputs.
    const std::vector<double> in6(6, 0.3), style(4, 0.2);
    const auto a = modfc_forward(q, in6, style);
    const auto b = modfc_forward(q, in6, style);
    CHECK(a == b);
}

TEST_CASE("ModFC stack backward matches central differences")
{
    std::mt19937_64 rng(6);
    for (int inst = 0; inst < 20; ++inst) {
        std::uniform_int_distribution<int> dim(1, 8);
        const int dims[] = {dim(rng), dim(rng), dim(rng)};
        const int style = dim(rng);
        ModFCStack net = make_modfc_stack(dims, style, rng);
        auto x = testsupport::uniform_vec(dims[0], -1, 1, rng);
        auto w = testsupport::uniform_vec(style, -1, 1, rng);
        const auto c = testsupport::uniform_vec(dims[2], -1, 1, rng);
        auto loss = [&] {
            ModFCStackEval e(net, w);
            return weighted(e.forward(x), c);
        };
        ModFCStack grad = zeros_like(net);
        std::vector<double> dw(style, 0.0);
        ModFCStackEval eval(net, w);
        std::vector<std::vector<double>> acts;
        eval.forward(x, &acts);
        const auto dx = eval.backward(acts, c, grad);
        eval.finish(grad, dw);
        for (int i = 0; i < dims[0]; ++i) CHECK(rel_err(dx[i], central_diff(loss, x[i])) < 1e-5);
        for (int i = 0; i < style; ++i) CHECK(rel_err(dw[i], central_diff(loss, w[i])) < 1e-5);
        for (std::size_t l = 0; l < net.size(); ++l) {
            auto params = net[l].tensors();
            auto grads = grad[l].tensors();
            for (std::size_t t = 0; t < params.size(); ++t)
                for (std::size_t i = 0; i < params[t]->size(); ++i) {
                    // A leaky-ReLU kink inside the step spoils the wide difference; retry narrow.
                    const double an = (*grads[t])[i];
                    double& x = (*params[t])[i];
                    CHECK((testsupport::grad_close(an, central_diff(loss, x), 1e-5) ||
                           testsupport::grad_close(an, central_diff(loss, x, 1e-7), 1e-5)));
                }
        }
    }
}

TEST_CASE("mapping network")
{
    std::mt19937_64 rng(7);
    FCLayer zero = FCLayer::random(4, 4, rng).zeros_like();
    const std::vector<FCLayer> zl{zero};
    for (double v : mapping_network(testsupport::uniform_vec(4, -1, 1, rng), zl)) CHECK(v == 0.0);

    FCLayer id = zero;
    for (int i = 0; i < 4; ++i) id.weight[i * 4 + i] = 1.0;
    const std::vector<FCLayer> il{id};
    const auto z = testsupport::uniform_vec(4, 0.1, 2, rng);
    CHECK(mapping_network(z, il) == z);

    const std::vector<FCLayer> net{FCLayer::random(5, 6, rng), FCLayer::random(6, 3, rng)};
    auto zin = testsupport::uniform_vec(5, -1, 1, rng);
    std::vector<double> h = zin;
    for (const auto& L : net) {
        std::vector<double> o(L.out_dim);
        for (int j = 0; j < L.out_dim; ++j) {
            double s = L.bias[j];
            for (int i = 0; i < L.in_dim; ++i) s += L.weight[j * L.in_dim + i] * h[i];
            o[j] = s > 0 ? s : 0.2 * s;
        }
        h = o;
    }
    const auto got = mapping_network(zin, net);
    for (int j = 0; j < 3; ++j) CHECK(got[j] == doctest::Approx(h[j]).epsilon(1e-14));
    CHECK_THROWS_AS(mapping_network(std::vector<double>(4), net), std::invalid_argument);

    std::vector<FCLayer> params = net;
    const auto c = testsupport::uniform_vec(3, -1, 1, rng);
    auto loss = [&] { return weighted(mapping_network(zin, params), c); };
    std::vector<std::vector<double>> acts;
    mapping_network(zin, params, &acts);
    std::vector<FCLayer> grad{params[0].zeros_like(), params[1].zeros_like()};
    const auto dz = mapping_network_backward(params, acts, c, grad);
    for (int i = 0; i < 5; ++i) CHECK(rel_err(dz[i], central_diff(loss, zin[i])) < 1e-5);
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t i = 0; i < params[l].weight.size(); ++i)
            CHECK(rel_err(grad[l].weight[i], central_diff(loss, params[l].weight[i])) < 1e-5);
}

TEST_CASE("texture_color")
{
    std::mt19937_64 rng(8);
    TriPlane tp = TriPlane::random(8, 4, 0.5, rng);
    const int dims[] = {4 + 6, 16, 3};
    ModFCStack dec = make_modfc_stack(dims, 6, rng);
    ModFCStack zero = zeros_like(dec);
    const auto wg = testsupport::uniform_vec(3, -1, 1, rng), wt = testsupport::uniform_vec(3, -1, 1, rng);
    const Rgb grey = texture_color({0.1, 0.2, 0.3}, tp, zero, wg, wt);
    CHECK(grey == Rgb{0.5, 0.5, 0.5});
    for (int t = 0; t < 100; ++t) {
        const Rgb c = texture_color(testsupport::uniform_vec3(-1, 1, rng), tp, dec, wg, wt);
        for (int k = 0; k < 3; ++k) CHECK((c[k] >= 0.0 && c[k] <= 1.0));
    }
    const int bad_dims[] = {5, 3};
    CHECK_THROWS_AS(texture_color({0, 0, 0}, tp, make_modfc_stack(bad_dims, 6, rng), wg, wt), std::invalid_argument);

    // Full chain: position, planes, decoder and latent.
    for (int inst = 0; inst < 5; ++inst) {
        Vec3 p = testsupport::uniform_vec3(-0.9, 0.9, rng);
        auto w = concat(wg, wt);
        const Rgb up{0.3, -0.7, 1.1};
        auto loss = [&] {
            ModFCStackEval e(dec, w);
            return dot(texture_color(p, tp, e), up);
        };
        ModFCStackEval eval(dec, w);
        TriPlane dtp = tp.zeros_like();
        ModFCStack ddec = zeros_like(dec);
        std::vector<double> dw(w.size(), 0.0);
        const Vec3 dp = texture_color_backward(p, tp, eval, up, dtp, ddec);
        eval.finish(ddec, dw);
        for (int k = 0; k < 3; ++k) CHECK(rel_err(dp[k], central_diff(loss, p[k])) < 1e-4);
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(rel_err(dw[i], central_diff(loss, w[i])) < 1e-4);
        for (int e = 0; e < 3; ++e)
            for (std::size_t i = 0; i < tp.planes[e].size(); i += 7)
                CHECK(rel_err(dtp.planes[e][i], central_diff(loss, tp.planes[e][i])) < 1e-4);
        for (std::size_t i = 0; i < dec[0].weight.size(); i += 5)
            CHECK(rel_err(ddec[0].weight[i], central_diff(loss, dec[0].weight[i])) < 1e-4);
    }
}

TEST_CASE("toy_geometry_field")
{
    std::mt19937_64 rng(9);
    const TetGrid g = build_regular_grid(3);
    const int dims[] = {6, 8, 4};
    ModFCStack net = make_modfc_stack(dims, 4, rng);
    const GeometryField zf = toy_geometry_field(g, std::vector<double>(4, 0.3), zeros_like(net));
    for (double s : zf.sdf) CHECK(s == 0.0);
    for (const Vec3& d : zf.deform) CHECK(d == Vec3{});

    for (int t = 0; t < 5; ++t) {
        ModFCStack r = make_modfc_stack(dims, 4, rng);
        for (auto& l : r)
            for (auto& x : l.weight) x *= 10.0;
        const GeometryField f = toy_geometry_field(g, testsupport::uniform_vec(4, -2, 2, rng), r);
        for (double s : f.sdf) CHECK((s >= -1.0 && s <= 1.0));
        for (const Vec3& d : f.deform)
            for (int k = 0; k < 3; ++k) CHECK(std::abs(d[k]) <= 1.0 / 3);
    }
    const int bad[] = {6, 3};
    CHECK_THROWS_AS(toy_geometry_field(g, std::vector<double>(4), make_modfc_stack(bad, 4, rng)), std::invalid_argument);

    // Mesh vertices with respect to the latent through the whole chain.
    int checked = 0;
    for (int inst = 0; inst < 10 && checked < 3; ++inst) {
        auto w = testsupport::uniform_vec(4, -1, 1, rng);
        ModFCStack n2 = make_modfc_stack(dims, 4, rng);
        const GeometryField f = toy_geometry_field(g, w, n2);
        const SurfaceMesh m = marching_tetrahedra(g, f);
        if (m.vertices.size() < 3) continue;
        std::vector<Vec3> up(m.vertices.size());
        for (auto& u : up) u = testsupport::uniform_vec3(-1, 1, rng);
        auto loss = [&] {
            const SurfaceMesh mm = marching_tetrahedra(g, toy_geometry_field(g, w, n2));
            double s = 0.0;
            for (std::size_t v = 0; v < mm.vertices.size(); ++v) s += dot(up[v], mm.vertices[v]);
            return s;
        };
        const MeshGradients mg = marching_tetrahedra_backward(g, f, m, up);
        ModFCStack dnet = zeros_like(n2);
        std::vector<double> dw(4, 0.0);
        toy_geometry_field_backward(g, w, n2, mg.d_sdf, mg.d_deform, dnet, dw);
        for (int i = 0; i < 4; ++i) CHECK(rel_err(dw[i], central_diff(loss, w[i], 1e-6)) < 1e-4);
        ++checked;
    }
    CHECK(checked > 0);
}
