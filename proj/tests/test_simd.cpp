#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "texmesh/simd/kernels.hpp"

using namespace texmesh;
using simd::Isa;

namespace {

struct Cloud {
    std::vector<double> x, y, z;
};

Cloud random_cloud(std::size_t n, std::mt19937_64& rng)
{
    return {testsupport::uniform_vec(n, -1, 1, rng), testsupport::uniform_vec(n, -1, 1, rng),
            testsupport::uniform_vec(n, -1, 1, rng)};
}

} // namespace

TEST_CASE("dispatch")
{
    CHECK(simd::isa_available(Isa::Scalar));
    CHECK(simd::kernels(Isa::Scalar).isa == Isa::Scalar);
    CHECK(simd::isa_name(Isa::Avx2) == "avx2");
    const auto& active = simd::kernels();
    MESSAGE("active kernels: ", simd::isa_name(active.isa));
    if (!simd::isa_available(Isa::Avx2)) CHECK_THROWS_AS(simd::kernels(Isa::Avx2), std::invalid_argument);
}

TEST_CASE("scalar and AVX2 kernels agree")
{
    if (!simd::isa_available(Isa::Avx2)) {
        MESSAGE("AVX2 unavailable; equivalence not exercised");
        return;
    }
    const auto& s = simd::kernels(Isa::Scalar);
    const auto& v = simd::kernels(Isa::Avx2);
    std::mt19937_64 rng(21);

    SUBCASE("nearest_sq is bit-identical")
    {
        for (std::size_t n : {1u, 3u, 4u, 5u, 17u, 256u, 1001u}) {
            const Cloud c = random_cloud(n, rng);
            for (int q = 0; q < 50; ++q) {
                const auto p = testsupport::uniform_vec(3, -1.5, 1.5, rng);
                CHECK(s.nearest_sq(p[0], p[1], p[2], c.x.data(), c.y.data(), c.z.data(), n) ==
                      v.nearest_sq(p[0], p[1], p[2], c.x.data(), c.y.data(), c.z.data(), n));
            }
            // Query on a cloud point gives exactly zero.
            CHECK(v.nearest_sq(c.x[n - 1], c.y[n - 1], c.z[n - 1], c.x.data(), c.y.data(), c.z.data(), n) == 0.0);
        }
    }

    SUBCASE("edge_coverage_row is bit-identical")
    {
        std::vector<std::uint8_t> a(64), b(64);
        for (int t = 0; t < 300; ++t) {
            const auto p = testsupport::uniform_vec(6, -4, 36, rng);
            simd::EdgeFunctions e{};
            for (int k = 0; k < 3; ++k) {
                const int i = k, j = (k + 1) % 3;
                e.a[k] = p[2 * i + 1] - p[2 * j + 1];
                e.b[k] = p[2 * j] - p[2 * i];
                e.c[k] = p[2 * i] * p[2 * j + 1] - p[2 * j] * p[2 * i + 1];
            }
            if (t % 3 == 0) {
                // Integer-aligned edges put pixel centres exactly on an edge.
                e.a[0] = 1.0;
                e.b[0] = 0.0;
                e.c[0] = -std::floor(p[0]) - 0.5;
            }
            for (int row = 0; row < 32; ++row) {
                const int x0 = row % 5, x1 = 32 + row % 7;
                s.edge_coverage_row(e, row + 0.5, x0, x1, a.data());
                v.edge_coverage_row(e, row + 0.5, x0, x1, b.data());
                CHECK(std::equal(a.begin(), a.begin() + (x1 - x0), b.begin()));
            }
        }
    }

    SUBCASE("sg_basis matches to a few ulp")
    {
        for (double lambda : {0.0, 1e-6, 0.5, 2.133, 30.0, 1e3, 1e5}) {
            const std::size_t n = 203;
            Cloud c = random_cloud(n, rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = std::sqrt(c.x[i] * c.x[i] + c.y[i] * c.y[i] + c.z[i] * c.z[i]);
                c.x[i] /= r;
                c.y[i] /= r;
                c.z[i] /= r;
            }
            std::vector<double> a(n), b(n);
            const double ax = 0.0, ay = 0.6, az = 0.8;
            s.sg_basis(ax, ay, az, lambda, c.x.data(), c.y.data(), c.z.data(), n, a.data());
            v.sg_basis(ax, ay, az, lambda, c.x.data(), c.y.data(), c.z.data(), n, b.data());
            for (std::size_t i = 0; i < n; ++i) {
                if (a[i] < 1e-300) {
                    CHECK(b[i] < 1e-300);
                    continue;
                }
                INFO("lambda ", lambda, " i ", i);
                CHECK(std::abs(a[i] - b[i]) <= 4e-16 * a[i]);
            }
        }
        // Along the axis the lobe is exactly 1.
        const double one = 1.0, zero = 0.0;
        double out = 0.0;
        v.sg_basis(0, 0, 1, 50.0, &zero, &zero, &one, 1, &out);
        CHECK(out == 1.0);
    }
}
