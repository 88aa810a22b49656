#include <doctest.h>

#include "support.hpp"
#include "texmesh/metrics.hpp"

using namespace texmesh;

namespace {

PointCloud random_cloud(std::size_t n, std::mt19937_64& rng, double scale = 1.0)
{
    PointCloud c(n);
    for (auto& p : c) p = testsupport::uniform_vec3(-scale, scale, rng);
    return c;
}

double brute_chamfer(const PointCloud& x, const PointCloud& y)
{
    auto dir = [](const PointCloud& a, const PointCloud& b) {
        double acc = 0.0;
        for (const Vec3& p : a) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : b) {
                const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            acc += best;
        }
        return acc / static_cast<double>(a.size());
    };
    return dir(x, y) + dir(y, x);
}

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// Principal square root by the Denman-Beavers iteration, extended precision.
LMat sqrtm_db(const LMat& a)
{
    LMat y = a, z = LMat::Identity(a.rows(), a.cols());
    for (int it = 0; it < 60; ++it) {
        const LMat yi = y.inverse(), zi = z.inverse();
        y = (y + zi) * 0.5L;
        z = (z + yi) * 0.5L;
    }
    return y;
}

double frechet_ref(const EmbeddingStats& g, const EmbeddingStats& r)
{
    const LMat sg = g.covariance.cast<long double>(), sr = r.covariance.cast<long double>();
    const long double mu = (g.mean - r.mean).cast<long double>().squaredNorm();
    return static_cast<double>(mu + sg.trace() + sr.trace() - 2.0L * sqrtm_db(sg * sr).trace());
}

Eigen::MatrixXd random_psd(int d, std::mt19937_64& rng)
{
    Eigen::MatrixXd b(d, d);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) b(i, j) = n(rng);
    return b * b.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

} // namespace

TEST_CASE("sample_surface_points")
{
    SurfaceMesh tri;
    tri.vertices = {{0.1, 0.2, 0.0}, {0.9, 0.3, 0.0}, {0.4, 0.8, 0.0}};
    tri.faces = {{0, 1, 2}};
    std::mt19937_64 rng(1);
    const PointCloud pts = sample_surface_points(tri, 1000, rng);
    REQUIRE(pts.size() == 1000);
    auto edge = [](const Vec3& a, const Vec3& b, const Vec3& p) {
        return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
    for (const Vec3& p : pts) {
        CHECK(p.z == 0.0);
        CHECK(edge(tri.vertices[0], tri.vertices[1], p) >= -1e-15);
        CHECK(edge(tri.vertices[1], tri.vertices[2], p) >= -1e-15);
        CHECK(edge(tri.vertices[2], tri.vertices[0], p) >= -1e-15);
    }

    // Areas 1 and 3.
    SurfaceMesh two;
    two.vertices = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {0, 0, 5}, {3, 0, 5}, {0, 2, 5}};
    two.faces = {{0, 1, 2}, {3, 4, 5}};
    const std::size_t n = 10000;
    const PointCloud s = sample_surface_points(two, n, rng);
    std::size_t big = 0;
    for (const Vec3& p : s) big += p.z > 2.5;
    const double sigma = std::sqrt(n * 0.75 * 0.25);
    CHECK(std::abs(static_cast<double>(big) - 0.75 * n) < 3 * sigma);

    std::mt19937_64 r1(9), r2(9);
    CHECK(sample_surface_points(two, 100, r1) == sample_surface_points(two, 100, r2));

    CHECK_THROWS_AS(sample_surface_points(SurfaceMesh{}, 10, rng), std::invalid_argument);
    SurfaceMesh flat;
    flat.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    flat.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(sample_surface_points(flat, 10, rng), std::invalid_argument);
}

TEST_CASE("chamfer")
{
    const PointCloud a{{0, 0, 0}}, b{{1, 0, 0}};
    CHECK(chamfer(a, b) == 2.0);
    CHECK(chamfer(a, b, ChamferReduction::Sum) == 2.0);
    std::mt19937_64 rng(2);
    const PointCloud x = random_cloud(40, rng);
    CHECK(chamfer(x, x) == 0.0);
    CHECK_THROWS_AS(chamfer(PointCloud{}, x), std::invalid_argument);

    for (int inst = 0; inst < 20; ++inst) {
        const PointCloud p = random_cloud(50, rng), q = random_cloud(50 + inst, rng, 0.5 + 0.1 * inst);
        const double c = chamfer(p, q);
        CHECK(std::abs(c - brute_chamfer(p, q)) < 1e-12);
        CHECK(c == chamfer_brute_force(p, q));
        CHECK(c == chamfer(q, p));
        PointCloud p3 = p, q3 = q;
        for (auto& v : p3) v = v * 3.0;
        for (auto& v : q3) v = v * 3.0;
        CHECK(chamfer(p3, q3) == doctest::Approx(9.0 * c).epsilon(1e-12));
        CHECK(chamfer(p, q, ChamferReduction::Sum) ==
              doctest::Approx(chamfer_brute_force(p, q, ChamferReduction::Sum)).epsilon(1e-14));
    }

    // Bucketed search equals the scan on clustered and duplicated data.
    PointCloud clustered;
    for (int i = 0; i < 300; ++i) clustered.push_back(testsupport::uniform_vec3(-1e-3, 1e-3, rng));
    clustered.push_back({5, 5, 5});
    clustered.push_back({5, 5, 5});
    const NearestNeighbors nn(clustered);
    for (int i = 0; i < 200; ++i) {
        const Vec3 q = testsupport::uniform_vec3(-6, 6, rng);
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& p : clustered) best = std::min(best, squared_norm(q - p));
        CHECK(nn.nearest_sq(q) == best);
    }
}

TEST_CASE("coverage and mmd")
{
    std::mt19937_64 rng(3);
    std::vector<PointCloud> shapes;
    for (int i = 0; i < 5; ++i) {
        PointCloud c = random_cloud(30, rng, 0.1);
        for (auto& p : c) p.x += 10.0 * i;
        shapes.push_back(c);
    }
    CHECK(coverage(shapes, shapes) == 1.0);
    CHECK(mmd(shapes, shapes) == 0.0);
    CHECK(coverage(std::vector<PointCloud>{shapes[2]}, shapes) == doctest::Approx(0.2));
    CHECK(mmd(std::vector<PointCloud>{shapes[1]}, std::vector<PointCloud>{shapes[3]}) == chamfer(shapes[1], shapes[3]));
    std::vector<PointCloud> superset = shapes;
    superset.push_back(random_cloud(30, rng));
    CHECK(mmd(superset, shapes) == 0.0);
    CHECK_THROWS_AS(coverage(std::vector<PointCloud>{}, shapes), std::invalid_argument);
    CHECK_THROWS_AS(mmd(shapes, std::vector<PointCloud>{}), std::invalid_argument);

    for (int inst = 0; inst < 20; ++inst) {
        std::uniform_int_distribution<int> sz(1, 6);
        std::vector<PointCloud> gen(sz(rng)), ref(sz(rng));
        for (auto& c : gen) c = random_cloud(20, rng);
        for (auto& c : ref) c = random_cloud(20, rng);
        std::vector<int> hit(ref.size(), 0);
        for (const auto& gshape : gen) {
            std::size_t arg = 0;
            for (std::size_t r = 1; r < ref.size(); ++r)
                if (brute_chamfer(gshape, ref[r]) < brute_chamfer(gshape, ref[arg])) arg = r;
            hit[arg] = 1;
        }
        double cov = 0.0;
        for (int h : hit) cov += h;
        cov /= static_cast<double>(ref.size());
        double m = 0.0;
        for (const auto& rshape : ref) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& gshape : gen) best = std::min(best, brute_chamfer(gshape, rshape));
            m += best;
        }
        m /= static_cast<double>(ref.size());
        CHECK(coverage(gen, ref) == cov);
        CHECK(mmd(gen, ref) == doctest::Approx(m).epsilon(1e-13));
        CHECK(coverage(gen, ref) <= std::min(1.0, static_cast<double>(gen.size()) / ref.size()));
    }

    // Ties go to the lowest reference index.
    const DistanceMatrix tie{{1.0, 1.0, 2.0}, {3.0, 1.0, 1.0}};
    CHECK(coverage(tie) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("embedding_stats")
{
    Eigen::MatrixXd same(2, 3);
    same << 1, 2, 3, 1, 2, 3;
    CHECK(embedding_stats(same).covariance.isZero(0.0));
    Eigen::MatrixXd one_d(2, 1);
    one_d << 0, 2;
    const auto s1 = embedding_stats(one_d);
    CHECK(s1.mean(0) == 1.0);
    CHECK(s1.covariance(0, 0) == 2.0);
    CHECK_THROWS_AS(embedding_stats(Eigen::MatrixXd(1, 3)), std::invalid_argument);

    std::mt19937_64 rng(4);
    const int m = 30, d = 5;
    Eigen::MatrixXd e(m, d);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) e(i, j) = testsupport::uniform_vec(1, -3, 3, rng)[0];
    const auto st = embedding_stats(e);
    for (int j = 0; j < d; ++j) {
        double mu = 0.0;
        for (int i = 0; i < m; ++i) mu += e(i, j);
        mu /= m;
        CHECK(st.mean(j) == doctest::Approx(mu).epsilon(1e-13));
        for (int k = 0; k < d; ++k) {
            double mk = 0.0;
            for (int i = 0; i < m; ++i) mk += e(i, k);
            mk /= m;
            double c = 0.0;
            for (int i = 0; i < m; ++i) c += (e(i, j) - mu) * (e(i, k) - mk);
            CHECK(st.covariance(j, k) == doctest::Approx(c / (m - 1)).epsilon(1e-12));
        }
    }
    CHECK((st.covariance - st.covariance.transpose()).norm() < 1e-9);
}

TEST_CASE("frechet_distance")
{
    auto stats1d = [](double mu, double var) {
        EmbeddingStats s;
        s.mean = Eigen::VectorXd::Constant(1, mu);
        s.covariance = Eigen::MatrixXd::Constant(1, 1, var);
        return s;
    };
    CHECK(frechet_distance(stats1d(0, 1), stats1d(1, 1)) == doctest::Approx(1.0).epsilon(1e-15));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto v = testsupport::uniform_vec(4, 0.01, 3, rng);
        const double closed = (v[0] - v[1]) * (v[0] - v[1]) + std::pow(std::sqrt(v[2]) - std::sqrt(v[3]), 2);
        CHECK(std::abs(frechet_distance(stats1d(v[0], v[2]), stats1d(v[1], v[3])) - closed) < 1e-12);
    }

    for (int inst = 0; inst < 20; ++inst) {
        EmbeddingStats g, r;
        g.mean = Eigen::VectorXd::Random(5);
        r.mean = Eigen::VectorXd::Random(5);
        g.covariance = random_psd(5, rng);
        r.covariance = random_psd(5, rng);
        const double fd = frechet_distance(g, r);
        CHECK(fd >= 0.0);
        CHECK(std::abs(fd - frechet_ref(g, r)) < 1e-8);
        CHECK(std::abs(frechet_distance(g, g)) < 1e-8);
    }
    EmbeddingStats a = stats1d(0, 1), b;
    b.mean = Eigen::VectorXd::Zero(2);
    b.covariance = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
}
