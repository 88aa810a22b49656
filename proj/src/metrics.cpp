#include "texmesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "texmesh/simd/kernels.hpp"

namespace texmesh {

PointCloud sample_surface_points(const SurfaceMesh& mesh, std::size_t n, std::mt19937_64& rng)
{
    if (mesh.faces.empty()) throw std::invalid_argument("sample_surface_points: mesh has no faces");
    std::vector<double> cdf(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& t = mesh.faces[f];
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        cdf[f] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("sample_surface_points: mesh has zero area");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    PointCloud out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pick = unit(rng) * total;
        std::size_t f = std::upper_bound(cdf.begin(), cdf.end(), pick) - cdf.begin();
        f = std::min(f, cdf.size() - 1);
        const double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
        const Face& t = mesh.faces[f];
        out.push_back(mesh.vertices[t[0]] * (1.0 - r1) + mesh.vertices[t[1]] * (r1 * (1.0 - r2)) +
                      mesh.vertices[t[2]] * (r1 * r2));
    }
    return out;
}

// ---------------------------------------------------------------- nearest neighbours

NearestNeighbors::NearestNeighbors(std::span<const Vec3> points)
{
    if (points.empty()) throw std::invalid_argument("NearestNeighbors: empty point set");
    double hi[3];
    for (int a = 0; a < 3; ++a) {
        lo_[a] = std::numeric_limits<double>::infinity();
        hi[a] = -std::numeric_limits<double>::infinity();
    }
    for (const Vec3& p : points)
        for (int a = 0; a < 3; ++a) {
            if (!std::isfinite(p[a])) throw std::invalid_argument("NearestNeighbors: non-finite point");
            lo_[a] = std::min(lo_[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    const int per_axis = std::max(1, static_cast<int>(std::cbrt(points.size() / 2.0)));
    min_cell_ = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double extent = hi[a] - lo_[a];
        dims_[a] = extent > 0.0 ? per_axis : 1;
        cell_[a] = extent > 0.0 ? extent / dims_[a] : 1.0;
        if (dims_[a] > 1) min_cell_ = std::min(min_cell_, cell_[a]);
    }

    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    std::vector<std::size_t> cell_of(points.size());
    start_.assign(cells + 1, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        cell_of[i] = (static_cast<std::size_t>(cell_index(p.z, 2)) * dims_[1] + cell_index(p.y, 1)) * dims_[0] +
                     cell_index(p.x, 0);
        ++start_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
    xs_.resize(points.size());
    ys_.resize(points.size());
    zs_.resize(points.size());
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t k = fill[cell_of[i]]++;
        xs_[k] = points[i].x;
        ys_[k] = points[i].y;
        zs_[k] = points[i].z;
    }
}

int NearestNeighbors::cell_index(double v, int axis) const
{
    const int i = static_cast<int>(std::floor((v - lo_[axis]) / cell_[axis]));
    return std::clamp(i, 0, dims_[axis] - 1);
}

double NearestNeighbors::nearest_sq(const Vec3& q) const
{
    const auto& k = simd::kernels();
    const int qc[3] = {cell_index(q.x, 0), cell_index(q.y, 1), cell_index(q.z, 2)};
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < max_ring; ++r) {
        // Every cell not yet visited differs by more than r on some axis, so
        // it is at least (r - 1) cells away from q along that axis; one more
        // cell of slack absorbs rounding in the cell assignment.
        if (r > 1) {
            const double bound = (r - 2) * min_cell_;
            if (best <= bound * bound) break;
        }
        const int z0 = std::max(qc[2] - r, 0), z1 = std::min(qc[2] + r, dims_[2] - 1);
        const int y0 = std::max(qc[1] - r, 0), y1 = std::min(qc[1] + r, dims_[1] - 1);
        const int x0 = std::max(qc[0] - r, 0), x1 = std::min(qc[0] + r, dims_[0] - 1);
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const int ring = std::max({std::abs(x - qc[0]), std::abs(y - qc[1]), std::abs(z - qc[2])});
                    if (ring != r) continue;
                    const std::size_t c = (static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x;
                    const std::size_t b = start_[c], e = start_[c + 1];
                    if (b == e) continue;
                    best = std::min(best, k.nearest_sq(q.x, q.y, q.z, xs_.data() + b, ys_.data() + b, zs_.data() + b,
                                                       e - b));
                }
    }
    return best;
}

// ---------------------------------------------------------------- chamfer

namespace {

double reduce(double sum, std::size_t n, ChamferReduction r)
{
    return r == ChamferReduction::Mean ? sum / static_cast<double>(n) : sum;
}

double directed(std::span<const Vec3> from, const NearestNeighbors& to)
{
    double s = 0.0;
    for (const Vec3& p : from) s += to.nearest_sq(p);
    return s;
}

void require_nonempty(std::span<const Vec3> x, std::span<const Vec3> y)
{
    if (x.empty() || y.empty()) throw std::invalid_argument("chamfer: empty point cloud");
}

} // namespace

double chamfer(std::span<const Vec3> x, std::span<const Vec3> y, ChamferReduction reduction)
{
    require_nonempty(x, y);
    const NearestNeighbors nx(x), ny(y);
    return reduce(directed(x, ny), x.size(), reduction) + reduce(directed(y, nx), y.size(), reduction);
}

double chamfer_brute_force(std::span<const Vec3> x, std::span<const Vec3> y, ChamferReduction reduction)
{
    require_nonempty(x, y);
    auto one_way = [](std::span<const Vec3> a, std::span<const Vec3> b) {
        double s = 0.0;
        for (const Vec3& p : a) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : b) {
                const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            s += best;
        }
        return s;
    };
    return reduce(one_way(x, y), x.size(), reduction) + reduce(one_way(y, x), y.size(), reduction);
}

DistanceMatrix pairwise_chamfer(std::span<const PointCloud> gen, std::span<const PointCloud> ref,
                                ChamferReduction reduction)
{
    if (gen.empty() || ref.empty()) throw std::invalid_argument("pairwise_chamfer: empty shape set");
    std::vector<NearestNeighbors> gi, ri;
    for (const auto& c : gen) {
        if (c.empty()) throw std::invalid_argument("pairwise_chamfer: empty point cloud");
        gi.emplace_back(c);
    }
    for (const auto& c : ref) {
        if (c.empty()) throw std::invalid_argument("pairwise_chamfer: empty point cloud");
        ri.emplace_back(c);
    }
    DistanceMatrix d(gen.size(), std::vector<double>(ref.size()));
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(gen.size()); ++a)
        for (std::size_t b = 0; b < ref.size(); ++b)
            d[a][b] = reduce(directed(gen[a], ri[b]), gen[a].size(), reduction) +
                      reduce(directed(ref[b], gi[a]), ref[b].size(), reduction);
    return d;
}

namespace {

void check_matrix(const DistanceMatrix& d)
{
    if (d.empty() || d[0].empty()) throw std::invalid_argument("distance matrix is empty");
    for (const auto& row : d)
        if (row.size() != d[0].size()) throw std::invalid_argument("distance matrix is ragged");
}

} // namespace

double coverage(const DistanceMatrix& d)
{
    check_matrix(d);
    const std::size_t nr = d[0].size();
    std::vector<bool> hit(nr, false);
    for (const auto& row : d) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < nr; ++r)
            if (row[r] < row[best]) best = r;
        hit[best] = true;
    }
    return static_cast<double>(std::count(hit.begin(), hit.end(), true)) / nr;
}

double coverage(std::span<const PointCloud> gen, std::span<const PointCloud> ref)
{
    return coverage(pairwise_chamfer(gen, ref));
}

double mmd(const DistanceMatrix& d)
{
    check_matrix(d);
    const std::size_t nr = d[0].size();
    double s = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& row : d) best = std::min(best, row[r]);
        s += best;
    }
    return s / nr;
}

double mmd(std::span<const PointCloud> gen, std::span<const PointCloud> ref) { return mmd(pairwise_chamfer(gen, ref)); }

// ---------------------------------------------------------------- Frechet

EmbeddingStats embedding_stats(const Eigen::MatrixXd& e)
{
    if (e.rows() < 2) throw std::invalid_argument("embedding_stats needs at least 2 rows");
    if (!e.allFinite()) throw std::invalid_argument("embedding_stats: non-finite embedding");
    EmbeddingStats s;
    s.mean = e.colwise().mean().transpose();
    const Eigen::MatrixXd c = e.rowwise() - s.mean.transpose();
    s.covariance = (c.transpose() * c) / static_cast<double>(e.rows() - 1);
    s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
    return s;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

double frechet_distance(const EmbeddingStats& g, const EmbeddingStats& r)
{
    const Eigen::Index d = g.mean.size();
    if (r.mean.size() != d || g.covariance.rows() != d || g.covariance.cols() != d || r.covariance.rows() != d ||
        r.covariance.cols() != d)
        throw std::invalid_argument("frechet_distance: dimension mismatch");
    if ((g.covariance - g.covariance.transpose()).norm() > 1e-9 ||
        (r.covariance - r.covariance.transpose()).norm() > 1e-9)
        throw std::invalid_argument("frechet_distance: covariance is not symmetric");

    const Eigen::MatrixXd sr = psd_sqrt(r.covariance);
    Eigen::MatrixXd inner = sr * g.covariance * sr;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double value =
        (g.mean - r.mean).squaredNorm() + g.covariance.trace() + r.covariance.trace() - 2.0 * tr_sqrt;
    return std::max(value, 0.0);
}

} // namespace texmesh
