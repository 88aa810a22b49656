#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "texmesh/isosurface.hpp"

namespace texmesh {

using PointCloud = std::vector<Vec3>;

/// Area-weighted uniform samples on the mesh surface.
PointCloud sample_surface_points(const SurfaceMesh& mesh, std::size_t n, std::mt19937_64& rng);

/// Exact nearest-neighbour queries against a fixed cloud, bucketed in a
/// uniform grid. Results equal a linear scan bit for bit.
class NearestNeighbors {
public:
    explicit NearestNeighbors(std::span<const Vec3> points);

    /// Squared distance to the closest stored point.
    double nearest_sq(const Vec3& q) const;

private:
    int dims_[3] = {1, 1, 1};
    double lo_[3] = {0, 0, 0};
    double cell_[3] = {1, 1, 1};
    double min_cell_ = 0.0;
    std::vector<std::size_t> start_; ///< per cell offset into the sorted arrays, plus end sentinel
    std::vector<double> xs_, ys_, zs_;

    int cell_index(double v, int axis) const;
};

enum class ChamferReduction { Mean, Sum };

/// Sum over both directions of the reduced squared nearest distance.
double chamfer(std::span<const Vec3> x, std::span<const Vec3> y, ChamferReduction reduction = ChamferReduction::Mean);

/// Reference implementation: full O(N M) scan.
double chamfer_brute_force(std::span<const Vec3> x, std::span<const Vec3> y,
                           ChamferReduction reduction = ChamferReduction::Mean);

/// Rows index generated shapes, columns reference shapes.
using DistanceMatrix = std::vector<std::vector<double>>;

DistanceMatrix pairwise_chamfer(std::span<const PointCloud> gen, std::span<const PointCloud> ref,
                                ChamferReduction reduction = ChamferReduction::Mean);

/// Fraction of reference shapes that are the nearest reference of at least
/// one generated shape. Ties go to the lowest reference index.
double coverage(const DistanceMatrix& d);
double coverage(std::span<const PointCloud> gen, std::span<const PointCloud> ref);

/// Mean over references of the distance to the closest generated shape.
double mmd(const DistanceMatrix& d);
double mmd(std::span<const PointCloud> gen, std::span<const PointCloud> ref);

struct EmbeddingStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Sample mean and unbiased covariance of the rows.
EmbeddingStats embedding_stats(const Eigen::MatrixXd& embeddings);

/// |mu_g - mu_r|^2 + tr(S_g + S_r - 2 (S_r^1/2 S_g S_r^1/2)^1/2).
double frechet_distance(const EmbeddingStats& g, const EmbeddingStats& r);

} // namespace texmesh
