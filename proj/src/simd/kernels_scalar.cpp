#include <cmath>
#include <limits>

#include "texmesh/simd/kernels.hpp"

namespace texmesh::simd {

namespace {

double nearest_sq_scalar(double qx, double qy, double qz, const double* xs, const double* ys, const double* zs,
                         std::size_t n)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = qx - xs[j], dy = qy - ys[j], dz = qz - zs[j];
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < best) best = d;
    }
    return best;
}

void edge_coverage_row_scalar(const EdgeFunctions& e, double py, int x_begin, int x_end, std::uint8_t* out)
{
    const double r0 = e.b[0] * py + e.c[0];
    const double r1 = e.b[1] * py + e.c[1];
    const double r2 = e.b[2] * py + e.c[2];
    for (int x = x_begin; x < x_end; ++x) {
        const double px = x + 0.5;
        const double w0 = e.a[0] * px + r0;
        const double w1 = e.a[1] * px + r1;
        const double w2 = e.a[2] * px + r2;
        out[x - x_begin] = (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) ? 1 : 0;
    }
}

void sg_basis_scalar(double ax, double ay, double az, double sharpness, const double* xs, const double* ys,
                     const double* zs, std::size_t n, double* out)
{
    for (std::size_t i = 0; i < n; ++i) {
        const double c = ax * xs[i] + ay * ys[i] + az * zs[i];
        out[i] = std::exp(sharpness * (c - 1.0));
    }
}

} // namespace

namespace detail {
const Kernels kScalarKernels{Isa::Scalar, nearest_sq_scalar, edge_coverage_row_scalar, sg_basis_scalar};
} // namespace detail

} // namespace texmesh::simd
