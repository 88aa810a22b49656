#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace texmesh::simd {

enum class Isa { Scalar, Avx2 };

/// Three screen-space edge functions w_k(x, y) = a_k x + b_k y + c_k,
/// normalized so the triangle interior is where all three are >= 0.
struct EdgeFunctions {
    double a[3];
    double b[3];
    double c[3];
};

struct Kernels {
    Isa isa;

    /// min_j |q - p_j|^2 over a structure-of-arrays cloud. n >= 1.
    double (*nearest_sq)(double qx, double qy, double qz, const double* xs, const double* ys, const double* zs,
                         std::size_t n);

    /// out[i] = 1 when pixel center (x_begin + i + 0.5, py) passes all three
    /// edge tests, 0 otherwise, for i in [0, x_end - x_begin).
    void (*edge_coverage_row)(const EdgeFunctions& e, double py, int x_begin, int x_end, std::uint8_t* out);

    /// out[i] = exp(sharpness * (axis . d_i - 1)) for unit directions d_i.
    void (*sg_basis)(double ax, double ay, double az, double sharpness, const double* xs, const double* ys,
                     const double* zs, std::size_t n, double* out);
};

bool isa_available(Isa isa);

/// Kernel table for a specific ISA; throws std::invalid_argument when the
/// CPU cannot run it.
const Kernels& kernels(Isa isa);

/// The table selected at first use: AVX2 when the CPU supports it, unless
/// the environment variable TEXMESH_SIMD=scalar forces the reference path.
const Kernels& kernels();

std::string_view isa_name(Isa isa);

namespace detail {
extern const Kernels kScalarKernels;
#if defined(TEXMESH_HAVE_AVX2)
extern const Kernels kAvx2Kernels;
#endif
} // namespace detail

} // namespace texmesh::simd
