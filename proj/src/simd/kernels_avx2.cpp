// Compiled with -mavx2. Only mul/add are used (no FMA) so the distance and
// edge kernels round exactly like the scalar reference.
#include <immintrin.h>

#include <cmath>
#include <limits>

#include "texmesh/simd/kernels.hpp"

namespace texmesh::simd {

namespace {

inline double hmin(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d m = _mm_min_pd(lo, hi);
    return std::fmin(_mm_cvtsd_f64(m), _mm_cvtsd_f64(_mm_unpackhi_pd(m, m)));
}

double nearest_sq_avx2(double qx, double qy, double qz, const double* xs, const double* ys, const double* zs,
                       std::size_t n)
{
    const __m256d vx = _mm256_set1_pd(qx), vy = _mm256_set1_pd(qy), vz = _mm256_set1_pd(qz);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d dx = _mm256_sub_pd(vx, _mm256_loadu_pd(xs + j));
        const __m256d dy = _mm256_sub_pd(vy, _mm256_loadu_pd(ys + j));
        const __m256d dz = _mm256_sub_pd(vz, _mm256_loadu_pd(zs + j));
        const __m256d d = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)), _mm256_mul_pd(dz, dz));
        best = _mm256_min_pd(best, d);
    }
    double out = hmin(best);
    for (; j < n; ++j) {
        const double dx = qx - xs[j], dy = qy - ys[j], dz = qz - zs[j];
        const double d = dx * dx + dy * dy + dz * dz;
        if (d < out) out = d;
    }
    return out;
}

void edge_coverage_row_avx2(const EdgeFunctions& e, double py, int x_begin, int x_end, std::uint8_t* out)
{
    const double r0 = e.b[0] * py + e.c[0];
    const double r1 = e.b[1] * py + e.c[1];
    const double r2 = e.b[2] * py + e.c[2];
    const __m256d a0 = _mm256_set1_pd(e.a[0]), a1 = _mm256_set1_pd(e.a[1]), a2 = _mm256_set1_pd(e.a[2]);
    const __m256d vr0 = _mm256_set1_pd(r0), vr1 = _mm256_set1_pd(r1), vr2 = _mm256_set1_pd(r2);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d lane = _mm256_set_pd(3.5, 2.5, 1.5, 0.5);
    int x = x_begin;
    for (; x + 4 <= x_end; x += 4) {
        const __m256d px = _mm256_add_pd(_mm256_set1_pd(static_cast<double>(x)), lane);
        const __m256d w0 = _mm256_add_pd(_mm256_mul_pd(a0, px), vr0);
        const __m256d w1 = _mm256_add_pd(_mm256_mul_pd(a1, px), vr1);
        const __m256d w2 = _mm256_add_pd(_mm256_mul_pd(a2, px), vr2);
        const __m256d in = _mm256_and_pd(_mm256_and_pd(_mm256_cmp_pd(w0, zero, _CMP_GE_OQ), _mm256_cmp_pd(w1, zero, _CMP_GE_OQ)),
                                         _mm256_cmp_pd(w2, zero, _CMP_GE_OQ));
        const int bits = _mm256_movemask_pd(in);
        for (int k = 0; k < 4; ++k) out[x - x_begin + k] = (bits >> k) & 1;
    }
    for (; x < x_end; ++x) {
        const double px = x + 0.5;
        const double w0 = e.a[0] * px + r0;
        const double w1 = e.a[1] * px + r1;
        const double w2 = e.a[2] * px + r2;
        out[x - x_begin] = (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) ? 1 : 0;
    }
}

// exp(x) for x <= 0 region used by SG lobes; full double range handled.
// Cody-Waite reduction by ln2 and a degree-13 Taylor polynomial on
// |r| <= ln2/2 (truncation error below 1e-17).
inline __m256d exp_pd(__m256d x)
{
    const __m256d lo_limit = _mm256_set1_pd(-708.0);
    const __m256d hi_limit = _mm256_set1_pd(709.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
    x = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);

    const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(n, ln2_hi));
    r = _mm256_sub_pd(r, _mm256_mul_pd(n, ln2_lo));

    static constexpr double kInvFact[] = {
        1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
        1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
        1.0 / 6.0,          0.5,               1.0,              1.0};
    __m256d p = _mm256_set1_pd(kInvFact[0]);
    for (int k = 1; k < 14; ++k) p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kInvFact[k]));

    // 2^n via the exponent field.
    const __m256d magic = _mm256_set1_pd(6755399441055744.0); // 2^52 + 2^51
    const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
    return _mm256_andnot_pd(underflow, result);
}

void sg_basis_avx2(double ax, double ay, double az, double sharpness, const double* xs, const double* ys,
                   const double* zs, std::size_t n, double* out)
{
    const __m256d vax = _mm256_set1_pd(ax), vay = _mm256_set1_pd(ay), vaz = _mm256_set1_pd(az);
    const __m256d vl = _mm256_set1_pd(sharpness), one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d c = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(vax, _mm256_loadu_pd(xs + i)),
                                                      _mm256_mul_pd(vay, _mm256_loadu_pd(ys + i))),
                                        _mm256_mul_pd(vaz, _mm256_loadu_pd(zs + i)));
        _mm256_storeu_pd(out + i, exp_pd(_mm256_mul_pd(vl, _mm256_sub_pd(c, one))));
    }
    for (; i < n; ++i) {
        const double c = ax * xs[i] + ay * ys[i] + az * zs[i];
        out[i] = std::exp(sharpness * (c - 1.0));
    }
}

} // namespace

namespace detail {
const Kernels kAvx2Kernels{Isa::Avx2, nearest_sq_avx2, edge_coverage_row_avx2, sg_basis_avx2};
} // namespace detail

} // namespace texmesh::simd
