#include <cstdlib>
#include <stdexcept>
#include <string>

#include "texmesh/simd/kernels.hpp"

namespace texmesh::simd {

bool isa_available(Isa isa)
{
    switch (isa) {
    case Isa::Scalar:
        return true;
    case Isa::Avx2:
#if defined(TEXMESH_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    }
    return false;
}

const Kernels& kernels(Isa isa)
{
    if (!isa_available(isa)) throw std::invalid_argument("ISA " + std::string(isa_name(isa)) + " not available");
#if defined(TEXMESH_HAVE_AVX2)
    if (isa == Isa::Avx2) return detail::kAvx2Kernels;
#endif
    return detail::kScalarKernels;
}

const Kernels& kernels()
{
    static const Kernels& active = [] () -> const Kernels& {
        const char* force = std::getenv("TEXMESH_SIMD");
        if (force && std::string(force) == "scalar") return detail::kScalarKernels;
        return isa_available(Isa::Avx2) ? kernels(Isa::Avx2) : detail::kScalarKernels;
    }();
    return active;
}

std::string_view isa_name(Isa isa)
{
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

} // namespace texmesh::simd
