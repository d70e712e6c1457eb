#include "fedgen/kernels.hpp"

namespace fedgen::kern {

static Kernels select() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return {avx2::axpy, avx2::dot, avx2::sum, avx2::sub, "avx2"};
#endif
    return {scalar::axpy, scalar::dot, scalar::sum, scalar::sub, "scalar"};
}

const Kernels& active() {
    static const Kernels k = select();
    return k;
}

}  // namespace fedgen::kern
