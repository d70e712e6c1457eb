// Vector kernels with runtime CPU dispatch (scalar reference + AVX2).
#pragma once
#include <cstddef>

namespace fedgen::kern {

// y[i] += a * x[i]
using AxpyFn = void (*)(double a, const double* x, double* y, std::size_t n);
// sum_i x[i] * y[i]
using DotFn = double (*)(const double* x, const double* y, std::size_t n);
// sum_i x[i]
using SumFn = double (*)(const double* x, std::size_t n);
// out[i] = x[i] - y[i]
using SubFn = void (*)(const double* x, const double* y, double* out, std::size_t n);

struct Kernels {
    AxpyFn axpy;
    DotFn dot;
    SumFn sum;
    SubFn sub;
    const char* name;
};

// Scalar reference implementations (always available, used by equivalence tests).
namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void sub(const double* x, const double* y, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void sub(const double* x, const double* y, double* out, std::size_t n);
}  // namespace avx2
#endif

// Best implementation for the running CPU, selected once at startup.
const Kernels& active();

inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline void sub(const double* x, const double* y, double* out, std::size_t n) { active().sub(x, y, out, n); }

}  // namespace fedgen::kern
