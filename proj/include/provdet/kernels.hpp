#pragma once

// Inner-loop arithmetic used by the encoder. Every kernel has a scalar
// reference implementation and, where the CPU supports it, a vectorized
// variant (AVX2+FMA on x86-64, NEON on AArch64). The variant is chosen once at
// startup; PROVDET_ISA=scalar forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace provdet::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

// ISA selected for this process.
Isa active_isa();

// True if the running CPU can execute the given variant.
bool isa_supported(Isa isa);

// Overrides the selection (tests and benchmarks). Throws if unsupported.
void force_isa(Isa isa);

float dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Direct entry points per variant, for equivalence tests. Calling a variant
// the CPU does not support is undefined.
namespace scalar {
float dot_f32(const float* a, const float* b, std::size_t n) noexcept;
double dot_f64(const double* a, const double* b, std::size_t n) noexcept;
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define PROVDET_HAVE_AVX2_KERNELS 1
namespace avx2 {
float dot_f32(const float* a, const float* b, std::size_t n) noexcept;
double dot_f64(const double* a, const double* b, std::size_t n) noexcept;
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define PROVDET_HAVE_NEON_KERNELS 1
namespace neon {
float dot_f32(const float* a, const float* b, std::size_t n) noexcept;
double dot_f64(const double* a, const double* b, std::size_t n) noexcept;
void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon
#endif

}  // namespace provdet::kernels
