#include "provdet/kernels.hpp"

namespace provdet::kernels::scalar {

namespace {

template <typename T>
T dot_impl(const T* a, const T* b, std::size_t n) noexcept {
  T sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

float dot_f32(const float* a, const float* b, std::size_t n) noexcept { return dot_impl(a, b, n); }
double dot_f64(const double* a, const double* b, std::size_t n) noexcept { return dot_impl(a, b, n); }

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) noexcept {
  axpy_impl(alpha, x, y, n);
}
void axpy_f64(double alpha, const double* x, double* y, std::size_t n) noexcept {
  axpy_impl(alpha, x, y, n);
}

}  // namespace provdet::kernels::scalar
