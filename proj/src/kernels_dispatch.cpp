#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "provdet/kernels.hpp"

namespace provdet::kernels {

namespace {

struct Table {
  Isa isa;
  float (*dot_f32)(const float*, const float*, std::size_t) noexcept;
  double (*dot_f64)(const double*, const double*, std::size_t) noexcept;
  void (*axpy_f32)(float, const float*, float*, std::size_t) noexcept;
  void (*axpy_f64)(double, const double*, double*, std::size_t) noexcept;
};

constexpr Table kScalar{Isa::Scalar, scalar::dot_f32, scalar::dot_f64, scalar::axpy_f32,
                        scalar::axpy_f64};
#ifdef PROVDET_HAVE_AVX2_KERNELS
constexpr Table kAvx2{Isa::Avx2, avx2::dot_f32, avx2::dot_f64, avx2::axpy_f32, avx2::axpy_f64};
#endif
#ifdef PROVDET_HAVE_NEON_KERNELS
constexpr Table kNeon{Isa::Neon, neon::dot_f32, neon::dot_f64, neon::axpy_f32, neon::axpy_f64};
#endif

const Table* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &kScalar;
    case Isa::Avx2:
#ifdef PROVDET_HAVE_AVX2_KERNELS
      return &kAvx2;
#else
      return nullptr;
#endif
    case Isa::Neon:
#ifdef PROVDET_HAVE_NEON_KERNELS
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const Table* select_default() {
  if (const char* env = std::getenv("PROVDET_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &kScalar;
    if (want == "avx2" && isa_supported(Isa::Avx2)) return table_for(Isa::Avx2);
    if (want == "neon" && isa_supported(Isa::Neon)) return table_for(Isa::Neon);
  }
  if (isa_supported(Isa::Avx2)) return table_for(Isa::Avx2);
  if (isa_supported(Isa::Neon)) return table_for(Isa::Neon);
  return &kScalar;
}

std::atomic<const Table*>& current() {
  static std::atomic<const Table*> table{select_default()};
  return table;
}

const Table& active() { return *current().load(std::memory_order_relaxed); }

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(PROVDET_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#ifdef PROVDET_HAVE_NEON_KERNELS
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return active().isa; }

void force_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::runtime_error("kernel variant not supported on this CPU: " +
                             std::string(isa_name(isa)));
  }
  current().store(table_for(isa), std::memory_order_relaxed);
}

float dot(std::span<const float> a, std::span<const float> b) {
  return active().dot_f32(a.data(), b.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot_f64(a.data(), b.data(), a.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) {
  active().axpy_f32(alpha, x.data(), y.data(), x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy_f64(alpha, x.data(), y.data(), x.size());
}

}  // namespace provdet::kernels
