#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "provdet/encoder.hpp"
#include "provdet/kernels.hpp"
#include "provdet/rng.hpp"

using namespace provdet;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return v;
}

class IsaGuard {
 public:
  IsaGuard() : saved_(kernels::active_isa()) {}
  ~IsaGuard() { kernels::force_isa(saved_); }

 private:
  kernels::Isa saved_;
};

}  // namespace

TEST(Kernels, ScalarIsAlwaysSupported) {
  EXPECT_TRUE(kernels::isa_supported(kernels::Isa::Scalar));
  EXPECT_TRUE(kernels::isa_supported(kernels::active_isa()));
  EXPECT_EQ(kernels::isa_name(kernels::Isa::Scalar), "scalar");
}

TEST(Kernels, ScalarDotMatchesNaiveSum) {
  Rng rng(1);
  for (std::size_t n : {0u, 1u, 7u, 64u}) {
    const auto a = random_vec<double>(n, rng);
    const auto b = random_vec<double>(n, rng);
    double want = 0;
    for (std::size_t i = 0; i < n; ++i) want += a[i] * b[i];
    EXPECT_NEAR(kernels::scalar::dot_f64(a.data(), b.data(), n), want, 1e-12);
  }
}

#ifdef PROVDET_HAVE_AVX2_KERNELS
TEST(Kernels, Avx2MatchesScalar) {
  if (!kernels::isa_supported(kernels::Isa::Avx2)) GTEST_SKIP() << "no AVX2 on this CPU";
  Rng rng(2);
  for (std::size_t n = 0; n <= 70; ++n) {
    const auto af = random_vec<float>(n, rng);
    const auto bf = random_vec<float>(n, rng);
    const auto ad = random_vec<double>(n, rng);
    const auto bd = random_vec<double>(n, rng);
    double mag = 0;
    for (std::size_t i = 0; i < n; ++i) mag += std::fabs(af[i] * bf[i]);
    EXPECT_NEAR(kernels::avx2::dot_f32(af.data(), bf.data(), n),
                kernels::scalar::dot_f32(af.data(), bf.data(), n), 1e-5 * (1 + mag))
        << "n=" << n;
    double magd = 0;
    for (std::size_t i = 0; i < n; ++i) magd += std::fabs(ad[i] * bd[i]);
    EXPECT_NEAR(kernels::avx2::dot_f64(ad.data(), bd.data(), n),
                kernels::scalar::dot_f64(ad.data(), bd.data(), n), 1e-13 * (1 + magd));

    auto yf1 = random_vec<float>(n, rng);
    auto yf2 = yf1;
    kernels::avx2::axpy_f32(0.37f, af.data(), yf1.data(), n);
    kernels::scalar::axpy_f32(0.37f, af.data(), yf2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(yf1[i], yf2[i], 1e-6 * (1 + std::fabs(yf2[i])));

    auto yd1 = random_vec<double>(n, rng);
    auto yd2 = yd1;
    kernels::avx2::axpy_f64(-1.25, ad.data(), yd1.data(), n);
    kernels::scalar::axpy_f64(-1.25, ad.data(), yd2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(yd1[i], yd2[i], 1e-14 * (1 + std::fabs(yd2[i])));
  }
}
#endif

#ifdef PROVDET_HAVE_NEON_KERNELS
TEST(Kernels, NeonMatchesScalar) {
  Rng rng(3);
  for (std::size_t n = 0; n <= 70; ++n) {
    const auto af = random_vec<float>(n, rng);
    const auto bf = random_vec<float>(n, rng);
    double mag = 0;
    for (std::size_t i = 0; i < n; ++i) mag += std::fabs(af[i] * bf[i]);
    EXPECT_NEAR(kernels::neon::dot_f32(af.data(), bf.data(), n),
                kernels::scalar::dot_f32(af.data(), bf.data(), n), 1e-5 * (1 + mag));
    auto y1 = random_vec<float>(n, rng);
    auto y2 = y1;
    kernels::neon::axpy_f32(0.37f, af.data(), y1.data(), n);
    kernels::scalar::axpy_f32(0.37f, af.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-6 * (1 + std::fabs(y2[i])));
  }
}
#endif

TEST(Kernels, ForwardAgreesAcrossVariants) {
  IsaGuard guard;
  EncoderConfig cfg;
  cfg.vocab_size = 30;
  cfg.embed_dim = 16;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.ff_dim = 32;
  cfg.max_len = 12;
  cfg.projector_dim = 8;
  const auto params = init_params<float>(cfg, 11);
  const std::vector<TokenId> ids{kEncId, 5, 9, 17, 4, 29, 3};

  kernels::force_isa(kernels::Isa::Scalar);
  const auto ref = forward(params, ids, ForwardMode::training(5));
  for (kernels::Isa isa : {kernels::Isa::Avx2, kernels::Isa::Neon}) {
    if (!kernels::isa_supported(isa)) continue;
    kernels::force_isa(isa);
    const auto got = forward(params, ids, ForwardMode::training(5));
    ASSERT_EQ(got.embedding.size(), ref.embedding.size());
    for (std::size_t i = 0; i < ref.embedding.size(); ++i) {
      EXPECT_NEAR(got.embedding[i], ref.embedding[i], 1e-4) << kernels::isa_name(isa);
    }
    EXPECT_NEAR(got.prob_llm(), ref.prob_llm(), 1e-4);
  }
}

TEST(Kernels, ForcingUnsupportedVariantThrows) {
  for (kernels::Isa isa : {kernels::Isa::Avx2, kernels::Isa::Neon}) {
    if (!kernels::isa_supported(isa)) EXPECT_ANY_THROW(kernels::force_isa(isa));
  }
}
