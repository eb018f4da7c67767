#include <doctest.h>

#include <cmath>
#include <vector>

#include "sea/common.hpp"
#include "sea/simd/kernels.hpp"

using namespace sea;
using simd::Isa;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform01() * 2.0 - 1.0);
  return v;
}

long double reference_dot(const std::vector<float>& a, const std::vector<float>& b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

struct IsaGuard {
  Isa saved = simd::active_isa();
  ~IsaGuard() { simd::force_isa(saved); }
};

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar kernel is close to an extended-precision sum") {
    Rng rng(1);
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 64u, 1536u}) {
      const auto a = random_vec(rng, n), b = random_vec(rng, n);
      const double got = simd::scalar::dot(a.data(), b.data(), n);
      CHECK(std::abs(static_cast<long double>(got) - reference_dot(a, b)) < 1e-9L);
    }
  }

  TEST_CASE("every supported kernel matches the scalar kernel bit for bit") {
    Rng rng(2);
    for (Isa isa : {Isa::avx2, Isa::neon}) {
      if (!simd::isa_supported(isa)) continue;
      CAPTURE(simd::isa_name(isa));
      for (std::size_t n = 0; n < 300; ++n) {
        const auto a = random_vec(rng, n), b = random_vec(rng, n);
        const double ref = simd::scalar::dot(a.data(), b.data(), n);
        double got = 0.0;
#if defined(SEA_HAVE_AVX2_KERNEL)
        if (isa == Isa::avx2) got = simd::avx2::dot(a.data(), b.data(), n);
#endif
#if defined(SEA_HAVE_NEON_KERNEL)
        if (isa == Isa::neon) got = simd::neon::dot(a.data(), b.data(), n);
#endif
        REQUIRE(got == ref);
      }
    }
  }

  TEST_CASE("dispatch follows force_isa") {
    IsaGuard guard;
    Rng rng(3);
    const auto a = random_vec(rng, 777), b = random_vec(rng, 777);
    simd::force_isa(Isa::scalar);
    CHECK(simd::active_isa() == Isa::scalar);
    const double s = simd::dot(a, b);
    CHECK(s == simd::scalar::dot(a.data(), b.data(), a.size()));
    for (Isa isa : {Isa::avx2, Isa::neon}) {
      if (!simd::isa_supported(isa)) continue;
      simd::force_isa(isa);
      CHECK(simd::active_isa() == isa);
      CHECK(simd::dot(a, b) == s);
    }
  }
}
