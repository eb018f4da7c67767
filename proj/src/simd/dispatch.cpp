#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "sea/simd/kernels.hpp"

namespace sea::simd {
namespace {

using DotFn = double (*)(const float*, const float*, std::size_t) noexcept;

#if defined(SEA_HAVE_AVX2_KERNEL)
constexpr bool kAvx2Built = true;
#else
constexpr bool kAvx2Built = false;
#endif
#if defined(SEA_HAVE_NEON_KERNEL)
constexpr bool kNeonBuilt = true;
#else
constexpr bool kNeonBuilt = false;
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

DotFn fn_for(Isa isa) {
  switch (isa) {
    case Isa::avx2: return &avx2::dot;
    case Isa::neon: return &neon::dot;
    case Isa::scalar: break;
  }
  return &scalar::dot;
}

Isa detect() {
  if (const char* env = std::getenv("SEA_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
    if (v == "neon" && isa_supported(Isa::neon)) return Isa::neon;
  }
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

struct State {
  std::atomic<Isa> isa;
  std::atomic<DotFn> fn;
  State() {
    const Isa i = detect();
    isa.store(i);
    fn.store(fn_for(i));
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    case Isa::scalar: break;
  }
  return "scalar";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2: return kAvx2Built && cpu_has_avx2();
    case Isa::neon: return kNeonBuilt;
  }
  return false;
}

Isa active_isa() { return state().isa.load(); }

void force_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("SIMD variant not available: " + std::string(isa_name(isa)));
  }
  state().isa.store(isa);
  state().fn.store(fn_for(isa));
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  return state().fn.load(std::memory_order_relaxed)(a.data(), b.data(), a.size());
}

void dot_rows(std::span<const float> query, std::span<const float> rows, std::size_t dim,
              std::span<double> out) {
  if (query.size() != dim || rows.size() != out.size() * dim) {
    throw std::invalid_argument("dot_rows: shape mismatch");
  }
  const DotFn fn = state().fn.load(std::memory_order_relaxed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fn(query.data(), rows.data() + i * dim, dim);
  }
}

}  // namespace sea::simd
