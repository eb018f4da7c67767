#pragma once

// Dot-product kernels used by every similarity computation in the engine.
//
// All variants accumulate float*float products in double precision over
// eight interleaved lanes and reduce them in the same fixed order, so the
// scalar reference and the vector variants return bit-identical results.
// The products are exact in double, which makes the result independent of
// FMA contraction as well.

#include <cstddef>
#include <span>
#include <string_view>

namespace sea::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

/// True when the variant was compiled in and the running CPU supports it.
bool isa_supported(Isa isa);

/// The variant currently used by dot()/dot_rows(). Chosen at startup from
/// CPU features; SEA_SIMD=scalar|avx2|neon in the environment overrides.
Isa active_isa();

/// Switch variants at runtime. Throws std::invalid_argument if unsupported.
void force_isa(Isa isa);

double dot(std::span<const float> a, std::span<const float> b);

/// out[i] = dot(query, rows[i*dim .. (i+1)*dim)).
void dot_rows(std::span<const float> query, std::span<const float> rows,
              std::size_t dim, std::span<double> out);

namespace scalar {
double dot(const float* a, const float* b, std::size_t n) noexcept;
}
namespace avx2 {
double dot(const float* a, const float* b, std::size_t n) noexcept;
}
namespace neon {
double dot(const float* a, const float* b, std::size_t n) noexcept;
}

}  // namespace sea::simd
