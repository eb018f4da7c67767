#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sea {

using ParaIndex = std::uint32_t;
using DocIndex = std::uint32_t;

/// Bad or inconsistent configuration. The CLI maps this to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or adapter failure that aborts the current operation.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::string hex64(std::uint64_t v);

/// Seed of the child stream for (step, purpose). Streams are independent of
/// the order in which they are requested.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t step, std::string_view purpose);

/// mt19937_64 with distribution code of our own so that draws are identical
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// First `take` positions of a seeded partial Fisher-Yates over `items`.
  template <typename T>
  std::vector<T> sample(std::vector<T> items, std::size_t take) {
    take = std::min(take, items.size());
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(items.size() - i));
      std::swap(items[i], items[j]);
    }
    items.resize(take);
    return items;
  }

 private:
  std::mt19937_64 engine_;
};

/// Number of Unicode code points in a UTF-8 string (invalid bytes count as one).
std::size_t utf8_length(std::string_view s);

/// Run fn(i) for i in [0, n) on at most max_in_flight threads. Exceptions are
/// rethrown on the caller's thread (first one by index wins).
void parallel_for(std::size_t n, std::size_t max_in_flight,
                  const std::function<void(std::size_t)>& fn);

std::string read_file(const std::filesystem::path& path);
/// Write via a temporary file and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace sea
