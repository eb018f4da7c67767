#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sea/budget.hpp"
#include "sea/common.hpp"
#include "sea/openai_client.hpp"

namespace sea {


struct EmbeddingVector {
  std::vector<float> values;
  /// Euclidean norm of `values`, computed in double.
  double norm = 0.0;

  std::size_t dim() const { return values.size(); }
  std::span<const float> span() const { return values; }

  /// L2-normalizes `raw` in place and caches the norm. Throws EmbeddingError
  /// for a zero vector.
  static EmbeddingVector from_raw(std::vector<float> raw);
};

/// Cosine similarity in double precision.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major block of embeddings with cached norms, laid out for the dot kernels.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return norms_.size(); }
  void append(const EmbeddingVector& v);
  void append(std::span<const float> values, double norm);
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double norm(std::size_t i) const { return norms_[i]; }
  std::span<const float> data() const { return data_; }
  EmbeddingVector vector(std::size_t i) const;

  /// out[i] = cosine(query, row i).
  void cosine_all(std::span<const float> query, double query_norm, std::span<double> out) const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<double> norms_;
};

enum class EmbeddingKind { remote, deterministic_test };

struct EmbeddingProviderConfig {
  EmbeddingKind kind = EmbeddingKind::deterministic_test;
  EndpointConfig endpoint{.base_url = {}, .model = {}, .api_key_env = "SEA_EMBED_API_KEY"};
  std::size_t dimension = 64;
  std::size_t batch_size = 64;
  std::size_t truncate_chars = 8000;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  /// Identifies provider and model; recorded in index and run manifests.
  virtual std::string fingerprint() const = 0;
  /// One raw (unnormalized) vector per text. May throw on transport failure.
  virtual std::vector<std::vector<float>> embed_raw(std::span<const std::string> texts) = 0;
};

/// Deterministic bag-of-tokens embedder for offline use.
///
/// Tokens are maximal runs of ASCII letters/digits (lower-cased) or non-ASCII
/// bytes. Each token t adds sign(t) to coordinate fnv1a64(t) mod d, where
/// sign(t) is -1 if bit 63 of the hash is set and +1 otherwise. The result is
/// L2-normalized by the caller. Texts sharing tokens therefore have
/// correlated vectors; texts with disjoint tokens are nearly orthogonal up
/// to hash collisions.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim);
  std::size_t dimension() const override { return dim_; }
  std::string fingerprint() const override;
  std::vector<std::vector<float>> embed_raw(std::span<const std::string> texts) override;

  static std::vector<std::string> tokenize(std::string_view text);

 private:
  std::size_t dim_;
};

/// OpenAI-compatible POST {base_url}/embeddings client.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(EndpointConfig endpoint, std::size_t dim);
  std::size_t dimension() const override { return dim_; }
  std::string fingerprint() const override;
  std::vector<std::vector<float>> embed_raw(std::span<const std::string> texts) override;

 private:
  OpenAiClient client_;
  std::size_t dim_;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg);

/// Truncate, batch, embed and normalize. Order-preserving. Throws
/// EmbeddingError naming the first empty input or zero vector, or when a
/// batch still fails after the endpoint's retry allowance.
std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts,
                                         EmbeddingProvider& provider,
                                         const EmbeddingProviderConfig& cfg);

/// Truncate to at most `limit` characters without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view text, std::size_t limit);

/// Per-run cache of on-demand paragraph embeddings, optionally mirrored to an
/// append-only file so resumed runs and exports see the same vectors.
class ParagraphEmbeddingCache {
 public:
  ParagraphEmbeddingCache(EmbeddingProvider& provider, EmbeddingProviderConfig cfg);

  /// Attach a backing file; existing records are loaded first.
  void attach_file(const std::filesystem::path& path);

  /// Make sure every listed paragraph has an embedding. `texts(p)` supplies
  /// the text for a missing paragraph.
  template <typename TextFn>
  void ensure(std::span<const ParaIndex> paras, TextFn&& texts);

  bool contains(ParaIndex p) const;
  const EmbeddingVector& get(ParaIndex p) const;
  std::size_t size() const { return vectors_.size(); }
  std::size_t dimension() const { return cfg_.dimension; }
  std::size_t provider_calls() const { return provider_calls_; }
  /// Estimated usage of remote embedding requests since the last drain.
  std::vector<Usage> drain_usage();

  /// Load a backing file without a provider (exports).
  static std::unordered_map<ParaIndex, EmbeddingVector> read_file(
      const std::filesystem::path& path, std::size_t dim);

 private:
  void ensure_texts(std::span<const ParaIndex> missing, const std::vector<std::string>& texts);

  EmbeddingProvider& provider_;
  EmbeddingProviderConfig cfg_;
  std::unordered_map<ParaIndex, EmbeddingVector> vectors_;
  std::filesystem::path file_;
  std::size_t provider_calls_ = 0;
  std::vector<Usage> pending_usage_;
  mutable std::mutex mu_;
};

template <typename TextFn>
void ParagraphEmbeddingCache::ensure(std::span<const ParaIndex> paras, TextFn&& texts) {
  std::vector<ParaIndex> missing(paras.begin(), paras.end());
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  {
    std::lock_guard lk(mu_);
    std::erase_if(missing, [&](ParaIndex p) { return vectors_.contains(p); });
  }
  if (missing.empty()) return;
  std::vector<std::string> t;
  t.reserve(missing.size());
  for (ParaIndex p : missing) t.push_back(texts(p));
  ensure_texts(missing, t);
}

}  // namespace sea
