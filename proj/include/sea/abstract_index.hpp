#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sea/corpus.hpp"
#include "sea/embedding.hpp"

namespace sea {

struct IndexBuildParams {
  std::size_t n_centroids = 16;
  std::size_t kmeans_iters = 10;
  /// k-means trains on at most this many abstracts (seeded sample).
  std::size_t max_train = 100000;
  std::uint64_t seed = 0;
  /// Abstract embeddings are computed in chunks of this many documents; each
  /// chunk is appended to the checkpoint file before the next is requested.
  std::size_t checkpoint_chunk = 1024;
};

struct ScoredDoc {
  DocIndex doc = 0;
  double similarity = 0.0;
  bool operator==(const ScoredDoc&) const = default;
};

/// Inverted-file index over document abstract embeddings: a spherical
/// k-means coarse quantizer whose lists hold the full (normalized) vectors.
class AbstractIndex {
 public:
  /// Embeds "title\nabstract" for every document and fits the quantizer.
  /// If `checkpoint` is non-empty, already-embedded chunks found there are
  /// reused, so a build interrupted by a provider failure resumes.
  static AbstractIndex build(const Corpus& corpus, EmbeddingProvider& provider,
                             const EmbeddingProviderConfig& cfg, const IndexBuildParams& params,
                             const std::filesystem::path& checkpoint = {});

  /// Builds from precomputed embeddings (row i belongs to document i).
  static AbstractIndex build_from(const EmbeddingMatrix& abstracts,
                                  std::vector<std::string> doc_ids,
                                  const IndexBuildParams& params, std::string provider_fp);

  /// Top-k documents among the n_probe lists whose centroids are most similar
  /// to q. Sorted by similarity descending, then doc_id ascending.
  std::vector<ScoredDoc> query(const EmbeddingVector& q, std::size_t k, std::size_t n_probe) const;

  /// Exhaustive top-k over every indexed document (same ordering rules).
  std::vector<ScoredDoc> exact(const EmbeddingVector& q, std::size_t k) const;

  std::size_t dim() const { return dim_; }
  std::size_t num_centroids() const { return centroids_.rows(); }
  std::size_t num_docs() const { return doc_ids_.size(); }
  const std::vector<std::vector<DocIndex>>& lists() const { return lists_; }
  const EmbeddingMatrix& centroids() const { return centroids_; }
  EmbeddingVector doc_vector(DocIndex d) const;
  const std::string& provider_fingerprint() const { return provider_fp_; }

  /// Versioned binary file plus a plain-text manifest next to it.
  void save(const std::filesystem::path& bin, const std::filesystem::path& manifest,
            const std::string& corpus_fp) const;
  static AbstractIndex load(const std::filesystem::path& bin);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  void assign_all(const EmbeddingMatrix& abstracts);
  void scan(const std::vector<std::size_t>& list_ids, const EmbeddingVector& q, std::size_t k,
            std::vector<ScoredDoc>& out) const;

  std::size_t dim_ = 0;
  EmbeddingMatrix centroids_;
  std::vector<std::vector<DocIndex>> lists_;
  std::vector<EmbeddingMatrix> list_vectors_;
  std::vector<std::string> doc_ids_;
  // doc -> (list, row within list)
  std::vector<std::pair<std::uint32_t, std::uint32_t>> where_;
  std::string provider_fp_;
};

}  // namespace sea
