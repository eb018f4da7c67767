#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sea/abstract_index.hpp"
#include "sea/corpus.hpp"
#include "sea/embedding.hpp"

namespace sea {

struct RetrievalConfig {
  /// Per-source paragraph top-k.
  std::size_t k = 50;
  /// Per-source document top-k in the abstract stage.
  std::size_t k_doc = 10;
  std::size_t batch_size = 40;
  std::size_t n_probe = 4;
  /// Bound on concurrent embedding requests for on-the-fly paragraphs.
  std::size_t max_in_flight = 4;
};

struct Candidate {
  std::uint32_t key = 0;
  double best_similarity = 0.0;
  /// Keys of the sources whose top-k contained this item, in source order.
  std::vector<std::uint32_t> provenance;
};

/// Union of per-source top-k lists, ordered by best similarity descending
/// then item id ascending.
struct CandidateSet {
  std::vector<Candidate> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const Candidate* find(std::uint32_t key) const;
};

/// Items that find_sim ranks: embeddings plus a key and a stable id for ties.
class SimilarityPool {
 public:
  explicit SimilarityPool(std::size_t dim) : vectors_(dim) {}

  void add(std::uint32_t key, std::string id, const EmbeddingVector& v);
  void add(std::uint32_t key, std::string id, std::span<const float> values, double norm);
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  const EmbeddingMatrix& vectors() const { return vectors_; }
  std::uint32_t key(std::size_t i) const { return keys_[i]; }
  const std::string& id(std::size_t i) const { return ids_[i]; }

 private:
  EmbeddingMatrix vectors_;
  std::vector<std::uint32_t> keys_;
  std::vector<std::string> ids_;
};

struct SourceRef {
  std::uint32_t key = 0;
  const EmbeddingVector* embedding = nullptr;
};

/// For each source, the k pool items with highest cosine similarity (ties by
/// ascending id); the union with exact provenance.
CandidateSet find_sim(const SimilarityPool& pool, std::span<const SourceRef> sources,
                      std::size_t k);

/// No paragraph of the candidate documents is still eligible.
class NeighborhoodExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RetrievalContext {
  const KnowledgeBaseView& view;
  /// Paragraphs already in the target subset S.
  const ParagraphSet& evaluated;
  const AbstractIndex& index;
  ParagraphEmbeddingCache& cache;
};

/// Documents whose abstracts are among some source's k_doc nearest.
std::vector<DocIndex> candidate_documents(std::span<const ParaIndex> sources,
                                          RetrievalContext& ctx, const RetrievalConfig& cfg);

/// Abstract stage then paragraph stage. Removed and already evaluated
/// paragraphs are dropped before ranking. Sources must already be cached.
/// Throws NeighborhoodExhausted when nothing eligible remains.
CandidateSet hierarchical_retrieve(std::span<const ParaIndex> sources, RetrievalContext& ctx,
                                   const RetrievalConfig& cfg);

enum class BatchOrigin { initial, retrieved, fallback, uniform };
std::string_view origin_name(BatchOrigin o);

struct BatchEntry {
  ParaIndex para = 0;
  BatchOrigin origin = BatchOrigin::retrieved;
  std::vector<ParaIndex> provenance;

  bool fallback() const { return origin == BatchOrigin::fallback; }
};

struct Batch {
  std::vector<BatchEntry> entries;
  std::size_t fallback_count() const;
};

/// Uniform sample of min(batch_size, |cands|) candidates; any shortfall is
/// filled with uniformly drawn eligible paragraphs outside the candidate set
/// and flagged as fallback. Returns fewer entries only when the corpus has
/// nothing else eligible.
Batch assemble_batch(const CandidateSet& cands, std::size_t batch_size, std::uint64_t seed,
                     const KnowledgeBaseView& view, const ParagraphSet& evaluated);

/// Uniform sample of active, not yet evaluated paragraphs outside `skip`.
std::vector<ParaIndex> sample_eligible(const KnowledgeBaseView& view,
                                       const ParagraphSet& evaluated, std::size_t n,
                                       std::uint64_t seed, const CandidateSet* skip = nullptr);

}  // namespace sea
