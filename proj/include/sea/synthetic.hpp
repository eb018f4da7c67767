#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "sea/abstract_index.hpp"
#include "sea/corpus.hpp"
#include "sea/embedding.hpp"
#include "sea/testee.hpp"

namespace sea {

/// Planted-cluster corpus. Every cluster owns a vocabulary of pseudo-words;
/// every document adds a smaller private vocabulary; paragraphs mix cluster,
/// document and shared background words. Under the hashing embedder,
/// paragraphs of one cluster are therefore mutually similar.
struct SyntheticSpec {
  std::size_t clusters = 20;
  std::size_t docs_per_cluster = 10;
  std::size_t paras_per_doc = 50;
  std::size_t cluster_vocab = 10;
  std::size_t doc_vocab = 8;
  std::size_t common_vocab = 2000;
  std::size_t words_per_para = 60;
  /// Share of paragraph words drawn from the cluster and document vocabularies.
  double p_cluster = 0.35;
  double p_doc = 0.15;
  /// Cluster c is labelled categories[c % size].
  std::vector<std::string> categories = default_categories();
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<std::uint32_t> para_cluster;
  std::vector<std::uint32_t> doc_cluster;
};

SyntheticCorpus generate_planted_corpus(const SyntheticSpec& spec);

/// Corpus records in the ingest format (one JSON document per line).
std::string synthetic_corpus_jsonl(const SyntheticSpec& spec);

struct PlantedRegion {
  ParaIndex center = 0;
  /// Fraction of paragraphs the region should contain.
  double fraction = 0.05;
  double error_prob = 0.9;
};

/// Region centred on a paragraph embedding, with its radius set to the
/// cosine distance of the ceil(fraction * N)-th nearest paragraph.
ErrorRegion plant_region(const std::vector<EmbeddingVector>& para_vectors,
                         const PlantedRegion& region);

/// Everything a simulated run needs, built from one seed.
struct SimulationSetup {
  SyntheticSpec spec;
  std::size_t dimension = 64;
  IndexBuildParams index;
  double region_fraction = 0.05;
  double region_error = 0.9;
  double base_error = 0.1;
};

struct SimulationWorld {
  SyntheticCorpus synth;
  std::unique_ptr<HashingEmbedder> embedder;
  EmbeddingProviderConfig embed_cfg;
  AbstractIndex index;
  std::vector<EmbeddingVector> para_vectors;
  ErrorLandscape landscape;
  ParaIndex center = 0;
  /// Paragraphs inside the planted region.
  std::vector<ParaIndex> region_members;
};

/// Deterministic in setup (the region centre is drawn from spec.seed).
std::unique_ptr<SimulationWorld> build_world(const SimulationSetup& setup);

}  // namespace sea
