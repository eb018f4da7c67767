#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sea/common.hpp"

namespace sea {

struct Document {
  std::string doc_id;
  std::string title;
  std::string abstract;
  std::vector<std::string> categories;
  std::vector<ParaIndex> paragraphs;
};

struct Paragraph {
  std::string para_id;
  DocIndex doc = 0;
  std::vector<std::string> section_path;
  std::string text;
  /// Top-level category inherited from the document (its first category).
  std::string category;
};

struct IngestOptions {
  std::size_t min_para_len = 200;
};

struct IngestStats {
  std::size_t docs = 0;
  std::size_t paragraphs = 0;
  std::size_t rejected_docs = 0;
  std::size_t rejected_paragraphs = 0;
  std::size_t malformed_records = 0;
  std::vector<std::string> warnings;

  bool operator==(const IngestStats&) const = default;
};

/// The knowledge base. Immutable after ingestion.
class Corpus {
 public:
  struct Ingested;

  /// Stream line-delimited corpus records. Malformed lines are skipped and
  /// counted; documents without abstract or without any paragraph of at
  /// least min_para_len characters are rejected and counted.
  static Ingested ingest(std::istream& in, const IngestOptions& opts = {});
  /// Throws RuntimeFailure if the file cannot be opened.
  static Ingested ingest_file(const std::filesystem::path& path, const IngestOptions& opts = {});

  /// Normalized form (accepted records with explicit para_id) for the run store.
  void save(const std::filesystem::path& path) const;
  static Corpus load(const std::filesystem::path& path);

  const std::vector<Document>& documents() const { return docs_; }
  const std::vector<Paragraph>& paragraphs() const { return paras_; }
  const Document& document(DocIndex d) const { return docs_.at(d); }
  const Paragraph& paragraph(ParaIndex p) const { return paras_.at(p); }
  std::size_t num_paragraphs() const { return paras_.size(); }
  std::size_t num_documents() const { return docs_.size(); }

  std::optional<ParaIndex> find_paragraph(std::string_view para_id) const;
  std::optional<DocIndex> find_document(std::string_view doc_id) const;

  /// Title line handed to the question generator: "Title/Section/Subsection".
  std::string title_line(ParaIndex p) const;

  /// Sorted list of distinct paragraph categories.
  std::vector<std::string> categories() const;

  /// Content hash over ids and texts; identifies the corpus in run manifests.
  std::string fingerprint() const;

  static std::string make_para_id(std::string_view doc_id, std::size_t ordinal);

 private:
  std::vector<Document> docs_;
  std::vector<Paragraph> paras_;
  std::unordered_map<std::string, ParaIndex> para_lookup_;
  std::unordered_map<std::string, DocIndex> doc_lookup_;
};

struct Corpus::Ingested {
  Corpus corpus;
  IngestStats stats;
};

/// Dense membership set over paragraph indices that remembers insertion order.
class ParagraphSet {
 public:
  ParagraphSet() = default;
  explicit ParagraphSet(std::size_t universe) : member_(universe, 0) {}

  bool contains(ParaIndex p) const { return p < member_.size() && member_[p] != 0; }
  /// Returns false if already present.
  bool insert(ParaIndex p);
  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }
  const std::vector<ParaIndex>& items() const { return order_; }

 private:
  std::vector<char> member_;
  std::vector<ParaIndex> order_;
};

/// Corpus plus the set of paragraphs removed during a run.
class KnowledgeBaseView {
 public:
  explicit KnowledgeBaseView(const Corpus& corpus)
      : corpus_(&corpus), removed_(corpus.num_paragraphs()) {}

  const Corpus& corpus() const { return *corpus_; }
  bool active(ParaIndex p) const { return p < corpus_->num_paragraphs() && !removed_.contains(p); }
  /// Idempotent. Throws std::out_of_range for indices outside the corpus.
  void remove(std::span<const ParaIndex> ids);
  const ParagraphSet& removed() const { return removed_; }
  std::size_t num_active() const { return corpus_->num_paragraphs() - removed_.size(); }

 private:
  const Corpus* corpus_;
  ParagraphSet removed_;
};

struct CategorySample {
  std::vector<ParaIndex> paragraphs;
  /// Fewer than n eligible paragraphs existed; everything eligible was returned.
  bool short_supply = false;
};

/// n distinct active paragraphs spread evenly over `categories` (counts differ
/// by at most one; a category that runs dry passes its shortfall on to the
/// others). An empty category list samples uniformly over all active
/// paragraphs. Paragraphs in `exclude` are never returned.
CategorySample sample_uniform_by_category(const KnowledgeBaseView& view, std::size_t n,
                                          std::span<const std::string> categories,
                                          std::uint64_t seed,
                                          const ParagraphSet* exclude = nullptr);

/// The 13 top-level Wikipedia categories used for the initial batch.
const std::vector<std::string>& default_categories();

}  // namespace sea
