#include "sea/retrieval.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace sea {

const Candidate* CandidateSet::find(std::uint32_t key) const {
  for (const auto& c : entries) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

void SimilarityPool::add(std::uint32_t key, std::string id, const EmbeddingVector& v) {
  add(key, std::move(id), v.values, v.norm);
}

void SimilarityPool::add(std::uint32_t key, std::string id, std::span<const float> values,
                         double norm) {
  vectors_.append(values, norm);
  keys_.push_back(key);
  ids_.push_back(std::move(id));
}

CandidateSet find_sim(const SimilarityPool& pool, std::span<const SourceRef> sources,
                      std::size_t k) {
  if (k == 0) throw std::invalid_argument("find_sim: k must be >= 1");
  CandidateSet out;
  if (pool.empty() || sources.empty()) return out;

  const std::size_t n = pool.size();
  const std::size_t take = std::min(k, n);
  std::vector<double> sims(n);
  std::vector<std::size_t> order(n);
  std::map<std::size_t, Candidate> merged;  // pool position -> candidate
  for (const auto& src : sources) {
    pool.vectors().cosine_all(src.embedding->values, src.embedding->norm, sims);
    std::iota(order.begin(), order.end(), 0);
    auto before = [&](std::size_t a, std::size_t b) {
      if (sims[a] != sims[b]) return sims[a] > sims[b];
      return pool.id(a) < pool.id(b);
    };
    if (take < n) {
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                       order.end(), before);
    }
    for (std::size_t r = 0; r < take; ++r) {
      const std::size_t i = order[r];
      auto [it, fresh] = merged.try_emplace(i);
      Candidate& c = it->second;
      if (fresh) {
        c.key = pool.key(i);
        c.best_similarity = sims[i];
      } else {
        c.best_similarity = std::max(c.best_similarity, sims[i]);
      }
      c.provenance.push_back(src.key);
    }
  }
  std::vector<std::pair<std::size_t, Candidate>> flat(merged.begin(), merged.end());
  std::sort(flat.begin(), flat.end(), [&](const auto& a, const auto& b) {
    if (a.second.best_similarity != b.second.best_similarity)
      return a.second.best_similarity > b.second.best_similarity;
    return pool.id(a.first) < pool.id(b.first);
  });
  out.entries.reserve(flat.size());
  for (auto& [pos, c] : flat) out.entries.push_back(std::move(c));
  return out;
}

std::vector<DocIndex> candidate_documents(std::span<const ParaIndex> sources,
                                          RetrievalContext& ctx, const RetrievalConfig& cfg) {
  std::vector<char> picked(ctx.view.corpus().num_documents(), 0);
  for (ParaIndex s : sources) {
    for (const auto& sd : ctx.index.query(ctx.cache.get(s), cfg.k_doc, cfg.n_probe)) {
      picked[sd.doc] = 1;
    }
  }
  std::vector<DocIndex> docs;
  for (DocIndex d = 0; d < picked.size(); ++d) {
    if (picked[d]) docs.push_back(d);
  }
  return docs;
}

CandidateSet hierarchical_retrieve(std::span<const ParaIndex> sources, RetrievalContext& ctx,
                                   const RetrievalConfig& cfg) {
  if (sources.empty()) throw std::invalid_argument("hierarchical_retrieve: no sources");
  const Corpus& corpus = ctx.view.corpus();
  const auto docs = candidate_documents(sources, ctx, cfg);

  std::vector<ParaIndex> eligible;
  for (DocIndex d : docs) {
    for (ParaIndex p : corpus.document(d).paragraphs) {
      if (ctx.view.active(p) && !ctx.evaluated.contains(p)) eligible.push_back(p);
    }
  }
  if (eligible.empty()) {
    throw NeighborhoodExhausted("no eligible paragraph in " + std::to_string(docs.size()) +
                                " candidate documents");
  }

  // Embed missing paragraphs in bounded parallel chunks.
  const std::size_t chunk = 256;
  const std::size_t n_chunks = (eligible.size() + chunk - 1) / chunk;
  auto text_of = [&](ParaIndex p) { return corpus.paragraph(p).text; };
  parallel_for(n_chunks, cfg.max_in_flight, [&](std::size_t c) {
    const std::size_t b = c * chunk;
    const std::size_t e = std::min(eligible.size(), b + chunk);
    ctx.cache.ensure(std::span<const ParaIndex>(eligible.data() + b, e - b), text_of);
  });

  SimilarityPool pool(ctx.cache.dimension());
  for (ParaIndex p : eligible) pool.add(p, corpus.paragraph(p).para_id, ctx.cache.get(p));
  std::vector<SourceRef> refs;
  refs.reserve(sources.size());
  for (ParaIndex s : sources) refs.push_back({s, &ctx.cache.get(s)});
  return find_sim(pool, refs, cfg.k);
}

std::string_view origin_name(BatchOrigin o) {
  switch (o) {
    case BatchOrigin::initial: return "initial";
    case BatchOrigin::retrieved: return "retrieved";
    case BatchOrigin::fallback: return "fallback";
    case BatchOrigin::uniform: return "uniform";
  }
  return "?";
}

std::size_t Batch::fallback_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.fallback(); }));
}

std::vector<ParaIndex> sample_eligible(const KnowledgeBaseView& view,
                                       const ParagraphSet& evaluated, std::size_t n,
                                       std::uint64_t seed, const CandidateSet* skip) {
  std::vector<char> skipped;
  if (skip) {
    skipped.assign(view.corpus().num_paragraphs(), 0);
    for (const auto& c : skip->entries) skipped[c.key] = 1;
  }
  std::vector<ParaIndex> pool;
  for (ParaIndex p = 0; p < view.corpus().num_paragraphs(); ++p) {
    if (view.active(p) && !evaluated.contains(p) && !(skip && skipped[p])) pool.push_back(p);
  }
  Rng rng(seed);
  return rng.sample(std::move(pool), n);
}

Batch assemble_batch(const CandidateSet& cands, std::size_t batch_size, std::uint64_t seed,
                     const KnowledgeBaseView& view, const ParagraphSet& evaluated) {
  if (batch_size == 0) throw std::invalid_argument("assemble_batch: batch_size must be >= 1");
  Batch out;
  Rng rng(seed);
  std::vector<std::size_t> pos(cands.size());
  std::iota(pos.begin(), pos.end(), 0);
  for (std::size_t i : rng.sample(pos, batch_size)) {
    const auto& c = cands.entries[i];
    out.entries.push_back({c.key, BatchOrigin::retrieved,
                           std::vector<ParaIndex>(c.provenance.begin(), c.provenance.end())});
  }
  if (out.entries.size() < batch_size) {
    const auto fill =
        sample_eligible(view, evaluated, batch_size - out.entries.size(), rng.next(), &cands);
    for (ParaIndex p : fill) out.entries.push_back({p, BatchOrigin::fallback, {}});
  }
  return out;
}

}  // namespace sea
