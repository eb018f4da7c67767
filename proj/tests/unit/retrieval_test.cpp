#include <doctest.h>

#include <numeric>
#include <set>

#include "sea/retrieval.hpp"
#include "sea/synthetic.hpp"

using namespace sea;

namespace {

EmbeddingVector vec(std::vector<float> v) { return EmbeddingVector::from_raw(std::move(v)); }

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("find_sim merges per-source top-k with max similarity and provenance") {
    SimilarityPool pool(2);
    const auto a = vec({1, 0}), b = vec({0, 1}), c = vec({1, 1}), d = vec({-1, 0});
    pool.add(10, "p10", a);
    pool.add(11, "p11", b);
    pool.add(12, "p12", c);
    pool.add(13, "p13", d);
    const auto s1 = vec({1, 0.1f}), s2 = vec({0.1f, 1});
    const std::vector<SourceRef> src{{100, &s1}, {200, &s2}};
    const auto r = find_sim(pool, src, 2);
    REQUIRE(r.size() == 3);
    CHECK(r.entries[0].key == 10);
    CHECK(r.entries[1].key == 11);
    CHECK(r.entries[2].key == 12);
    CHECK(r.entries[2].provenance == std::vector<std::uint32_t>{100, 200});
    CHECK(r.find(13) == nullptr);
    CHECK_THROWS_AS(find_sim(pool, src, 0), std::invalid_argument);
  }

  TEST_CASE("ties are broken by id") {
    SimilarityPool pool(2);
    const auto v = vec({1, 1});
    pool.add(3, "b", v);
    pool.add(4, "a", v);
    pool.add(5, "c", v);
    const std::vector<SourceRef> src{{0, &v}};
    const auto r = find_sim(pool, src, 2);
    REQUIRE(r.size() == 2);
    CHECK(r.entries[0].key == 4);
    CHECK(r.entries[1].key == 3);
  }

  TEST_CASE("assemble_batch fills from the eligible pool when candidates run short") {
    SyntheticSpec spec;
    spec.clusters = 2;
    spec.docs_per_cluster = 2;
    spec.paras_per_doc = 5;
    const auto synth = generate_planted_corpus(spec);
    KnowledgeBaseView view(synth.corpus);
    ParagraphSet evaluated(synth.corpus.num_paragraphs());
    evaluated.insert(0);
    const std::vector<ParaIndex> rm{1};
    view.remove(rm);
    CandidateSet cands;
    cands.entries.push_back({5, 0.9, {2}});
    cands.entries.push_back({6, 0.8, {2}});
    const auto b = assemble_batch(cands, 6, 42, view, evaluated);
    REQUIRE(b.entries.size() == 6);
    CHECK(b.fallback_count() == 4);
    std::set<ParaIndex> seen;
    for (const auto& e : b.entries) {
      CHECK(seen.insert(e.para).second);
      CHECK(e.para != 0);
      CHECK(e.para != 1);
    }
    CHECK(seen.contains(5));
    CHECK(seen.contains(6));
    const auto again = assemble_batch(cands, 6, 42, view, evaluated);
    for (std::size_t i = 0; i < 6; ++i) CHECK(again.entries[i].para == b.entries[i].para);
  }

  TEST_CASE("batch is a uniform sample of the candidates when they suffice") {
    SyntheticSpec spec;
    spec.clusters = 1;
    spec.docs_per_cluster = 1;
    spec.paras_per_doc = 20;
    const auto synth = generate_planted_corpus(spec);
    KnowledgeBaseView view(synth.corpus);
    ParagraphSet evaluated(synth.corpus.num_paragraphs());
    CandidateSet cands;
    for (std::uint32_t k = 0; k < 10; ++k) cands.entries.push_back({k, 1.0 - 0.01 * k, {}});
    std::vector<int> hits(10, 0);
    for (std::uint64_t s = 0; s < 2000; ++s) {
      const auto b = assemble_batch(cands, 3, s, view, evaluated);
      CHECK(b.fallback_count() == 0);
      for (const auto& e : b.entries) ++hits[e.para];
    }
    for (int h : hits) CHECK(std::abs(h - 600) < 90);
  }

  TEST_CASE("hierarchical retrieval only returns eligible paragraphs of candidate documents") {
    SyntheticSpec spec;
    spec.clusters = 4;
    spec.docs_per_cluster = 3;
    spec.paras_per_doc = 6;
    spec.seed = 8;
    const auto synth = generate_planted_corpus(spec);
    HashingEmbedder e(32);
    EmbeddingProviderConfig cfg;
    cfg.dimension = 32;
    IndexBuildParams ip;
    ip.n_centroids = 3;
    const auto index = AbstractIndex::build(synth.corpus, e, cfg, ip);
    KnowledgeBaseView view(synth.corpus);
    ParagraphSet evaluated(synth.corpus.num_paragraphs());
    ParagraphEmbeddingCache cache(e, cfg);
    RetrievalContext ctx{view, evaluated, index, cache};
    std::vector<ParaIndex> all(synth.corpus.num_paragraphs());
    std::iota(all.begin(), all.end(), 0);
    cache.ensure(std::span<const ParaIndex>(all.data(), 3), [&](ParaIndex p) { return synth.corpus.paragraph(p).text; });
    evaluated.insert(0);
    RetrievalConfig rc;
    rc.k = 5;
    rc.k_doc = 2;
    rc.n_probe = 3;
    const std::vector<ParaIndex> src{0};
    const auto docs = candidate_documents(src, ctx, rc);
    CHECK(docs.size() == 2);
    const auto r = hierarchical_retrieve(src, ctx, rc);
    CHECK(r.size() == 5);
    for (const auto& c : r.entries) {
      CHECK(c.key != 0);
      CHECK(std::find(docs.begin(), docs.end(), synth.corpus.paragraph(c.key).doc) != docs.end());
    }
    std::vector<ParaIndex> rm;
    for (DocIndex d : docs) {
      for (ParaIndex p : synth.corpus.document(d).paragraphs) rm.push_back(p);
    }
    view.remove(rm);
    CHECK_THROWS_AS(hierarchical_retrieve(src, ctx, rc), NeighborhoodExhausted);
  }
}
