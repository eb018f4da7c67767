#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sea/abstract_index.hpp"
#include "sea/embedding.hpp"
#include "sea/simd/kernels.hpp"
#include "sea/synthetic.hpp"

using namespace sea;

TEST_SUITE("embedding_index") {
  TEST_CASE("hashing embedder is deterministic and normalized") {
    HashingEmbedder e(32);
    EmbeddingProviderConfig cfg;
    cfg.dimension = 32;
    const std::vector<std::string> texts{"alpha beta gamma", "alpha beta gamma", "delta"};
    const auto v = embed_texts(texts, e, cfg);
    REQUIRE(v.size() == 3);
    CHECK(v[0].values == v[1].values);
    CHECK(v[0].values != v[2].values);
    for (const auto& x : v) {
      double s = 0.0;
      for (float f : x.values) s += static_cast<double>(f) * f;
      CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-6);
    }
  }

  TEST_CASE("empty input is rejected") {
    HashingEmbedder e(16);
    EmbeddingProviderConfig cfg;
    cfg.dimension = 16;
    const std::vector<std::string> texts{"ok", ""};
    CHECK_THROWS_AS(embed_texts(texts, e, cfg), EmbeddingError);
  }

  TEST_CASE("truncation keeps whole UTF-8 sequences") {
    const std::string s = "ab\xc3\xa9" "cd";
    CHECK(truncate_utf8(s, 3) == "ab\xc3\xa9");
    CHECK(truncate_utf8(s, 100) == s);
  }

  TEST_CASE("exact document search equals brute force; probing every list equals exact") {
    SyntheticSpec spec;
    spec.clusters = 6;
    spec.docs_per_cluster = 7;
    spec.paras_per_doc = 2;
    spec.seed = 12;
    const auto synth = generate_planted_corpus(spec);
    HashingEmbedder e(32);
    EmbeddingProviderConfig cfg;
    cfg.dimension = 32;
    IndexBuildParams p;
    p.n_centroids = 5;
    p.seed = 3;
    const auto index = AbstractIndex::build(synth.corpus, e, cfg, p);
    CHECK(index.num_docs() == synth.corpus.num_documents());
    std::size_t listed = 0;
    for (const auto& l : index.lists()) listed += l.size();
    CHECK(listed == index.num_docs());

    std::vector<std::string> texts;
    for (const auto& pa : synth.corpus.paragraphs()) texts.push_back(pa.text);
    const auto qs = embed_texts(texts, e, cfg);
    for (std::size_t qi = 0; qi < qs.size(); qi += 5) {
      const auto& q = qs[qi];
      std::vector<std::pair<double, DocIndex>> oracle;
      for (DocIndex d = 0; d < index.num_docs(); ++d) {
        const auto dv = index.doc_vector(d);
        oracle.emplace_back(simd::scalar::dot(q.values.data(), dv.values.data(), 32) / (q.norm * dv.norm), d);
      }
      std::sort(oracle.begin(), oracle.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return synth.corpus.document(a.second).doc_id < synth.corpus.document(b.second).doc_id;
      });
      const auto ex = index.exact(q, 8);
      REQUIRE(ex.size() == 8);
      for (std::size_t i = 0; i < ex.size(); ++i) {
        CHECK(ex[i].doc == oracle[i].second);
        CHECK(ex[i].similarity == oracle[i].first);
      }
      CHECK(index.query(q, 8, index.num_centroids()) == ex);
      const auto partial = index.query(q, 8, 1);
      CHECK(partial.size() <= 8);
      CHECK(std::is_sorted(partial.begin(), partial.end(),
                           [](const ScoredDoc& a, const ScoredDoc& b) { return a.similarity > b.similarity; }));
    }
  }

  TEST_CASE("index build is deterministic in its seed") {
    SyntheticSpec spec;
    spec.clusters = 4;
    spec.docs_per_cluster = 5;
    spec.paras_per_doc = 1;
    const auto synth = generate_planted_corpus(spec);
    HashingEmbedder e(16);
    EmbeddingProviderConfig cfg;
    cfg.dimension = 16;
    IndexBuildParams p;
    p.n_centroids = 4;
    p.seed = 9;
    const auto a = AbstractIndex::build(synth.corpus, e, cfg, p);
    const auto b = AbstractIndex::build(synth.corpus, e, cfg, p);
    CHECK(a.lists() == b.lists());
    p.n_centroids = 99;
    CHECK_THROWS(AbstractIndex::build(synth.corpus, e, cfg, p));
  }
}
