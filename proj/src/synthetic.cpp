#include "sea/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sea/common.hpp"

namespace sea {

using nlohmann::json;

json SyntheticSpec::to_json() const {
  return json{{"clusters", clusters},         {"docs_per_cluster", docs_per_cluster},
              {"paras_per_doc", paras_per_doc}, {"cluster_vocab", cluster_vocab},
              {"doc_vocab", doc_vocab},       {"common_vocab", common_vocab},
              {"words_per_para", words_per_para}, {"p_cluster", p_cluster},
              {"p_doc", p_doc},               {"categories", categories},
              {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  s.clusters = j.value("clusters", s.clusters);
  s.docs_per_cluster = j.value("docs_per_cluster", s.docs_per_cluster);
  s.paras_per_doc = j.value("paras_per_doc", s.paras_per_doc);
  s.cluster_vocab = j.value("cluster_vocab", s.cluster_vocab);
  s.doc_vocab = j.value("doc_vocab", s.doc_vocab);
  s.common_vocab = j.value("common_vocab", s.common_vocab);
  s.words_per_para = j.value("words_per_para", s.words_per_para);
  s.p_cluster = j.value("p_cluster", s.p_cluster);
  s.p_doc = j.value("p_doc", s.p_doc);
  s.categories = j.value("categories", s.categories);
  s.seed = j.value("seed", s.seed);
  if (s.clusters == 0 || s.docs_per_cluster == 0 || s.paras_per_doc == 0 || s.cluster_vocab == 0 ||
      s.doc_vocab == 0 || s.common_vocab == 0 || s.words_per_para == 0) {
    throw ConfigError("synthetic spec: sizes must be >= 1");
  }
  if (s.p_cluster < 0 || s.p_doc < 0 || s.p_cluster + s.p_doc > 1) {
    throw ConfigError("synthetic spec: p_cluster + p_doc must be within [0, 1]");
  }
  if (s.categories.empty()) throw ConfigError("synthetic spec: categories must be non-empty");
  return s;
}

namespace {

std::string word(char kind, std::size_t owner, std::size_t i) {
  return std::string(1, kind) + std::to_string(owner) + "x" + std::to_string(i);
}

std::string sentence_block(Rng& rng, const SyntheticSpec& s, std::size_t cluster,
                           std::size_t doc, std::size_t n_words) {
  std::string out;
  for (std::size_t w = 0; w < n_words; ++w) {
    const double u = rng.uniform01();
    std::string tok;
    if (u < s.p_cluster) {
      tok = word('c', cluster, rng.below(s.cluster_vocab));
    } else if (u < s.p_cluster + s.p_doc) {
      tok = word('d', doc, rng.below(s.doc_vocab));
    } else {
      tok = word('g', 0, rng.below(s.common_vocab));
    }
    if (!out.empty()) out += (w % 12 == 0) ? ". " : " ";
    out += tok;
  }
  out += '.';
  return out;
}

}  // namespace

std::string synthetic_corpus_jsonl(const SyntheticSpec& s) {
  Rng rng(child_seed(s.seed, 0, "synthetic-corpus"));
  std::ostringstream os;
  std::size_t doc = 0;
  for (std::size_t c = 0; c < s.clusters; ++c) {
    for (std::size_t d = 0; d < s.docs_per_cluster; ++d, ++doc) {
      json paras = json::array();
      for (std::size_t p = 0; p < s.paras_per_doc; ++p) {
        paras.push_back(json{{"section_path", {"Section " + std::to_string(p + 1)}},
                             {"text", sentence_block(rng, s, c, doc, s.words_per_para)}});
      }
      char id[32];
      std::snprintf(id, sizeof id, "syn%05zu", doc);
      json rec{{"doc_id", id},
               {"title", "Topic " + std::to_string(c) + " article " + std::to_string(d)},
               {"abstract", sentence_block(rng, s, c, doc, s.words_per_para)},
               {"categories", {s.categories[c % s.categories.size()]}},
               {"paragraphs", paras}};
      os << rec.dump() << '\n';
    }
  }
  return os.str();
}

SyntheticCorpus generate_planted_corpus(const SyntheticSpec& s) {
  std::istringstream in(synthetic_corpus_jsonl(s));
  auto ingested = Corpus::ingest(in, IngestOptions{0});
  SyntheticCorpus out{std::move(ingested.corpus), {}, {}};
  const Corpus& corpus = out.corpus;
  out.doc_cluster.resize(corpus.num_documents());
  for (DocIndex d = 0; d < corpus.num_documents(); ++d) {
    out.doc_cluster[d] = static_cast<std::uint32_t>(d / s.docs_per_cluster);
  }
  out.para_cluster.resize(corpus.num_paragraphs());
  for (ParaIndex p = 0; p < corpus.num_paragraphs(); ++p) {
    out.para_cluster[p] = out.doc_cluster[corpus.paragraph(p).doc];
  }
  return out;
}

ErrorRegion plant_region(const std::vector<EmbeddingVector>& vecs, const PlantedRegion& r) {
  if (vecs.empty()) throw std::invalid_argument("plant_region: no paragraphs");
  const EmbeddingVector& c = vecs.at(r.center);
  std::vector<double> dist;
  dist.reserve(vecs.size());
  for (const auto& v : vecs) dist.push_back(1.0 - cosine(c, v));
  std::sort(dist.begin(), dist.end());
  const auto want = static_cast<std::size_t>(
      std::ceil(std::clamp(r.fraction, 0.0, 1.0) * static_cast<double>(vecs.size())));
  const std::size_t idx = std::min(vecs.size() - 1, want == 0 ? 0 : want - 1);
  return ErrorRegion{c, dist[idx], r.error_prob};
}

std::unique_ptr<SimulationWorld> build_world(const SimulationSetup& setup) {
  auto w = std::make_unique<SimulationWorld>();
  w->synth = generate_planted_corpus(setup.spec);
  const Corpus& corpus = w->synth.corpus;
  w->embedder = std::make_unique<HashingEmbedder>(setup.dimension);
  w->embed_cfg.kind = EmbeddingKind::deterministic_test;
  w->embed_cfg.dimension = setup.dimension;

  std::vector<std::string> texts;
  texts.reserve(corpus.num_paragraphs());
  for (const auto& p : corpus.paragraphs()) texts.push_back(p.text);
  w->para_vectors = embed_texts(texts, *w->embedder, w->embed_cfg);

  IndexBuildParams ip = setup.index;
  ip.seed = child_seed(setup.spec.seed, 0, "index");
  w->index = AbstractIndex::build(corpus, *w->embedder, w->embed_cfg, ip);

  Rng rng(child_seed(setup.spec.seed, 0, "region-center"));
  w->center = static_cast<ParaIndex>(rng.below(corpus.num_paragraphs()));
  ErrorRegion region =
      plant_region(w->para_vectors, PlantedRegion{w->center, setup.region_fraction,
                                                  setup.region_error});
  w->landscape.regions.push_back(region);
  w->landscape.base_error_prob = setup.base_error;
  w->landscape.seed = child_seed(setup.spec.seed, 0, "landscape");
  for (ParaIndex p = 0; p < corpus.num_paragraphs(); ++p) {
    if (1.0 - cosine(region.center, w->para_vectors[p]) <= region.radius) {
      w->region_members.push_back(p);
    }
  }
  return w;
}

}  // namespace sea
