#include "sea/abstract_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sea/simd/kernels.hpp"

namespace sea {
namespace {

constexpr char kMagic[8] = {'S', 'E', 'A', 'I', 'V', 'F', '0', '1'};

std::size_t argmax_row(const EmbeddingMatrix& m, std::span<const float> v, double v_norm,
                       std::vector<double>& scratch) {
  scratch.resize(m.rows());
  m.cosine_all(v, v_norm, scratch);
  std::size_t best = 0;
  for (std::size_t c = 1; c < scratch.size(); ++c) {
    if (scratch[c] > scratch[best]) best = c;
  }
  return best;
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw RuntimeFailure("index file truncated");
  return v;
}

void put_floats(std::ostream& out, std::span<const float> f) {
  out.write(reinterpret_cast<const char*>(f.data()),
            static_cast<std::streamsize>(f.size() * sizeof(float)));
}
std::vector<float> get_floats(std::istream& in, std::size_t n) {
  std::vector<float> f(n);
  if (!in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(n * sizeof(float))))
    throw RuntimeFailure("index file truncated");
  return f;
}

}  // namespace

AbstractIndex AbstractIndex::build(const Corpus& corpus, EmbeddingProvider& provider,
                                   const EmbeddingProviderConfig& cfg,
                                   const IndexBuildParams& params,
                                   const std::filesystem::path& checkpoint) {
  const std::size_t n_docs = corpus.num_documents();
  const std::size_t dim = provider.dimension();
  EmbeddingMatrix abstracts(dim);

  // Checkpoint layout: u64 dim, then per chunk: u64 first_doc, u64 count, floats.
  std::size_t done = 0;
  if (!checkpoint.empty() && std::filesystem::exists(checkpoint)) {
    std::ifstream in(checkpoint, std::ios::binary);
    std::uint64_t d = 0;
    if (in.read(reinterpret_cast<char*>(&d), sizeof d) && d == dim) {
      for (;;) {
        std::uint64_t first = 0, count = 0;
        if (!in.read(reinterpret_cast<char*>(&first), sizeof first)) break;
        if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) break;
        std::vector<float> f(count * dim);
        if (!in.read(reinterpret_cast<char*>(f.data()),
                     static_cast<std::streamsize>(f.size() * sizeof(float))))
          break;
        if (first != done) break;
        for (std::size_t i = 0; i < count; ++i) {
          std::span<const float> row(f.data() + i * dim, dim);
          abstracts.append(row, std::sqrt(simd::dot(row, row)));
        }
        done += count;
      }
    }
  }
  std::ofstream ckpt;
  if (!checkpoint.empty()) {
    if (done == 0) {
      ckpt.open(checkpoint, std::ios::binary | std::ios::trunc);
      put<std::uint64_t>(ckpt, dim);
    } else {
      // Rewrite only the verified prefix so a torn tail does not survive.
      EmbeddingMatrix keep = abstracts;
      ckpt.open(checkpoint, std::ios::binary | std::ios::trunc);
      put<std::uint64_t>(ckpt, dim);
      put<std::uint64_t>(ckpt, 0);
      put<std::uint64_t>(ckpt, done);
      put_floats(ckpt, keep.data());
    }
    ckpt.flush();
  }

  const std::size_t chunk = std::max<std::size_t>(1, params.checkpoint_chunk);
  while (done < n_docs) {
    const std::size_t end = std::min(n_docs, done + chunk);
    std::vector<std::string> texts;
    for (std::size_t d = done; d < end; ++d) {
      const auto& doc = corpus.document(static_cast<DocIndex>(d));
      texts.push_back(doc.title + "\n" + doc.abstract);
    }
    auto vecs = embed_texts(texts, provider, cfg);
    if (ckpt.is_open()) {
      put<std::uint64_t>(ckpt, done);
      put<std::uint64_t>(ckpt, vecs.size());
      for (const auto& v : vecs) put_floats(ckpt, v.values);
      ckpt.flush();
    }
    for (const auto& v : vecs) abstracts.append(v);
    done = end;
  }

  std::vector<std::string> ids;
  ids.reserve(n_docs);
  for (const auto& d : corpus.documents()) ids.push_back(d.doc_id);
  return build_from(abstracts, std::move(ids), params, provider.fingerprint());
}

AbstractIndex AbstractIndex::build_from(const EmbeddingMatrix& abstracts,
                                        std::vector<std::string> doc_ids,
                                        const IndexBuildParams& params, std::string provider_fp) {
  const std::size_t n = abstracts.rows();
  if (doc_ids.size() != n) throw std::invalid_argument("build_from: id count mismatch");
  if (params.n_centroids < 1 || params.n_centroids > std::max<std::size_t>(n, 1)) {
    throw ConfigError("n_centroids must be between 1 and the number of documents (" +
                      std::to_string(n) + ")");
  }
  AbstractIndex idx;
  idx.dim_ = abstracts.dim();
  idx.doc_ids_ = std::move(doc_ids);
  idx.provider_fp_ = std::move(provider_fp);
  idx.centroids_ = EmbeddingMatrix(idx.dim_);
  if (n == 0) return idx;

  Rng rng(child_seed(params.seed, 0, "kmeans"));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  auto train = rng.sample(all, std::min(n, params.max_train));
  std::sort(train.begin(), train.end());
  // Seed centroids with distinct training points.
  auto seeds = rng.sample(train, params.n_centroids);
  std::vector<std::vector<float>> cent;
  for (std::size_t s : seeds) {
    auto r = abstracts.row(s);
    cent.emplace_back(r.begin(), r.end());
  }

  std::vector<double> scratch;
  std::vector<std::size_t> assign(train.size(), 0);
  for (std::size_t iter = 0; iter < params.kmeans_iters; ++iter) {
    EmbeddingMatrix cm(idx.dim_);
    for (auto& c : cent) cm.append(c, std::sqrt(simd::dot(c, c)));
    for (std::size_t i = 0; i < train.size(); ++i) {
      assign[i] = argmax_row(cm, abstracts.row(train[i]), abstracts.norm(train[i]), scratch);
    }
    std::vector<std::vector<double>> sums(cent.size(), std::vector<double>(idx.dim_, 0.0));
    std::vector<std::size_t> counts(cent.size(), 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      auto r = abstracts.row(train[i]);
      const double inv = 1.0 / abstracts.norm(train[i]);
      for (std::size_t k = 0; k < idx.dim_; ++k) sums[assign[i]][k] += r[k] * inv;
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < cent.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cell keeps its previous centroid
      double n2 = 0.0;
      for (double v : sums[c]) n2 += v * v;
      if (n2 <= 0.0) continue;
      const double inv = 1.0 / std::sqrt(n2);
      for (std::size_t k = 0; k < idx.dim_; ++k) cent[c][k] = static_cast<float>(sums[c][k] * inv);
    }
  }
  for (auto& c : cent) idx.centroids_.append(c, std::sqrt(simd::dot(c, c)));
  idx.assign_all(abstracts);
  return idx;
}

void AbstractIndex::assign_all(const EmbeddingMatrix& abstracts) {
  const std::size_t nc = centroids_.rows();
  lists_.assign(nc, {});
  list_vectors_.assign(nc, EmbeddingMatrix(dim_));
  where_.assign(abstracts.rows(), {0, 0});
  std::vector<double> scratch;
  for (std::size_t d = 0; d < abstracts.rows(); ++d) {
    const std::size_t c = argmax_row(centroids_, abstracts.row(d), abstracts.norm(d), scratch);
    where_[d] = {static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(lists_[c].size())};
    lists_[c].push_back(static_cast<DocIndex>(d));
    list_vectors_[c].append(abstracts.row(d), abstracts.norm(d));
  }
}

EmbeddingVector AbstractIndex::doc_vector(DocIndex d) const {
  const auto [l, r] = where_.at(d);
  return list_vectors_[l].vector(r);
}

void AbstractIndex::scan(const std::vector<std::size_t>& list_ids, const EmbeddingVector& q,
                         std::size_t k, std::vector<ScoredDoc>& out) const {
  std::vector<double> sims;
  for (std::size_t l : list_ids) {
    const auto& m = list_vectors_[l];
    sims.resize(m.rows());
    m.cosine_all(q.values, q.norm, sims);
    for (std::size_t i = 0; i < sims.size(); ++i) out.push_back({lists_[l][i], sims[i]});
  }
  auto before = [&](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return doc_ids_[a.doc] < doc_ids_[b.doc];
  };
  if (out.size() > k) {
    std::nth_element(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), before);
    out.resize(k);
  }
  std::sort(out.begin(), out.end(), before);
}

std::vector<ScoredDoc> AbstractIndex::query(const EmbeddingVector& q, std::size_t k,
                                            std::size_t n_probe) const {
  if (k == 0) throw std::invalid_argument("query: k must be >= 1");
  std::vector<ScoredDoc> out;
  if (doc_ids_.empty()) return out;
  if (q.dim() != dim_) throw std::invalid_argument("query: dimension mismatch");
  const std::size_t nc = centroids_.rows();
  std::vector<double> csim(nc);
  centroids_.cosine_all(q.values, q.norm, csim);
  std::vector<std::size_t> order(nc);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t probe = std::clamp<std::size_t>(n_probe, 1, nc);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(probe), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (csim[a] != csim[b]) return csim[a] > csim[b];
                      return a < b;
                    });
  order.resize(probe);
  scan(order, q, k, out);
  return out;
}

std::vector<ScoredDoc> AbstractIndex::exact(const EmbeddingVector& q, std::size_t k) const {
  std::vector<std::size_t> all(lists_.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<ScoredDoc> out;
  scan(all, q, k, out);
  return out;
}

void AbstractIndex::save(const std::filesystem::path& bin, const std::filesystem::path& manifest,
                         const std::string& corpus_fp) const {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, dim_);
  put<std::uint64_t>(out, centroids_.rows());
  put<std::uint64_t>(out, doc_ids_.size());
  put<std::uint64_t>(out, provider_fp_.size());
  out.write(provider_fp_.data(), static_cast<std::streamsize>(provider_fp_.size()));
  for (const auto& id : doc_ids_) {
    put<std::uint64_t>(out, id.size());
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  put_floats(out, centroids_.data());
  for (std::size_t l = 0; l < lists_.size(); ++l) {
    put<std::uint64_t>(out, lists_[l].size());
    out.write(reinterpret_cast<const char*>(lists_[l].data()),
              static_cast<std::streamsize>(lists_[l].size() * sizeof(DocIndex)));
    put_floats(out, list_vectors_[l].data());
  }
  write_file_atomic(bin, out.str());

  std::ostringstream m;
  m << "format_version=" << kFormatVersion << "\n"
    << "d=" << dim_ << "\n"
    << "n_centroids=" << centroids_.rows() << "\n"
    << "n_docs=" << doc_ids_.size() << "\n"
    << "provider=" << provider_fp_ << "\n"
    << "corpus=" << corpus_fp << "\n";
  write_file_atomic(manifest, m.str());
}

AbstractIndex AbstractIndex::load(const std::filesystem::path& bin) {
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open index " + bin.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kMagic)) {
    throw RuntimeFailure(bin.string() + " is not an index file");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) {
    throw RuntimeFailure(bin.string() + ": unsupported index format version");
  }
  AbstractIndex idx;
  idx.dim_ = get<std::uint64_t>(in);
  const auto nc = get<std::uint64_t>(in);
  const auto nd = get<std::uint64_t>(in);
  auto read_str = [&] {
    const auto len = get<std::uint64_t>(in);
    std::string s(len, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(len))) throw RuntimeFailure("index truncated");
    return s;
  };
  idx.provider_fp_ = read_str();
  idx.doc_ids_.reserve(nd);
  for (std::uint64_t i = 0; i < nd; ++i) idx.doc_ids_.push_back(read_str());
  idx.centroids_ = EmbeddingMatrix(idx.dim_);
  const auto cf = get_floats(in, nc * idx.dim_);
  for (std::uint64_t c = 0; c < nc; ++c) {
    std::span<const float> row(cf.data() + c * idx.dim_, idx.dim_);
    idx.centroids_.append(row, std::sqrt(simd::dot(row, row)));
  }
  idx.lists_.resize(nc);
  idx.list_vectors_.assign(nc, EmbeddingMatrix(idx.dim_));
  idx.where_.assign(nd, {0, 0});
  for (std::uint64_t l = 0; l < nc; ++l) {
    const auto cnt = get<std::uint64_t>(in);
    idx.lists_[l].resize(cnt);
    if (!in.read(reinterpret_cast<char*>(idx.lists_[l].data()),
                 static_cast<std::streamsize>(cnt * sizeof(DocIndex))))
      throw RuntimeFailure("index truncated");
    const auto vf = get_floats(in, cnt * idx.dim_);
    for (std::uint64_t r = 0; r < cnt; ++r) {
      std::span<const float> row(vf.data() + r * idx.dim_, idx.dim_);
      idx.list_vectors_[l].append(row, std::sqrt(simd::dot(row, row)));
      idx.where_.at(idx.lists_[l][r]) = {static_cast<std::uint32_t>(l),
                                         static_cast<std::uint32_t>(r)};
    }
  }
  return idx;
}

}  // namespace sea
