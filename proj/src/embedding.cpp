#include "sea/embedding.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <utility>

#include "sea/simd/kernels.hpp"

namespace sea {

EmbeddingVector EmbeddingVector::from_raw(std::vector<float> raw) {
  const double n2 = simd::dot(raw, raw);
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw EmbeddingError("zero or non-finite embedding");
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : raw) x = static_cast<float>(x * inv);
  EmbeddingVector v;
  v.values = std::move(raw);
  v.norm = std::sqrt(simd::dot(v.values, v.values));
  return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return simd::dot(a.values, b.values) / (a.norm * b.norm);
}

void EmbeddingMatrix::append(const EmbeddingVector& v) { append(v.values, v.norm); }

void EmbeddingMatrix::append(std::span<const float> values, double norm) {
  if (values.size() != dim_) throw std::invalid_argument("EmbeddingMatrix: dimension mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  norms_.push_back(norm);
}

EmbeddingVector EmbeddingMatrix::vector(std::size_t i) const {
  auto r = row(i);
  return EmbeddingVector{{r.begin(), r.end()}, norms_[i]};
}

void EmbeddingMatrix::cosine_all(std::span<const float> query, double query_norm,
                                 std::span<double> out) const {
  simd::dot_rows(query, data_, dim_, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= (query_norm * norms_[i]);
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("embedding dimension must be >= 1");
}

std::string HashingEmbedder::fingerprint() const {
  return "hashing-bow-fnv1a64/d=" + std::to_string(dim_);
}

std::vector<std::string> HashingEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    const bool word = std::isalnum(c) || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::vector<float>> HashingEmbedder::embed_raw(std::span<const std::string> texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    std::vector<float> v(dim_, 0.0f);
    for (const auto& tok : tokenize(t)) {
      const std::uint64_t h = fnv1a64(tok);
      v[h % dim_] += (h >> 63) ? -1.0f : 1.0f;
    }
    out.push_back(std::move(v));
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(EndpointConfig endpoint, std::size_t dim)
    : client_(std::move(endpoint)), dim_(dim) {}

std::string RemoteEmbedder::fingerprint() const {
  return "openai-embeddings/" + client_.config().model + "/d=" + std::to_string(dim_);
}

std::vector<std::vector<float>> RemoteEmbedder::embed_raw(std::span<const std::string> texts) {
  nlohmann::json body = {{"model", client_.config().model},
                         {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  auto res = client_.post_json("/embeddings", body);
  if (!res.ok) throw EmbeddingError("embedding request failed: " + res.error);
  const auto& data = res.body.value("data", nlohmann::json::array());
  if (!data.is_array() || data.size() != texts.size()) {
    throw EmbeddingError("embedding reply has wrong item count");
  }
  std::vector<std::vector<float>> out(texts.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& item = data[i];
    const std::size_t idx = item.value("index", i);
    if (idx >= out.size() || !item.contains("embedding") || !item["embedding"].is_array()) {
      throw EmbeddingError("malformed embedding item");
    }
    out[idx] = item["embedding"].get<std::vector<float>>();
    if (out[idx].size() != dim_) {
      throw EmbeddingError("embedding dimension " + std::to_string(out[idx].size()) +
                           " differs from configured " + std::to_string(dim_));
    }
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg) {
  if (cfg.kind == EmbeddingKind::remote) {
    return std::make_unique<RemoteEmbedder>(cfg.endpoint, cfg.dimension);
  }
  return std::make_unique<HashingEmbedder>(cfg.dimension);
}

std::string truncate_utf8(std::string_view text, std::size_t limit) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (chars == limit) return std::string(text.substr(0, i));
      ++chars;
    }
  }
  return std::string(text);
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts,
                                         EmbeddingProvider& provider,
                                         const EmbeddingProviderConfig& cfg) {
  if (texts.empty()) throw EmbeddingError("embed_texts: no input");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].find_first_not_of(" \t\r\n") == std::string::npos) {
      throw EmbeddingError("embed_texts: item " + std::to_string(i) + " is empty");
    }
  }
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  const std::size_t n_batches = (texts.size() + batch - 1) / batch;
  std::vector<std::vector<std::vector<float>>> raw(n_batches);
  const bool remote = cfg.kind == EmbeddingKind::remote;
  const int attempts = remote ? 1 + std::max(0, cfg.endpoint.max_retries) : 1;
  parallel_for(n_batches, remote ? cfg.endpoint.max_in_flight : 1, [&](std::size_t b) {
    std::vector<std::string> chunk;
    for (std::size_t i = b * batch; i < std::min(texts.size(), (b + 1) * batch); ++i) {
      chunk.push_back(truncate_utf8(texts[i], cfg.truncate_chars));
    }
    std::string last_error;
    for (int a = 0; a < attempts; ++a) {
      try {
        raw[b] = provider.embed_raw(chunk);
        if (raw[b].size() != chunk.size()) throw EmbeddingError("provider returned wrong count");
        return;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    throw EmbeddingError("embedding batch " + std::to_string(b) + " failed: " + last_error);
  });

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (auto& chunk : raw) {
    for (auto& v : chunk) {
      if (v.size() != provider.dimension()) throw EmbeddingError("provider dimension mismatch");
      try {
        out.push_back(EmbeddingVector::from_raw(std::move(v)));
      } catch (const EmbeddingError&) {
        throw EmbeddingError("embed_texts: item " + std::to_string(out.size()) +
                             " produced a zero vector");
      }
    }
  }
  return out;
}

ParagraphEmbeddingCache::ParagraphEmbeddingCache(EmbeddingProvider& provider,
                                                 EmbeddingProviderConfig cfg)
    : provider_(provider), cfg_(std::move(cfg)) {
  cfg_.dimension = provider.dimension();
}

void ParagraphEmbeddingCache::attach_file(const std::filesystem::path& path) {
  std::lock_guard lk(mu_);
  file_ = path;
  if (std::filesystem::exists(path)) {
    for (auto& [p, v] : read_file(path, cfg_.dimension)) vectors_.insert_or_assign(p, std::move(v));
  }
}

std::unordered_map<ParaIndex, EmbeddingVector> ParagraphEmbeddingCache::read_file(
    const std::filesystem::path& path, std::size_t dim) {
  std::unordered_map<ParaIndex, EmbeddingVector> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read " + path.string());
  std::uint32_t header[2];
  if (!in.read(reinterpret_cast<char*>(header), sizeof header) || header[0] != 0x53454145u) {
    throw RuntimeFailure(path.string() + ": not an embedding cache");
  }
  if (header[1] != dim) {
    throw RuntimeFailure(path.string() + ": embedding dimension " + std::to_string(header[1]) +
                         " does not match " + std::to_string(dim));
  }
  for (;;) {
    std::uint32_t p;
    std::vector<float> v(dim);
    if (!in.read(reinterpret_cast<char*>(&p), sizeof p)) break;
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(dim * sizeof(float)))) {
      break;  // torn tail record from an interrupted write
    }
    EmbeddingVector e;
    e.norm = std::sqrt(simd::dot(v, v));
    e.values = std::move(v);
    out.insert_or_assign(p, std::move(e));
  }
  return out;
}

void ParagraphEmbeddingCache::ensure_texts(std::span<const ParaIndex> missing,
                                           const std::vector<std::string>& texts) {
  auto vecs = embed_texts(texts, provider_, cfg_);
  std::lock_guard lk(mu_);
  ++provider_calls_;
  if (cfg_.kind == EmbeddingKind::remote) {
    std::size_t chars = 0;
    for (const auto& t : texts) chars += std::min(t.size(), cfg_.truncate_chars);
    const std::size_t batch = std::max<std::size_t>(1, cfg_.batch_size);
    Usage u = Usage::estimate(chars, 0);
    u.calls = static_cast<std::int64_t>((texts.size() + batch - 1) / batch);
    pending_usage_.push_back(u);
  }
  std::ofstream out;
  if (!file_.empty()) {
    const bool fresh = !std::filesystem::exists(file_);
    out.open(file_, std::ios::binary | std::ios::app);
    if (!out) throw RuntimeFailure("cannot append to " + file_.string());
    if (fresh) {
      const std::uint32_t header[2] = {0x53454145u, static_cast<std::uint32_t>(cfg_.dimension)};
      out.write(reinterpret_cast<const char*>(header), sizeof header);
    }
  }
  for (std::size_t i = 0; i < missing.size(); ++i) {
    if (out.is_open()) {
      const std::uint32_t p = missing[i];
      out.write(reinterpret_cast<const char*>(&p), sizeof p);
      out.write(reinterpret_cast<const char*>(vecs[i].values.data()),
                static_cast<std::streamsize>(vecs[i].values.size() * sizeof(float)));
    }
    vectors_.insert_or_assign(missing[i], std::move(vecs[i]));
  }
}

std::vector<Usage> ParagraphEmbeddingCache::drain_usage() {
  std::lock_guard lk(mu_);
  return std::exchange(pending_usage_, {});
}

bool ParagraphEmbeddingCache::contains(ParaIndex p) const {
  std::lock_guard lk(mu_);
  return vectors_.contains(p);
}

const EmbeddingVector& ParagraphEmbeddingCache::get(ParaIndex p) const {
  std::lock_guard lk(mu_);
  auto it = vectors_.find(p);
  if (it == vectors_.end()) throw std::out_of_range("paragraph embedding not cached");
  return it->second;
}

}  // namespace sea
