#include "sea/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace sea {
namespace {

using nlohmann::json;

bool is_string_array(const json& j) {
  if (!j.is_array()) return false;
  return std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_string(); });
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Returns an empty string when the record matches the schema, else a reason.
std::string schema_problem(const json& rec) {
  if (!rec.is_object()) return "record is not an object";
  if (!rec.contains("doc_id") || !rec["doc_id"].is_string() ||
      rec["doc_id"].get_ref<const std::string&>().empty())
    return "missing doc_id";
  if (!rec.contains("title") || !rec["title"].is_string()) return "missing title";
  if (!rec.contains("abstract") || !rec["abstract"].is_string()) return "missing abstract";
  if (!rec.contains("categories") || !is_string_array(rec["categories"]))
    return "categories must be a list of strings";
  if (!rec.contains("paragraphs") || !rec["paragraphs"].is_array())
    return "paragraphs must be a list";
  for (const auto& p : rec["paragraphs"]) {
    if (!p.is_object()) return "paragraph is not an object";
    if (!p.contains("text") || !p["text"].is_string()) return "paragraph without text";
    if (p.contains("section_path") && !is_string_array(p["section_path"]))
      return "section_path must be a list of strings";
    if (p.contains("para_id") && !p["para_id"].is_string()) return "para_id must be a string";
  }
  return {};
}

}  // namespace

std::string Corpus::make_para_id(std::string_view doc_id, std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%04zu", ordinal);
  return std::string(doc_id) + buf;
}

Corpus::Ingested Corpus::ingest(std::istream& in, const IngestOptions& opts) {
  Ingested out;
  Corpus& c = out.corpus;
  IngestStats& st = out.stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded()) {
      ++st.malformed_records;
      st.warnings.push_back("line " + std::to_string(line_no) + ": invalid JSON");
      continue;
    }
    if (auto why = schema_problem(rec); !why.empty()) {
      ++st.malformed_records;
      st.warnings.push_back("line " + std::to_string(line_no) + ": " + why);
      continue;
    }
    const auto& raw_paras = rec["paragraphs"];
    Document doc;
    doc.doc_id = rec["doc_id"].get<std::string>();
    doc.title = rec["title"].get<std::string>();
    doc.abstract = rec["abstract"].get<std::string>();
    doc.categories = rec["categories"].get<std::vector<std::string>>();

    auto reject_doc = [&](const std::string& why) {
      ++st.rejected_docs;
      st.rejected_paragraphs += raw_paras.size();
      st.warnings.push_back("line " + std::to_string(line_no) + ": doc " + doc.doc_id + " " + why);
    };
    if (trim(doc.abstract).empty()) {
      reject_doc("rejected: empty abstract");
      continue;
    }
    if (c.doc_lookup_.contains(doc.doc_id)) {
      reject_doc("rejected: duplicate doc_id");
      continue;
    }

    std::vector<Paragraph> kept;
    std::size_t short_paras = 0;
    for (std::size_t ord = 0; ord < raw_paras.size(); ++ord) {
      const auto& rp = raw_paras[ord];
      Paragraph p;
      p.text = rp["text"].get<std::string>();
      if (utf8_length(p.text) < opts.min_para_len || trim(p.text).empty()) {
        ++short_paras;
        continue;
      }
      p.para_id = rp.contains("para_id") ? rp["para_id"].get<std::string>()
                                         : make_para_id(doc.doc_id, ord);
      if (rp.contains("section_path")) {
        p.section_path = rp["section_path"].get<std::vector<std::string>>();
      }
      p.category = doc.categories.empty() ? std::string() : doc.categories.front();
      kept.push_back(std::move(p));
    }
    if (kept.empty()) {
      reject_doc("rejected: no paragraph reaches the minimum length");
      continue;
    }
    st.rejected_paragraphs += short_paras;

    const auto d = static_cast<DocIndex>(c.docs_.size());
    for (auto& p : kept) {
      p.doc = d;
      doc.paragraphs.push_back(static_cast<ParaIndex>(c.paras_.size()));
      c.para_lookup_.emplace(p.para_id, static_cast<ParaIndex>(c.paras_.size()));
      c.paras_.push_back(std::move(p));
    }
    c.doc_lookup_.emplace(doc.doc_id, d);
    c.docs_.push_back(std::move(doc));
  }
  st.docs = c.docs_.size();
  st.paragraphs = c.paras_.size();
  return out;
}

Corpus::Ingested Corpus::ingest_file(const std::filesystem::path& path, const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open corpus file " + path.string());
  return ingest(in, opts);
}

void Corpus::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  for (const auto& d : docs_) {
    json paras = json::array();
    for (ParaIndex pi : d.paragraphs) {
      const auto& p = paras_[pi];
      paras.push_back({{"para_id", p.para_id}, {"section_path", p.section_path}, {"text", p.text}});
    }
    json rec = {{"doc_id", d.doc_id},
                {"title", d.title},
                {"abstract", d.abstract},
                {"categories", d.categories},
                {"paragraphs", std::move(paras)}};
    out << rec.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

Corpus Corpus::load(const std::filesystem::path& path) {
  // Saved records carry explicit para_ids and already passed the length
  // filter, so a zero minimum reproduces the saved corpus exactly.
  auto ing = ingest_file(path, IngestOptions{0});
  if (ing.stats.malformed_records || ing.stats.rejected_docs) {
    throw RuntimeFailure("corpus store " + path.string() + " is damaged");
  }
  return std::move(ing.corpus);
}

std::optional<ParaIndex> Corpus::find_paragraph(std::string_view para_id) const {
  auto it = para_lookup_.find(std::string(para_id));
  if (it == para_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<DocIndex> Corpus::find_document(std::string_view doc_id) const {
  auto it = doc_lookup_.find(std::string(doc_id));
  if (it == doc_lookup_.end()) return std::nullopt;
  return it->second;
}

std::string Corpus::title_line(ParaIndex p) const {
  const auto& para = paras_.at(p);
  std::string out = docs_.at(para.doc).title;
  for (const auto& s : para.section_path) {
    out += '/';
    out += s;
  }
  return out;
}

std::vector<std::string> Corpus::categories() const {
  std::vector<std::string> out;
  for (const auto& p : paras_) out.push_back(p.category);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string Corpus::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& d : docs_) {
    h = fnv1a64(d.doc_id, h);
    h = fnv1a64(d.abstract, h);
    for (ParaIndex pi : d.paragraphs) {
      h = fnv1a64(paras_[pi].para_id, h);
      h = fnv1a64(paras_[pi].text, h);
    }
  }
  return hex64(h);
}

bool ParagraphSet::insert(ParaIndex p) {
  if (p >= member_.size()) member_.resize(static_cast<std::size_t>(p) + 1, 0);
  if (member_[p]) return false;
  member_[p] = 1;
  order_.push_back(p);
  return true;
}

void KnowledgeBaseView::remove(std::span<const ParaIndex> ids) {
  for (ParaIndex p : ids) {
    if (p >= corpus_->num_paragraphs()) throw std::out_of_range("remove: paragraph outside corpus");
  }
  for (ParaIndex p : ids) removed_.insert(p);
}

CategorySample sample_uniform_by_category(const KnowledgeBaseView& view, std::size_t n,
                                          std::span<const std::string> categories,
                                          std::uint64_t seed, const ParagraphSet* exclude) {
  if (n == 0) throw std::invalid_argument("sample_uniform_by_category: n must be >= 1");
  const Corpus& corpus = view.corpus();
  auto eligible = [&](ParaIndex p) {
    return view.active(p) && !(exclude && exclude->contains(p));
  };
  Rng rng(seed);
  CategorySample out;

  if (categories.empty()) {
    std::vector<ParaIndex> pool;
    for (ParaIndex p = 0; p < corpus.num_paragraphs(); ++p) {
      if (eligible(p)) pool.push_back(p);
    }
    out.short_supply = pool.size() < n;
    out.paragraphs = rng.sample(std::move(pool), n);
    return out;
  }

  std::vector<std::string> cats;
  for (const auto& c : categories) {
    if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
  }
  std::vector<std::vector<ParaIndex>> pools(cats.size());
  for (ParaIndex p = 0; p < corpus.num_paragraphs(); ++p) {
    if (!eligible(p)) continue;
    auto it = std::find(cats.begin(), cats.end(), corpus.paragraph(p).category);
    if (it != cats.end()) pools[static_cast<std::size_t>(it - cats.begin())].push_back(p);
  }
  std::size_t total = 0;
  for (const auto& pool : pools) total += pool.size();
  if (total <= n) {
    out.short_supply = total < n;
    for (auto& pool : pools) out.paragraphs.insert(out.paragraphs.end(), pool.begin(), pool.end());
    return out;
  }

  const std::size_t c = cats.size();
  std::vector<std::size_t> quota(c, n / c);
  std::vector<std::size_t> all(c);
  for (std::size_t i = 0; i < c; ++i) all[i] = i;
  for (std::size_t i : rng.sample(all, n % c)) ++quota[i];

  // Spread shortfalls of dry categories over those with spare paragraphs.
  for (;;) {
    std::size_t deficit = 0;
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < c; ++i) {
      if (quota[i] > pools[i].size()) {
        deficit += quota[i] - pools[i].size();
        quota[i] = pools[i].size();
      } else if (quota[i] < pools[i].size()) {
        open.push_back(i);
      }
    }
    if (deficit == 0) break;
    for (std::size_t i : open) quota[i] += deficit / open.size();
    for (std::size_t i : rng.sample(open, deficit % open.size())) ++quota[i];
  }

  for (std::size_t i = 0; i < c; ++i) {
    auto picked = rng.sample(pools[i], quota[i]);
    out.paragraphs.insert(out.paragraphs.end(), picked.begin(), picked.end());
  }
  return out;
}

const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> cats = {
      "General reference",        "Culture and the arts",
      "Geography and places",     "Health and fitness",
      "History and events",       "Human activities",
      "Mathematics and logic",    "Natural and physical sciences",
      "People and self",          "Philosophy and thinking",
      "Religion and belief systems", "Society and social sciences",
      "Technology and applied sciences"};
  return cats;
}

}  // namespace sea
