#include "sea/config.hpp"

#include <cmath>

#include "sea/common.hpp"
#include "sea/toml_util.hpp"

namespace sea {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_prune: return "no_prune";
    case Variant::random_select: return "random_select";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "full") return Variant::full;
  if (s == "no_prune") return Variant::no_prune;
  if (s == "random_select") return Variant::random_select;
  return std::nullopt;
}

std::string_view initial_mode_name(InitialMode m) {
  return m == InitialMode::category_uniform ? "category-uniform" : "fully-random";
}

void EngineConfig::validate() const {
  auto unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  if (!unit(xi)) throw ConfigError("xi must be in [0, 1]");
  if (!unit(gamma)) throw ConfigError("gamma must be in [0, 1]");
  if (retrieval.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (retrieval.k < 1) throw ConfigError("k must be >= 1");
  if (retrieval.k_doc < 1) throw ConfigError("k_doc must be >= 1");
  if (retrieval.n_probe < 1) throw ConfigError("n_probe must be >= 1");
  if (qa.n_base < 1) throw ConfigError("n_base must be >= 1");
  if (!unit(qa.floor)) throw ConfigError("qa floor must be in [0, 1]");
}

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

namespace {

std::size_t count(TableReader& r, std::string_view key, std::size_t def, std::int64_t min = 1) {
  return static_cast<std::size_t>(r.integer(key, static_cast<std::int64_t>(def), min));
}

void read_endpoint(TableReader& r, EndpointConfig& e) {
  e.base_url = r.string("base_url", e.base_url);
  e.model = r.string("model", e.model);
  e.api_key_env = r.string("api_key_env", e.api_key_env);
  e.timeout_s = r.number("timeout_s", e.timeout_s, 0.001);
  e.max_retries = static_cast<int>(r.integer("max_retries", e.max_retries, 0, 100));
  e.max_in_flight = count(r, "max_in_flight", e.max_in_flight);
  e.rate_per_s = r.number("rate_per_s", e.rate_per_s, 0.0);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source,
                       const std::filesystem::path& base_dir) {
  toml::table doc = parse_toml(text, source);
  RunConfig cfg;
  cfg.base_dir = base_dir;
  TableReader root(doc, source, "");

  if (const auto* t = root.table("engine")) {
    TableReader r(*t, source, "engine");
    auto& e = cfg.engine;
    e.xi = r.number("xi", e.xi, 0.0, 1.0);
    e.gamma = r.number("gamma", e.gamma, 0.0, 1.0);
    e.variant = *parse_variant(
        r.choice("variant", "full", {"full", "no_prune", "random_select"}));
    e.seed = static_cast<std::uint64_t>(r.integer("seed", 0, 0));
    e.initial_mode = r.choice("initial_mode", "category-uniform",
                              {"category-uniform", "fully-random"}) == "category-uniform"
                         ? InitialMode::category_uniform
                         : InitialMode::fully_random;
    e.categories = r.strings("categories", e.categories);
    e.max_in_flight = count(r, "max_in_flight", e.max_in_flight);
    e.verify_dag = r.boolean("verify_dag", e.verify_dag);
    r.finish();
  }
  if (const auto* t = root.table("retrieval")) {
    TableReader r(*t, source, "retrieval");
    auto& rc = cfg.engine.retrieval;
    rc.k = count(r, "k", rc.k);
    rc.k_doc = count(r, "k_doc", rc.k_doc);
    rc.batch_size = count(r, "batch_size", rc.batch_size);
    rc.n_probe = count(r, "n_probe", rc.n_probe);
    rc.max_in_flight = count(r, "max_in_flight", rc.max_in_flight);
    r.finish();
  }
  if (const auto* t = root.table("qa")) {
    TableReader r(*t, source, "qa");
    auto& q = cfg.engine.qa;
    q.n_base = count(r, "n_base", q.n_base);
    q.n_variants = count(r, "n_variants", q.n_variants, 0);
    q.max_retries = static_cast<int>(r.integer("max_retries", q.max_retries, 0, 100));
    q.floor = r.number("floor", q.floor, 0.0, 1.0);
    q.temperature = r.number("temperature", q.temperature, 0.0, 2.0);
    q.top_p = r.number("top_p", q.top_p, 0.0, 1.0);
    if (const auto* g = r.table("generator")) {
      TableReader gr(*g, source, "qa.generator");
      cfg.generator.kind = gr.choice("kind", "template", {"template", "remote"}) == "remote"
                               ? GeneratorKind::remote
                               : GeneratorKind::template_engine;
      read_endpoint(gr, cfg.generator.endpoint);
      cfg.generator.malformed_rate = gr.number("malformed_rate", 0.0, 0.0, 1.0);
      gr.finish();
    }
    r.finish();
  }
  if (const auto* t = root.table("testee")) {
    TableReader r(*t, source, "testee");
    auto& ts = cfg.testee;
    ts.kind = r.choice("kind", "simulated", {"simulated", "remote"}) == "remote"
                  ? TesteeKind::remote
                  : TesteeKind::simulated;
    read_endpoint(r, ts.endpoint);
    ts.sampling.temperature = r.number("temperature", ts.sampling.temperature, 0.0, 2.0);
    ts.sampling.top_p = r.number("top_p", ts.sampling.top_p, 0.0, 1.0);
    ts.max_retries = static_cast<int>(r.integer("retries", ts.max_retries, 0, 100));
    ts.landscape = r.string("landscape", ts.landscape);
    ts.model_tag = r.string("model_tag", ts.kind == TesteeKind::remote ? ts.endpoint.model
                                                                        : ts.model_tag);
    if (ts.kind == TesteeKind::remote && ts.endpoint.base_url.empty()) {
      r.fail("base_url", "required for a remote testee");
    }
    if (ts.kind == TesteeKind::simulated && ts.landscape.empty()) {
      r.fail("landscape", "required for a simulated testee");
    }
    r.finish();
  }
  if (const auto* t = root.table("embedding")) {
    TableReader r(*t, source, "embedding");
    auto& em = cfg.embedding;
    em.kind = r.choice("kind", "deterministic-test", {"deterministic-test", "remote"}) == "remote"
                  ? EmbeddingKind::remote
                  : EmbeddingKind::deterministic_test;
    read_endpoint(r, em.endpoint);
    em.dimension = count(r, "dimension", em.dimension);
    em.batch_size = count(r, "batch_size", em.batch_size);
    em.truncate_chars = count(r, "truncate_chars", em.truncate_chars);
    r.finish();
  }
  if (const auto* t = root.table("index")) {
    TableReader r(*t, source, "index");
    auto& ix = cfg.index;
    ix.n_centroids = count(r, "n_centroids", ix.n_centroids);
    ix.kmeans_iters = count(r, "kmeans_iters", ix.kmeans_iters);
    ix.max_train = count(r, "max_train", ix.max_train);
    ix.seed = static_cast<std::uint64_t>(r.integer("seed", 0, 0));
    r.finish();
  }
  if (const auto* t = root.table("budget")) {
    TableReader r(*t, source, "budget");
    auto& b = cfg.budget;
    b.mode = r.choice("mode", "api-calls", {"api-calls", "token-dollars"}) == "api-calls"
                 ? BudgetMode::api_calls
                 : BudgetMode::token_dollars;
    b.limit = r.number("limit", b.limit, 0.0);
    if (!(b.limit > 0.0)) r.fail("limit", "must be > 0");
    b.prices = r.string("prices", b.prices);
    if (r.has("scope")) {
      b.scope.clear();
      for (const auto& s : r.strings("scope", {})) {
        auto c = parse_category(s);
        if (!c) r.fail("scope", "unknown cost category \"" + s + "\"");
        b.scope.push_back(*c);
      }
    }
    if (b.mode == BudgetMode::token_dollars && b.prices.empty()) {
      r.fail("prices", "token-dollars mode needs a price table");
    }
    r.finish();
  }
  if (const auto* t = root.table("paths")) {
    TableReader r(*t, source, "paths");
    cfg.paths.corpus = r.string("corpus", cfg.paths.corpus);
    cfg.paths.index = r.string("index", cfg.paths.index);
    cfg.paths.runs = r.string("runs", cfg.paths.runs);
    r.finish();
  }
  root.finish();
  try {
    cfg.engine.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": cannot read config: " + e.what());
  }
  return parse_config(text, path.string(), path.parent_path());
}

namespace {

nlohmann::json endpoint_json(const EndpointConfig& e) {
  return {{"base_url", e.base_url},       {"model", e.model},
          {"api_key_env", e.api_key_env}, {"timeout_s", e.timeout_s},
          {"max_retries", e.max_retries}, {"max_in_flight", e.max_in_flight},
          {"rate_per_s", e.rate_per_s}};
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  const auto& e = c.engine;
  json scope = json::array();
  for (auto s : c.budget.scope) scope.push_back(category_name(s));
  return json{
      {"engine",
       {{"xi", e.xi},
        {"gamma", e.gamma},
        {"variant", variant_name(e.variant)},
        {"seed", e.seed},
        {"initial_mode", initial_mode_name(e.initial_mode)},
        {"categories", e.categories},
        {"max_in_flight", e.max_in_flight}}},
      {"retrieval",
       {{"k", e.retrieval.k},
        {"k_doc", e.retrieval.k_doc},
        {"batch_size", e.retrieval.batch_size},
        {"n_probe", e.retrieval.n_probe}}},
      {"qa",
       {{"n_base", e.qa.n_base},
        {"n_variants", e.qa.n_variants},
        {"max_retries", e.qa.max_retries},
        {"floor", e.qa.floor},
        {"temperature", e.qa.temperature},
        {"top_p", e.qa.top_p},
        {"generator",
         {{"kind", c.generator.kind == GeneratorKind::remote ? "remote" : "template"},
          {"endpoint", endpoint_json(c.generator.endpoint)},
          {"malformed_rate", c.generator.malformed_rate}}}}},
      {"testee",
       {{"kind", c.testee.kind == TesteeKind::remote ? "remote" : "simulated"},
        {"endpoint", endpoint_json(c.testee.endpoint)},
        {"temperature", c.testee.sampling.temperature},
        {"top_p", c.testee.sampling.top_p},
        {"retries", c.testee.max_retries},
        {"landscape", c.testee.landscape},
        {"model_tag", c.testee.model_tag}}},
      {"embedding",
       {{"kind", c.embedding.kind == EmbeddingKind::remote ? "remote" : "deterministic-test"},
        {"endpoint", endpoint_json(c.embedding.endpoint)},
        {"dimension", c.embedding.dimension},
        {"batch_size", c.embedding.batch_size},
        {"truncate_chars", c.embedding.truncate_chars}}},
      {"index",
       {{"n_centroids", c.index.n_centroids},
        {"kmeans_iters", c.index.kmeans_iters},
        {"max_train", c.index.max_train},
        {"seed", c.index.seed}}},
      {"budget",
       {{"mode", mode_name(c.budget.mode)},
        {"limit", c.budget.limit},
        {"prices", c.budget.prices},
        {"scope", scope}}},
      {"paths", {{"corpus", c.paths.corpus}, {"index", c.paths.index}, {"runs", c.paths.runs}}}};
}

}  // namespace sea
