#include "sea/app.hpp"

#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "sea/common.hpp"
#include "sea/prompts.hpp"
#include "sea/run_store.hpp"

namespace sea::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TesteeParts {
  std::unique_ptr<ChatModel> chat;
  std::unique_ptr<Testee> testee;
  std::optional<ErrorLandscape> landscape;
};

fs::path pick(const fs::path& override_path, const RunConfig& cfg, const std::string& configured) {
  if (!override_path.empty()) return override_path;
  if (configured.empty()) return {};
  return cfg.resolve(configured);
}

ErrorLandscape load_landscape_file(const fs::path& path, EmbeddingProvider& embedder,
                                   const EmbeddingProviderConfig& ecfg, const Corpus* corpus) {
  auto para_vector = [&](std::string_view id) -> std::optional<EmbeddingVector> {
    if (!corpus) return std::nullopt;
    auto p = corpus->find_paragraph(id);
    if (!p) return std::nullopt;
    std::vector<std::string> text{corpus->paragraph(*p).text};
    return embed_texts(text, embedder, ecfg).at(0);
  };
  return ErrorLandscape::load(path, &embedder, para_vector);
}

TesteeParts make_testee(const RunConfig& cfg, const fs::path& landscape_override,
                        EmbeddingProvider& embedder, const Corpus* corpus) {
  TesteeParts out;
  if (cfg.testee.kind == TesteeKind::remote) {
    out.chat = std::make_unique<RemoteChatModel>(cfg.testee.endpoint);
    out.testee =
        std::make_unique<RemoteTestee>(*out.chat, cfg.testee.sampling, cfg.testee.max_retries);
    return out;
  }
  const fs::path path = pick(landscape_override, cfg, cfg.testee.landscape);
  if (path.empty()) throw ConfigError("testee.landscape: required for a simulated testee");
  out.landscape = load_landscape_file(path, embedder, cfg.embedding, corpus);
  out.testee = std::make_unique<SimulatedTestee>(*out.landscape, cfg.testee.model_tag);
  return out;
}

std::string utc_stamp(const char* fmt) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

void apply_overrides(RunConfig& cfg, const json& o) {
  if (o.contains("variant")) {
    auto v = parse_variant(o.at("variant").get<std::string>());
    if (!v) throw ConfigError("unknown variant " + o.at("variant").dump());
    cfg.engine.variant = *v;
  }
  if (o.contains("seed")) cfg.engine.seed = o.at("seed").get<std::uint64_t>();
}

json overrides_json(const RunOptions& opts) {
  json o = json::object();
  if (opts.variant) o["variant"] = variant_name(*opts.variant);
  if (opts.seed) o["seed"] = *opts.seed;
  return o;
}

std::string default_run_id(const RunConfig& cfg) {
  return utc_stamp("%Y%m%d-%H%M%S") + "-" + std::string(variant_name(cfg.engine.variant)) +
         "-s" + std::to_string(cfg.engine.seed);
}

fs::path unique_dir(const fs::path& runs, const std::string& id, bool explicit_id) {
  fs::path dir = runs / id;
  if (explicit_id) return dir;
  for (int i = 2; fs::exists(dir / "manifest.json"); ++i) {
    dir = runs / (id + "-" + std::to_string(i));
  }
  return dir;
}

json artifact_paths() {
  return json{{"steps", "steps.jsonl"},         {"answers", "answers.jsonl"},
              {"qa", "qa.jsonl"},               {"calls", "calls.jsonl"},
              {"transcripts", "transcripts.jsonl"}, {"dag", "dag.json"},
              {"state", "state.json"},          {"embeddings", "para_embeddings.bin"},
              {"report", "report.json"}};
}

RuntimeFiles files_from_manifest(const fs::path& dir, const json& m) {
  RuntimeFiles f;
  const json files = m.value("files", json::object());
  auto get = [&](const char* key) -> fs::path {
    if (!files.contains(key)) return {};
    fs::path p = files.at(key).get<std::string>();
    return p.is_absolute() ? p : dir / p;
  };
  f.corpus = get("corpus");
  f.landscape = get("landscape");
  f.prices = get("prices");
  return f;
}

RunConfig run_config_of(const fs::path& dir, const json& m) {
  const fs::path cfg_path = dir / m.value("config_file", std::string("config.toml"));
  std::string text;
  try {
    text = read_file(cfg_path);
  } catch (const std::exception& e) {
    throw RuntimeFailure("run " + dir.string() + ": cannot read config snapshot: " + e.what());
  }
  RunConfig cfg = parse_config(text, cfg_path.string(), m.at("base_dir").get<std::string>());
  apply_overrides(cfg, m.value("overrides", json::object()));
  return cfg;
}

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) throw RuntimeFailure(dir.string() + " is not a run directory");
  return json::parse(read_file(p));
}

RunResult execute(Runtime& rt, RunStore& store, const RunOptions& opts, bool resuming) {
  rt.cache->attach_file(store.path("para_embeddings.bin"));
  Engine engine(rt.cfg.engine, rt.adapters(), &store);
  if (opts.hook) engine.set_phase_hook(opts.hook);
  if (resuming) engine.resume();
  RunResult res;
  res.dir = store.dir();
  res.run_id = read_manifest(store.dir()).value("run_id", store.dir().filename().string());
  res.summary = engine.run(opts.max_steps, opts.stop);
  write_report(store.dir());
  return res;
}

RunResult launch(Runtime& rt, const RunConfig& cfg, const fs::path& runs, const RunOptions& opts,
                 const std::string& config_text, json files, json extra) {
  const std::string id = opts.run_id ? *opts.run_id : default_run_id(cfg);
  const fs::path dir = unique_dir(runs, id, opts.run_id.has_value());
  auto store = RunStore::create(dir);
  write_file_atomic(store->path("config.toml"), config_text);
  if (rt.landscape) {
    write_file_atomic(store->path("landscape.json"), rt.landscape->to_json().dump());
    rt.load_landscape(store->path("landscape.json"));
    files["landscape"] = "landscape.json";
  }
  if (!cfg.budget.prices.empty() && !files.contains("prices")) {
    write_file_atomic(store->path("prices.toml"), read_file(cfg.resolve(cfg.budget.prices)));
    files["prices"] = "prices.toml";
  }
  json m{{"run_id", fs::relative(dir, runs).generic_string()},
         {"created_at", utc_stamp("%Y-%m-%dT%H:%M:%SZ")},
         {"status", "running"},
         {"termination", "none"},
         {"steps", 0},
         {"config", to_json(cfg)},
         {"config_file", "config.toml"},
         {"base_dir", fs::absolute(cfg.base_dir).lexically_normal().string()},
         {"overrides", overrides_json(opts)},
         {"fingerprints", rt.fingerprints()},
         {"model_tag", rt.model_tag()},
         {"embedding_dim", rt.cache->dimension()},
         {"files", files},
         {"artifacts", artifact_paths()}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  store->write_json("manifest.json", m);
  return execute(rt, *store, opts, false);
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------

std::unique_ptr<Runtime> Runtime::create(const RunConfig& cfg, const RuntimeFiles& files) {
  auto rt = std::make_unique<Runtime>();
  rt->cfg = cfg;
  const fs::path corpus_path = pick(files.corpus, cfg, cfg.paths.corpus);
  if (corpus_path.empty()) throw ConfigError("paths.corpus: required");
  if (!fs::exists(corpus_path)) {
    throw ConfigError("paths.corpus: " + corpus_path.string() + " does not exist");
  }
  rt->corpus = Corpus::load(corpus_path);
  if (rt->corpus.num_paragraphs() == 0) throw RuntimeFailure("corpus has no paragraphs");
  rt->embedder = make_embedding_provider(cfg.embedding);

  if (!cfg.paths.index.empty()) {
    const fs::path bin = cfg.resolve(cfg.paths.index) / "index.bin";
    auto ix = AbstractIndex::load(bin);
    if (ix.dim() != rt->embedder->dimension() ||
        ix.provider_fingerprint() != rt->embedder->fingerprint()) {
      throw RuntimeFailure(bin.string() + " was built with " + ix.provider_fingerprint() +
                           ", not " + rt->embedder->fingerprint());
    }
    if (ix.num_docs() != rt->corpus.num_documents()) {
      throw RuntimeFailure(bin.string() + " does not cover this corpus");
    }
    rt->index.emplace(std::move(ix));
  } else if (cfg.engine.variant != Variant::random_select) {
    rt->index.emplace(AbstractIndex::build(rt->corpus, *rt->embedder, cfg.embedding, cfg.index));
  }
  rt->cache = std::make_unique<ParagraphEmbeddingCache>(*rt->embedder, cfg.embedding);

  if (cfg.generator.kind == GeneratorKind::remote) {
    rt->generator = std::make_unique<RemoteChatModel>(cfg.generator.endpoint);
  } else {
    auto g = std::make_unique<TemplateGenerator>(cfg.engine.seed);
    g->set_malformed_rate(cfg.generator.malformed_rate);
    rt->generator = std::move(g);
  }

  auto parts = make_testee(cfg, files.landscape, *rt->embedder, &rt->corpus);
  rt->testee_chat = std::move(parts.chat);
  rt->testee = std::move(parts.testee);
  rt->landscape = std::move(parts.landscape);

  PriceTable prices;
  if (const fs::path p = pick(files.prices, cfg, cfg.budget.prices); !p.empty()) {
    prices = PriceTable::load(p);
  }
  rt->ledger = std::make_unique<BudgetLedger>(cfg.budget.mode, cfg.budget.limit,
                                              std::move(prices), cfg.budget.scope);
  return rt;
}

void Runtime::load_landscape(const fs::path& path) {
  if (cfg.testee.kind != TesteeKind::simulated) return;
  landscape = load_landscape_file(path, *embedder, cfg.embedding, &corpus);
  testee = std::make_unique<SimulatedTestee>(*landscape, cfg.testee.model_tag);
}

EngineAdapters Runtime::adapters() {
  EngineAdapters a;
  a.corpus = &corpus;
  a.index = index ? &*index : nullptr;
  a.cache = cache.get();
  a.generator = generator.get();
  a.testee = testee.get();
  a.ledger = ledger.get();
  a.charge_embeddings = cfg.embedding.kind == EmbeddingKind::remote;
  a.embedding_model = cfg.embedding.endpoint.model.empty() ? embedder->fingerprint()
                                                           : cfg.embedding.endpoint.model;
  return a;
}

json Runtime::fingerprints() const {
  json ix = nullptr;
  if (index) {
    ix = json{{"provider", index->provider_fingerprint()},
              {"dim", index->dim()},
              {"centroids", index->num_centroids()},
              {"docs", index->num_docs()}};
  }
  return json{{"corpus", corpus.fingerprint()},
              {"embedding", embedder->fingerprint()},
              {"index", ix},
              {"generator", generator->fingerprint()},
              {"testee", testee->fingerprint()},
              {"prompts", std::string(kPromptVersion)}};
}

// ---------------------------------------------------------------------------

fs::path resolve_run(const std::string& id_or_path, const fs::path& runs_dir) {
  if (fs::is_directory(id_or_path)) return id_or_path;
  const fs::path p = runs_dir / id_or_path;
  if (!fs::is_directory(p)) throw RuntimeFailure("no run named " + id_or_path);
  return p;
}

RunResult start_run(const fs::path& config_path, const RunOptions& opts) {
  RunConfig cfg = load_config(config_path);
  apply_overrides(cfg, overrides_json(opts));
  auto rt = Runtime::create(cfg);
  const fs::path runs = opts.runs_dir.empty() ? cfg.resolve(cfg.paths.runs) : opts.runs_dir;
  json files = json::object();
  files["corpus"] = fs::absolute(cfg.resolve(cfg.paths.corpus)).lexically_normal().string();
  return launch(*rt, cfg, runs, opts, read_file(config_path), files, json::object());
}

RunResult resume_run(const fs::path& run_dir, const RunOptions& opts) {
  const json m = read_manifest(run_dir);
  const RunConfig cfg = run_config_of(run_dir, m);
  auto rt = Runtime::create(cfg, files_from_manifest(run_dir, m));
  const json now = rt->fingerprints();
  for (const auto& [k, v] : m.at("fingerprints").items()) {
    if (now.value(k, json()) != v) {
      throw RuntimeFailure("resume: " + k + " fingerprint changed since the run started");
    }
  }
  auto store = RunStore::open(run_dir);
  return execute(*rt, *store, opts, true);
}

// ---------------------------------------------------------------------------

SimulationSetup simulation_setup_from_json(const json& j) {
  SimulationSetup s;
  const json syn = j.value("synthetic", json::object());
  s.spec = SyntheticSpec::from_json(syn.value("spec", json::object()));
  s.dimension = syn.value("dimension", s.dimension);
  s.region_fraction = syn.value("region_fraction", s.region_fraction);
  s.region_error = syn.value("region_error", s.region_error);
  s.base_error = j.value("base_error_prob", s.base_error);
  if (syn.contains("index")) {
    const json& ix = syn.at("index");
    s.index.n_centroids = ix.value("n_centroids", s.index.n_centroids);
    s.index.kmeans_iters = ix.value("kmeans_iters", s.index.kmeans_iters);
  }
  if (s.dimension == 0) throw ConfigError("synthetic.dimension must be >= 1");
  if (!(s.region_fraction > 0.0 && s.region_fraction <= 1.0)) {
    throw ConfigError("synthetic.region_fraction must be in (0, 1]");
  }
  return s;
}

RunResult simulate(const SimulateOptions& opts) {
  json lj;
  try {
    lj = json::parse(read_file(opts.landscape));
  } catch (const json::exception& e) {
    throw ConfigError(opts.landscape.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(opts.landscape.string() + ": cannot read: " + e.what());
  }
  if (!lj.contains("synthetic")) {
    throw ConfigError(opts.landscape.string() + ": simulate needs a \"synthetic\" block");
  }
  const SimulationSetup setup = simulation_setup_from_json(lj);
  auto world = build_world(setup);

  std::string config_text;
  fs::path base_dir = fs::current_path();
  if (!opts.config.empty()) {
    config_text = read_file(opts.config);
    base_dir = opts.config.parent_path();
  } else {
    config_text = "[embedding]\ndimension = " + std::to_string(setup.dimension) + "\n";
  }
  RunConfig cfg = parse_config(config_text, opts.config.empty() ? "<simulate>" : opts.config.string(),
                               base_dir);
  apply_overrides(cfg, overrides_json(opts.run));
  if (cfg.testee.kind != TesteeKind::simulated || cfg.embedding.kind != EmbeddingKind::deterministic_test) {
    throw ConfigError("simulate: config must use the simulated testee and deterministic-test embedding");
  }
  if (cfg.embedding.dimension != setup.dimension) {
    throw ConfigError("simulate: embedding.dimension " + std::to_string(cfg.embedding.dimension) +
                      " differs from synthetic.dimension " + std::to_string(setup.dimension));
  }
  cfg.paths.index.clear();

  const fs::path runs = opts.run.runs_dir.empty() ? cfg.resolve(cfg.paths.runs) : opts.run.runs_dir;
  RunOptions ro = opts.run;
  const std::string id = ro.run_id ? *ro.run_id : default_run_id(cfg);
  const fs::path dir = unique_dir(runs, id, ro.run_id.has_value());
  if (fs::exists(dir / "manifest.json")) throw RuntimeFailure(dir.string() + " already holds a run");
  ro.run_id = fs::relative(dir, runs).generic_string();
  fs::create_directories(dir);
  world->synth.corpus.save(dir / "corpus.jsonl");

  ErrorLandscape landscape = world->landscape;
  if (!lj.value("regions", json::array()).empty()) {
    const Corpus& corpus = world->synth.corpus;
    landscape = ErrorLandscape::from_json(lj, world->embedder.get(), [&](std::string_view pid) {
      auto p = corpus.find_paragraph(pid);
      return p ? std::optional<EmbeddingVector>(world->para_vectors[*p]) : std::nullopt;
    });
  } else if (lj.contains("seed")) {
    landscape.seed = lj.at("seed").get<std::uint64_t>();
  }
  write_file_atomic(dir / "landscape.json", landscape.to_json().dump());

  auto rt = Runtime::create(cfg, RuntimeFiles{dir / "corpus.jsonl", dir / "landscape.json", {}});
  json extra{{"synthetic", lj.at("synthetic")},
             {"landscape_source", fs::absolute(opts.landscape).string()}};
  return launch(*rt, cfg, runs, ro, config_text, json{{"corpus", "corpus.jsonl"}}, extra);
}

// ---------------------------------------------------------------------------

json ablate(const AblateOptions& opts) {
  const RunConfig base = load_config(opts.config);
  const fs::path runs = opts.runs_dir.empty() ? base.resolve(base.paths.runs) : opts.runs_dir;
  const std::string id = opts.ablation_id ? *opts.ablation_id : "ablate-" + utc_stamp("%Y%m%d-%H%M%S");
  const std::uint64_t seed0 = opts.seed_base ? *opts.seed_base : base.engine.seed;
  json variants = json::object();
  for (Variant v : opts.variants) variants[std::string(variant_name(v))] = json{{"runs", json::array()}};
  for (std::size_t i = 0; i < opts.seeds; ++i) {
    const std::uint64_t seed = seed0 + i;
    for (Variant v : opts.variants) {
      if (opts.stop && opts.stop->load()) break;
      RunOptions ro;
      ro.variant = v;
      ro.seed = seed;
      ro.runs_dir = runs;
      ro.max_steps = opts.max_steps;
      ro.stop = opts.stop;
      ro.run_id = id + "/" + std::string(variant_name(v)) + "-seed" + std::to_string(seed);
      const RunResult r = start_run(opts.config, ro);
      const json rep = json::parse(read_file(r.dir / "report.json"));
      variants[std::string(variant_name(v))]["runs"].push_back(
          json{{"run_id", r.run_id},
               {"seed", seed},
               {"status", status_name(r.summary.status)},
               {"steps", r.summary.steps},
               {"T_S", rep.at("totals").at("T_S")},
               {"source_errors", rep.at("totals").at("source_errors")}});
    }
  }
  for (auto& [name, v] : variants.items()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : v.at("runs")) {
      if (r.at("T_S").is_null()) continue;
      sum += r.at("T_S").get<double>();
      ++n;
    }
    v["mean_T_S"] = n ? json(sum / static_cast<double>(n)) : json(nullptr);
  }
  json out{{"ablation_id", id}, {"seed_base", seed0}, {"seeds", opts.seeds}, {"variants", variants}};
  fs::create_directories(runs / id);
  write_file_atomic(runs / id / "ablation.json", out.dump(2));
  return out;
}

// ---------------------------------------------------------------------------

json build_report(const fs::path& run_dir) {
  const json m = read_manifest(run_dir);
  std::vector<json> steps;
  if (fs::exists(run_dir / "steps.jsonl")) steps = read_jsonl(run_dir / "steps.jsonl");
  // Steps beyond the checkpoint belong to an interrupted step.
  std::int64_t committed = static_cast<std::int64_t>(steps.size());
  if (fs::exists(run_dir / "state.json")) {
    committed = json::parse(read_file(run_dir / "state.json")).at("t").get<std::int64_t>();
  }
  if (static_cast<std::int64_t>(steps.size()) > committed) steps.resize(static_cast<std::size_t>(committed));

  json series{{"t", json::array()},           {"T_E", json::array()},
              {"T_S", json::array()},         {"T_E_mean_of_means", json::array()},
              {"T_S_mean_of_means", json::array()}, {"admitted", json::array()},
              {"pruned", json::array()},      {"active_sources", json::array()},
              {"dag_nodes", json::array()},   {"fallback_count", json::array()},
              {"cost_delta", json::array()},  {"consumed", json::array()},
              {"note", json::array()}};
  std::size_t evaluated = 0;
  for (const auto& s : steps) {
    for (const char* k : {"t", "T_E", "T_S", "T_E_mean_of_means", "T_S_mean_of_means",
                          "active_sources", "dag_nodes", "fallback_count", "cost_delta",
                          "consumed", "note"}) {
      series[k].push_back(s.at(k));
    }
    series["admitted"].push_back(s.at("admitted").size());
    series["pruned"].push_back(s.at("pruned").size());
    evaluated += s.at("batch").size();
  }

  std::vector<json> calls;
  if (fs::exists(run_dir / "calls.jsonl")) calls = read_jsonl(run_dir / "calls.jsonl");
  const std::int64_t last_t = committed;
  std::erase_if(calls, [&](const json& c) { return c.at("step").get<std::int64_t>() > last_t; });
  double sum = 0.0;
  json by_cat = json::object();
  for (const auto& c : calls) {
    const std::string cat = c.at("category").get<std::string>();
    if (!by_cat.contains(cat)) {
      by_cat[cat] = json{{"amount", 0.0}, {"calls", 0}, {"prompt_tokens", 0}, {"completion_tokens", 0}};
    }
    json& b = by_cat[cat];
    b["amount"] = b["amount"].get<double>() + c.at("amount").get<double>();
    b["calls"] = b["calls"].get<std::int64_t>() + c.at("calls").get<std::int64_t>();
    b["prompt_tokens"] = b["prompt_tokens"].get<std::int64_t>() + c.at("prompt_tokens").get<std::int64_t>();
    b["completion_tokens"] =
        b["completion_tokens"].get<std::int64_t>() + c.at("completion_tokens").get<std::int64_t>();
    if (c.at("in_scope").get<bool>()) sum += c.at("amount").get<double>();
  }
  const double consumed = steps.empty() ? 0.0 : steps.back().at("consumed").get<double>();

  std::size_t sources = 0, active = 0;
  if (fs::exists(run_dir / "dag.json")) {
    const json dag = json::parse(read_file(run_dir / "dag.json"));
    for (const auto& n : dag.at("nodes")) {
      ++sources;
      if (n.at("active").get<bool>()) ++active;
    }
  }
  json tally = steps.empty() ? json{{"wrong", 0}, {"total", 0}, {"unparsable", 0}}
                             : steps.back().at("cumulative_tally");
  const auto total = tally.at("total").get<std::uint64_t>();
  const auto unparsable = tally.at("unparsable").get<std::uint64_t>();
  const ErrorsPerCost epc = errors_per_cost(sources, consumed);
  const std::string mode = m.at("config").at("budget").value("mode", std::string("api-calls"));

  json totals{{"steps", steps.size()},
              {"paragraphs_evaluated", evaluated},
              {"questions", total},
              {"wrong", tally.at("wrong")},
              {"unparsable", unparsable},
              {"unparsable_rate",
               total ? json(static_cast<double>(unparsable) / static_cast<double>(total)) : json(nullptr)},
              {"T_S", steps.empty() ? json(nullptr) : steps.back().at("T_S")},
              {"T_S_mean_of_means", steps.empty() ? json(nullptr) : steps.back().at("T_S_mean_of_means")},
              {"source_errors", sources},
              {"active_sources", active},
              {"consumed", consumed},
              {"by_category", by_cat}};
  return json{{"run_id", m.at("run_id")},
              {"status", m.at("status")},
              {"termination", m.value("termination", std::string("none"))},
              {"model_tag", m.value("model_tag", std::string())},
              {"variant", m.at("config").at("engine").at("variant")},
              {"budget", {{"mode", mode}, {"limit", m.at("config").at("budget").at("limit")}}},
              {"series", series},
              {"totals", totals},
              {"errors_per_cost",
               {{"n_sources", epc.n_sources},
                {"consumed", epc.consumed},
                {"ratio", opt_json(epc.ratio)},
                {"unit", mode == "api-calls" ? "calls per error" : "dollars per error"}}},
              {"reconciliation",
               {{"records", calls.size()}, {"sum_of_records", sum}, {"consumed", consumed},
                {"exact", sum == consumed}}}};
}

json write_report(const fs::path& run_dir) {
  json r = build_report(run_dir);
  write_file_atomic(run_dir / "report.json", r.dump(2));
  return r;
}

// ---------------------------------------------------------------------------

ExportResult export_bundle(const fs::path& run_dir, const fs::path& out_dir,
                           const std::string& model_tag) {
  const json m = read_manifest(run_dir);
  ExportResult res;
  res.dir = out_dir.empty() ? run_dir / "analysis" : out_dir;
  const std::string status = m.value("status", std::string("running"));
  if (status != "done" && status != "exhausted") {
    res.partial = true;
    res.warnings.push_back("run status is " + status +
                           "; the bundle reflects the last committed step only");
  }
  const std::size_t d = m.at("embedding_dim").get<std::size_t>();
  const RunConfig cfg = run_config_of(run_dir, m);
  const RuntimeFiles files = files_from_manifest(run_dir, m);
  const fs::path corpus_path = pick(files.corpus, cfg, cfg.paths.corpus);
  const Corpus corpus = Corpus::load(corpus_path);
  if (corpus.fingerprint() != m.at("fingerprints").at("corpus").get<std::string>()) {
    throw RuntimeFailure("export: corpus " + corpus_path.string() + " changed since the run");
  }

  json dag = json{{"nodes", json::array()}, {"edges", json::array()}};
  if (fs::exists(run_dir / "dag.json")) dag = json::parse(read_file(run_dir / "dag.json"));
  std::unordered_map<ParaIndex, EmbeddingVector> vectors;
  if (!dag.at("nodes").empty()) {
    vectors = ParagraphEmbeddingCache::read_file(run_dir / "para_embeddings.bin", d);
  }
  const std::string tag = model_tag.empty() ? m.value("model_tag", std::string()) : model_tag;

  std::string rows;
  for (const auto& n : dag.at("nodes")) {
    const auto id = n.at("id").get<std::string>();
    auto p = corpus.find_paragraph(id);
    if (!p) throw RuntimeFailure("export: source " + id + " is not in the corpus");
    auto it = vectors.find(*p);
    if (it == vectors.end()) throw RuntimeFailure("export: no stored embedding for " + id);
    if (it->second.dim() != d) {
      throw RuntimeFailure("export: embedding of " + id + " has dimension " +
                           std::to_string(it->second.dim()) + ", manifest says " + std::to_string(d));
    }
    json row{{"para_id", id},
             {"model_tag", tag},
             {"category", corpus.paragraph(*p).category},
             {"step", n.at("step")},
             {"para_error", n.at("error")},
             {"active", n.at("active")},
             {"embedding", it->second.values}};
    rows += row.dump();
    rows += '\n';
    ++res.rows;
  }

  fs::create_directories(res.dir);
  write_file_atomic(res.dir / "sources.jsonl", rows);
  const std::string steps =
      fs::exists(run_dir / "steps.jsonl") ? read_file(run_dir / "steps.jsonl") : std::string();
  std::string committed;
  {
    const json rep = build_report(run_dir);
    // Keep exactly the committed steps.
    std::size_t n = rep.at("totals").at("steps").get<std::size_t>(), pos = 0;
    for (std::size_t i = 0; i < n && pos < steps.size(); ++i) {
      const auto nl = steps.find('\n', pos);
      pos = nl == std::string::npos ? steps.size() : nl + 1;
    }
    committed = steps.substr(0, pos);
    write_file_atomic(res.dir / "report.json", rep.dump(2));
  }
  write_file_atomic(res.dir / "steps.jsonl", committed);
  write_file_atomic(res.dir / "dag.json", dag.dump());
  write_file_atomic(res.dir / "bundle.json",
                    json{{"run_id", m.at("run_id")},
                         {"model_tag", tag},
                         {"embedding_dim", d},
                         {"rows", res.rows},
                         {"status", status},
                         {"partial", res.partial},
                         {"warnings", res.warnings}}
                        .dump(2));
  return res;
}

// ---------------------------------------------------------------------------

namespace {

struct ProviderSubset {
  std::string label;
  std::string run_id;
  Corpus corpus;
  std::vector<QaItem> items;
  std::vector<AnswerRecord> answers;  // aligned with items
};

ProviderSubset load_provider(const fs::path& dir, bool sources_only) {
  const json m = read_manifest(dir);
  for (const char* f : {"qa.jsonl", "answers.jsonl", "state.json"}) {
    if (!fs::exists(dir / f)) {
      throw RuntimeFailure("crossval: provider run " + dir.string() + " has no " + f);
    }
  }
  ProviderSubset ps;
  ps.run_id = m.at("run_id").get<std::string>();
  ps.label = m.value("model_tag", ps.run_id);
  const RunConfig cfg = run_config_of(dir, m);
  ps.corpus = Corpus::load(pick(files_from_manifest(dir, m).corpus, cfg, cfg.paths.corpus));

  const auto t = json::parse(read_file(dir / "state.json")).at("t").get<std::int64_t>();
  std::set<std::string> keep;
  if (sources_only && fs::exists(dir / "dag.json")) {
    for (const auto& n : json::parse(read_file(dir / "dag.json")).at("nodes")) {
      keep.insert(n.at("id").get<std::string>());
    }
  }
  std::unordered_map<std::string, AnswerRecord> by_id;
  for (const auto& j : read_jsonl(dir / "answers.jsonl")) {
    if (j.at("step").get<std::int64_t>() > t) continue;
    AnswerRecord a = answer_from_json(j);
    by_id.insert_or_assign(a.qa_id, std::move(a));
  }
  for (const auto& j : read_jsonl(dir / "qa.jsonl")) {
    if (j.at("step").get<std::int64_t>() > t) continue;
    QaItem q = qa_from_json(j);
    if (sources_only && !keep.contains(q.para_id)) continue;
    auto it = by_id.find(q.qa_id);
    if (it == by_id.end()) {
      throw RuntimeFailure("crossval: provider run " + dir.string() + " has no answer for " + q.qa_id);
    }
    ps.answers.push_back(it->second);
    ps.items.push_back(std::move(q));
  }
  return ps;
}

}  // namespace

json crossval(const CrossvalOptions& opts) {
  if (opts.provider_runs.empty() || opts.testee_configs.empty()) {
    throw ConfigError("crossval needs at least one provider run and one testee config");
  }
  std::vector<ProviderSubset> providers;
  for (const auto& p : opts.provider_runs) providers.push_back(load_provider(p, opts.sources_only));
  std::map<std::string, int> seen;
  for (const auto& p : providers) ++seen[p.label];
  for (auto& p : providers) {
    if (seen[p.label] > 1) p.label = p.run_id;
  }

  json testees = json::array(), prov = json::array(), cells = json::array();
  json corr = json::array(), acc = json::array();
  for (const auto& p : providers) prov.push_back(p.label);
  for (const auto& tc : opts.testee_configs) {
    const RunConfig cfg = load_config(tc);
    auto embedder = make_embedding_provider(cfg.embedding);
    std::optional<std::string> label;
    json crow = json::array(), arow = json::array();
    for (const auto& p : providers) {
      auto parts = make_testee(cfg, {}, *embedder, &p.corpus);
      if (!label) label = parts.testee->model_tag();
      PriceTable prices;
      if (!cfg.budget.prices.empty()) prices = PriceTable::load(cfg.resolve(cfg.budget.prices));
      BudgetLedger ledger(cfg.budget.mode, cfg.budget.limit, std::move(prices), cfg.budget.scope);
      ParagraphEmbeddingCache cache(*embedder, cfg.embedding);
      std::vector<ParaIndex> paras;
      for (const auto& q : p.items) {
        auto pi = p.corpus.find_paragraph(q.para_id);
        if (!pi) throw RuntimeFailure("crossval: " + q.para_id + " is not in the provider corpus");
        paras.push_back(*pi);
      }
      if (parts.landscape) {
        cache.ensure(paras, [&](ParaIndex pi) { return p.corpus.paragraph(pi).text; });
      }
      std::vector<AnswerRecord> answers(p.items.size());
      parallel_for(p.items.size(), cfg.engine.max_in_flight, [&](std::size_t i) {
        TesteeContext ctx{p.corpus.paragraph(paras[i]).category,
                          parts.landscape ? &cache.get(paras[i]) : nullptr};
        answers[i] = parts.testee->ask(p.items[i], ctx);
      });
      for (const auto& a : answers) {
        for (const auto& u : a.attempts) ledger.charge(CostCategory::testee, parts.testee->model_tag(), u);
      }
      CrossValCell cell = crossval_cell(p.answers, answers, opts.mode);
      cell.provider = p.label;
      cell.testee = *label;
      crow.push_back(opt_json(cell.correlation));
      arow.push_back(cell.accuracy);
      cells.push_back(json{{"provider", cell.provider},
                           {"provider_run", p.run_id},
                           {"testee", cell.testee},
                           {"testee_config", fs::absolute(tc).string()},
                           {"correlation", opt_json(cell.correlation)},
                           {"null_reason", cell.correlation ? json(nullptr) : json(cell.null_reason)},
                           {"accuracy", cell.accuracy},
                           {"n_questions", cell.n_questions},
                           {"n_paragraphs", cell.n_paragraphs},
                           {"consumed", ledger.consumed()}});
    }
    testees.push_back(*label);
    corr.push_back(crow);
    acc.push_back(arow);
  }
  json out{{"mode", opts.mode == CorrelationMode::per_question ? "per_question" : "per_paragraph"},
           {"subset", opts.sources_only ? "sources" : "evaluated"},
           {"testees", testees},
           {"providers", prov},
           {"correlation", corr},
           {"accuracy", acc},
           {"cells", cells}};
  if (!opts.out.empty()) {
    if (opts.out.has_parent_path()) fs::create_directories(opts.out.parent_path());
    write_file_atomic(opts.out, out.dump(2));
  }
  return out;
}

// ---------------------------------------------------------------------------

IngestResult ingest(const fs::path& input, std::size_t min_para_len, const fs::path& out_dir) {
  if (!fs::exists(input)) throw ConfigError("ingest: " + input.string() + " does not exist");
  auto ing = Corpus::ingest_file(input, IngestOptions{min_para_len});
  fs::create_directories(out_dir);
  IngestResult r;
  r.stats = ing.stats;
  r.corpus = out_dir / "corpus.jsonl";
  ing.corpus.save(r.corpus);
  json stats{{"input", fs::absolute(input).string()},
             {"min_para_len", min_para_len},
             {"docs", r.stats.docs},
             {"paragraphs", r.stats.paragraphs},
             {"rejected_docs", r.stats.rejected_docs},
             {"rejected_paragraphs", r.stats.rejected_paragraphs},
             {"malformed_records", r.stats.malformed_records},
             {"warnings", r.stats.warnings},
             {"fingerprint", ing.corpus.fingerprint()}};
  write_file_atomic(out_dir / "ingest_stats.json", stats.dump(2));
  return r;
}

json build_index(const fs::path& config_path, const fs::path& corpus_override, const fs::path& out_dir) {
  const RunConfig cfg = load_config(config_path);
  const fs::path corpus_path = pick(corpus_override, cfg, cfg.paths.corpus);
  if (corpus_path.empty()) throw ConfigError("paths.corpus: required (or pass --corpus)");
  const Corpus corpus = Corpus::load(corpus_path);
  auto embedder = make_embedding_provider(cfg.embedding);
  fs::create_directories(out_dir);
  auto ix = AbstractIndex::build(corpus, *embedder, cfg.embedding, cfg.index, out_dir / "abstracts.ckpt");
  ix.save(out_dir / "index.bin", out_dir / "index_manifest.txt", corpus.fingerprint());
  return json{{"index", (out_dir / "index.bin").string()},
              {"docs", ix.num_docs()},
              {"centroids", ix.num_centroids()},
              {"dim", ix.dim()},
              {"provider", ix.provider_fingerprint()},
              {"corpus", corpus.fingerprint()}};
}

std::vector<std::string> canonical_steps(const fs::path& steps_jsonl) {
  std::vector<std::string> out;
  for (auto j : read_jsonl(steps_jsonl)) {
    j.erase("wall_time_s");
    out.push_back(j.dump());
  }
  return out;
}

}  // namespace sea::app
