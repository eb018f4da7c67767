#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "sea/app.hpp"
#include "sea/common.hpp"
#include "sea/run_store.hpp"

using namespace sea;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Small synthetic corpus, landscape and config in a scratch directory.
struct Scratch {
  fs::path dir;
  fs::path config;

  explicit Scratch(const std::string& tag, const std::string& extra = {}) {
    dir = fs::temp_directory_path() / ("sea-app-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    SimulationSetup s;
    s.spec.clusters = 4;
    s.spec.docs_per_cluster = 3;
    s.spec.paras_per_doc = 8;
    s.spec.seed = 17;
    s.dimension = 16;
    s.index.n_centroids = 3;
    s.region_fraction = 0.2;
    auto w = build_world(s);
    w->synth.corpus.save(dir / "corpus.jsonl");
    write_file_atomic(dir / "landscape.json", w->landscape.to_json().dump());
    config = dir / "sim.toml";
    std::ofstream(config) << "[engine]\nseed = 3\n"
                             "[retrieval]\nbatch_size = 6\nk = 10\n"
                             "[qa]\nn_base = 2\nn_variants = 1\n"
                             "[testee]\nkind = \"simulated\"\nlandscape = \"landscape.json\"\n"
                             "[embedding]\ndimension = 16\n"
                             "[index]\nn_centroids = 3\n"
                             "[budget]\nlimit = 1e9\n"
                             "[paths]\ncorpus = \"corpus.jsonl\"\nruns = \"runs\"\n"
                          << extra;
  }
  ~Scratch() { fs::remove_all(dir); }
};

}  // namespace

TEST_SUITE("app") {
  TEST_CASE("run writes a complete run directory and a reconciled report") {
    Scratch s("run");
    app::RunOptions o;
    o.run_id = "r1";
    o.max_steps = 3;
    const auto r = app::start_run(s.config, o);
    CHECK(r.summary.steps == 3);
    for (const char* f : {"manifest.json", "config.toml", "landscape.json", "state.json", "steps.jsonl",
                          "qa.jsonl", "answers.jsonl", "calls.jsonl", "dag.json", "report.json"}) {
      CAPTURE(f);
      CHECK(fs::exists(r.dir / f));
    }
    const json rep = json::parse(read_file(r.dir / "report.json"));
    CHECK(rep.at("reconciliation").at("exact").get<bool>());
    CHECK(rep.at("series").at("t").size() == 3);
    CHECK(app::canonical_steps(r.dir / "steps.jsonl").size() == 3);
    CHECK_THROWS(app::start_run(s.config, o));  // run id taken
  }

  TEST_CASE("ablate creates one run per variant and seed") {
    Scratch s("ablate");
    app::AblateOptions o;
    o.config = s.config;
    o.seeds = 2;
    o.ablation_id = "ab";
    o.max_steps = 2;
    const json a = app::ablate(o);
    std::size_t dirs = 0;
    for (const auto& e : fs::directory_iterator(s.dir / "runs" / "ab")) dirs += e.is_directory() ? 1 : 0;
    CHECK(dirs == 6);
    CHECK(fs::exists(s.dir / "runs" / "ab" / "ablation.json"));
    CHECK(a.dump().find("random_select") != std::string::npos);
  }

  TEST_CASE("export has one row per relation-graph node") {
    Scratch s("export");
    app::RunOptions o;
    o.run_id = "r";
    o.max_steps = 4;
    const auto r = app::start_run(s.config, o);
    const auto ex = app::export_bundle(r.dir);
    const json dag = json::parse(read_file(r.dir / "dag.json"));
    CHECK(ex.rows == dag.at("nodes").size());
    CHECK_FALSE(ex.partial);
    const auto rows = read_jsonl(ex.dir / "sources.jsonl");
    CHECK(rows.size() == ex.rows);
    for (const auto& row : rows) {
      CHECK(row.at("embedding").size() == 16);
      CHECK(row.contains("para_error"));
      CHECK(row.contains("category"));
    }
    CHECK(fs::exists(ex.dir / "report.json"));
    CHECK(fs::exists(ex.dir / "bundle.json"));
  }

  TEST_CASE("export aborts on an embedding dimension mismatch") {
    Scratch s("dim");
    app::RunOptions o;
    o.run_id = "r";
    o.max_steps = 2;
    const auto r = app::start_run(s.config, o);
    json m = json::parse(read_file(r.dir / "manifest.json"));
    m["embedding_dim"] = 8;
    write_file_atomic(r.dir / "manifest.json", m.dump());
    CHECK_THROWS_AS(app::export_bundle(r.dir), RuntimeFailure);
  }

  TEST_CASE("resume refuses a changed corpus") {
    Scratch s("fp");
    app::RunOptions o;
    o.run_id = "r";
    o.max_steps = 1;
    const auto r = app::start_run(s.config, o);
    {
      std::ofstream(s.dir / "corpus.jsonl", std::ios::app)
          << R"({"doc_id":"extra","title":"t","abstract":"a","categories":["Arts"],"paragraphs":[{"text":")"
          << std::string(300, 'x') << "\"}]}\n";
    }
    CHECK_THROWS_AS(app::resume_run(r.dir), RuntimeFailure);
  }

  TEST_CASE("cross-validation of a run against its own testee is perfect") {
    Scratch s("cv");
    app::RunOptions o;
    o.run_id = "p";
    o.max_steps = 2;
    const auto r = app::start_run(s.config, o);
    app::CrossvalOptions c;
    c.provider_runs = {r.dir};
    c.testee_configs = {s.config};
    c.out = s.dir / "crossval.json";
    const json out = app::crossval(c);
    CHECK(fs::exists(c.out));
    const auto& cell = out.at("cells").at(0);
    if (!cell.at("correlation").is_null()) CHECK(cell.at("correlation").get<double>() == doctest::Approx(1.0));
  }
}
