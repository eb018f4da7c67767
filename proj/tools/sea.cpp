// sea: command-line front end for the search engine.

#include <atomic>
#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sea/app.hpp"
#include "sea/common.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(const sea::RunSummary& s) { return s.status == sea::RunStatus::failed ? 1 : 0; }

void print_run(const sea::app::RunResult& r) {
  json out{{"run_id", r.run_id},
           {"dir", r.dir.string()},
           {"status", sea::status_name(r.summary.status)},
           {"termination", sea::termination_name(r.summary.termination)},
           {"steps", r.summary.steps}};
  std::cout << out.dump() << '\n';
}

std::vector<sea::Variant> parse_variants(const std::string& list) {
  std::vector<sea::Variant> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = list.find(',', pos);
    const std::string name = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    auto v = sea::parse_variant(name);
    if (!v) throw sea::ConfigError("--variants: unknown variant '" + name + "'");
    out.push_back(*v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained search for knowledge deficiencies of a language model"};
  app.require_subcommand(1);

  std::string runs_dir = "runs";
  std::optional<std::int64_t> max_steps;
  std::optional<std::string> run_id;

  auto* ingest = app.add_subcommand("ingest", "Normalize a corpus file");
  std::string ingest_input, ingest_out;
  std::size_t min_len = 200;
  ingest->add_option("--input", ingest_input, "Line-delimited corpus records")->required();
  ingest->add_option("--min-para-len", min_len, "Minimum paragraph length in code points");
  ingest->add_option("--out", ingest_out, "Output directory")->required();

  auto* index = app.add_subcommand("index", "Build the abstract index");
  std::string index_config, index_corpus, index_out;
  index->add_option("--config", index_config, "Config file")->required();
  index->add_option("--corpus", index_corpus, "Corpus file (overrides paths.corpus)");
  index->add_option("--out", index_out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Start a search run");
  std::string run_config;
  std::optional<std::string> run_variant;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config", run_config, "Config file")->required();
  run->add_option("--run-id", run_id, "Run directory name");
  run->add_option("--runs-dir", runs_dir, "Parent directory of runs (overrides paths.runs)");
  run->add_option("--variant", run_variant, "full | no_prune | random_select");
  run->add_option("--seed", run_seed, "Master seed");
  run->add_option("--max-steps", max_steps, "Stop after this many steps (resumable)");

  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  std::string resume_run;
  resume->add_option("--run", resume_run, "Run id or directory")->required();
  resume->add_option("--runs-dir", runs_dir, "Parent directory of runs");
  resume->add_option("--max-steps", max_steps, "Stop after this many more steps");

  auto* ablate = app.add_subcommand("ablate", "Run every variant over several seeds");
  std::string ablate_config, variants = "full,no_prune,random_select";
  std::size_t seeds = 10;
  std::optional<std::uint64_t> seed_base;
  std::optional<std::string> ablation_id;
  ablate->add_option("--config", ablate_config, "Config file")->required();
  ablate->add_option("--variants", variants, "Comma-separated variants");
  ablate->add_option("--seeds", seeds, "Number of seeds");
  ablate->add_option("--seed-base", seed_base, "First seed (default: engine.seed)");
  ablate->add_option("--id", ablation_id, "Ablation directory name");
  ablate->add_option("--runs-dir", runs_dir, "Parent directory of runs");
  ablate->add_option("--max-steps", max_steps, "Step cap per run");

  auto* crossval = app.add_subcommand("crossval", "Cross-validate testees on provider subsets");
  std::vector<std::string> provider_runs, testee_configs;
  std::string cv_mode = "per_question", cv_out = "crossval.json";
  bool sources_only = false;
  crossval->add_option("--provider-run", provider_runs, "Provider run id or directory")->required();
  crossval->add_option("--testee-config", testee_configs, "Testee config file")->required();
  crossval->add_option("--runs-dir", runs_dir, "Parent directory of runs");
  crossval->add_option("--mode", cv_mode, "per_question | per_paragraph")
      ->check(CLI::IsMember({"per_question", "per_paragraph"}));
  crossval->add_flag("--sources-only", sources_only, "Use only admitted source paragraphs");
  crossval->add_option("--out", cv_out, "Output file");

  auto* report = app.add_subcommand("report", "Write report.json for a run");
  std::string report_run;
  report->add_option("--run", report_run, "Run id or directory")->required();
  report->add_option("--runs-dir", runs_dir, "Parent directory of runs");

  auto* exp = app.add_subcommand("export", "Export an analysis bundle");
  std::string export_run, export_out, export_tag;
  bool for_analysis = false;
  exp->add_option("--run", export_run, "Run id or directory")->required();
  exp->add_option("--runs-dir", runs_dir, "Parent directory of runs");
  exp->add_flag("--for-analysis", for_analysis, "Bundle source embeddings and metadata");
  exp->add_option("--out", export_out, "Bundle directory (default: <run>/analysis)");
  exp->add_option("--model-tag", export_tag, "Override the model tag in sources.jsonl");

  auto* sim = app.add_subcommand("simulate", "Synthetic corpus and simulated testee end to end");
  std::string sim_landscape, sim_config;
  std::optional<std::string> sim_variant;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--landscape", sim_landscape, "Landscape file with a synthetic block")->required();
  sim->add_option("--config", sim_config, "Base config");
  sim->add_option("--run-id", run_id, "Run directory name");
  sim->add_option("--runs-dir", runs_dir, "Parent directory of runs");
  sim->add_option("--variant", sim_variant, "full | no_prune | random_select");
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--max-steps", max_steps, "Step cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  auto runs_explicit = [&](const CLI::App* sub) { return sub->count("--runs-dir") > 0; };
  auto variant_of = [](const std::optional<std::string>& s) -> std::optional<sea::Variant> {
    if (!s) return std::nullopt;
    auto v = sea::parse_variant(*s);
    if (!v) throw sea::ConfigError("--variant: unknown variant '" + *s + "'");
    return v;
  };

  try {
    if (*ingest) {
      auto r = sea::app::ingest(ingest_input, min_len, ingest_out);
      json out{{"corpus", r.corpus.string()},
               {"docs", r.stats.docs},
               {"paragraphs", r.stats.paragraphs},
               {"rejected_docs", r.stats.rejected_docs},
               {"rejected_paragraphs", r.stats.rejected_paragraphs},
               {"malformed_records", r.stats.malformed_records}};
      for (const auto& w : r.stats.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << out.dump() << '\n';
      return 0;
    }
    if (*index) {
      std::cout << sea::app::build_index(index_config, index_corpus, index_out).dump() << '\n';
      return 0;
    }
    if (*run) {
      sea::app::RunOptions o;
      o.run_id = run_id;
      o.max_steps = max_steps;
      o.stop = &g_stop;
      if (runs_explicit(run)) o.runs_dir = runs_dir;
      o.variant = variant_of(run_variant);
      o.seed = run_seed;
      auto r = sea::app::start_run(run_config, o);
      print_run(r);
      return exit_code(r.summary);
    }
    if (*resume) {
      sea::app::RunOptions o;
      o.max_steps = max_steps;
      o.stop = &g_stop;
      auto r = sea::app::resume_run(sea::app::resolve_run(resume_run, runs_dir), o);
      print_run(r);
      return exit_code(r.summary);
    }
    if (*ablate) {
      sea::app::AblateOptions o;
      o.config = ablate_config;
      o.variants = parse_variants(variants);
      o.seeds = seeds;
      o.seed_base = seed_base;
      o.ablation_id = ablation_id;
      if (runs_explicit(ablate)) o.runs_dir = runs_dir;
      o.max_steps = max_steps;
      o.stop = &g_stop;
      std::cout << sea::app::ablate(o).dump(2) << '\n';
      return 0;
    }
    if (*crossval) {
      sea::app::CrossvalOptions o;
      for (const auto& p : provider_runs) o.provider_runs.push_back(sea::app::resolve_run(p, runs_dir));
      for (const auto& t : testee_configs) o.testee_configs.emplace_back(t);
      o.mode = cv_mode == "per_paragraph" ? sea::CorrelationMode::per_paragraph
                                          : sea::CorrelationMode::per_question;
      o.sources_only = sources_only;
      o.out = cv_out;
      const json out = sea::app::crossval(o);
      std::cout << json{{"out", cv_out}, {"testees", out.at("testees")}, {"providers", out.at("providers")}}.dump()
                << '\n';
      return 0;
    }
    if (*report) {
      const auto dir = sea::app::resolve_run(report_run, runs_dir);
      const json r = sea::app::write_report(dir);
      std::cout << json{{"report", (dir / "report.json").string()}, {"totals", r.at("totals")},
                        {"errors_per_cost", r.at("errors_per_cost")}}
                       .dump()
                << '\n';
      return 0;
    }
    if (*exp) {
      if (!for_analysis) throw sea::ConfigError("export: only --for-analysis bundles are supported");
      auto r = sea::app::export_bundle(sea::app::resolve_run(export_run, runs_dir), export_out, export_tag);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << json{{"bundle", r.dir.string()}, {"rows", r.rows}, {"partial", r.partial}}.dump() << '\n';
      return 0;
    }
    if (*sim) {
      sea::app::SimulateOptions o;
      o.landscape = sim_landscape;
      o.config = sim_config;
      o.run.run_id = run_id;
      o.run.max_steps = max_steps;
      o.run.stop = &g_stop;
      if (runs_explicit(sim)) o.run.runs_dir = runs_dir;
      o.run.variant = variant_of(sim_variant);
      o.run.seed = sim_seed;
      auto r = sea::app::simulate(o);
      print_run(r);
      return exit_code(r.summary);
    }
  } catch (const sea::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
