#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sea/abstract_index.hpp"
#include "sea/budget.hpp"
#include "sea/config.hpp"
#include "sea/corpus.hpp"
#include "sea/embedding.hpp"
#include "sea/engine.hpp"
#include "sea/metrics.hpp"
#include "sea/qa.hpp"
#include "sea/synthetic.hpp"
#include "sea/testee.hpp"

namespace sea::app {

/// Files that take precedence over the paths named in the config. Used for
/// the copies kept inside a run directory.
struct RuntimeFiles {
  std::filesystem::path corpus;
  std::filesystem::path landscape;
  std::filesystem::path prices;
};

/// Adapters built from a RunConfig.
class Runtime {
 public:
  static std::unique_ptr<Runtime> create(const RunConfig& cfg, const RuntimeFiles& files = {});

  /// Swap in the landscape stored at `path` (simulated testee only).
  void load_landscape(const std::filesystem::path& path);

  EngineAdapters adapters();
  nlohmann::json fingerprints() const;
  std::string model_tag() const { return testee->model_tag(); }

  RunConfig cfg;
  Corpus corpus;
  std::unique_ptr<EmbeddingProvider> embedder;
  std::optional<AbstractIndex> index;
  std::unique_ptr<ParagraphEmbeddingCache> cache;
  std::unique_ptr<ChatModel> generator;
  std::unique_ptr<ChatModel> testee_chat;
  std::unique_ptr<Testee> testee;
  std::optional<ErrorLandscape> landscape;
  std::unique_ptr<BudgetLedger> ledger;
};

struct RunOptions {
  std::optional<std::string> run_id;
  std::optional<std::int64_t> max_steps;
  const std::atomic<bool>* stop = nullptr;
  /// Replaces paths.runs from the config.
  std::filesystem::path runs_dir;
  std::optional<Variant> variant;
  std::optional<std::uint64_t> seed;
  PhaseHook hook;
};

struct RunResult {
  std::filesystem::path dir;
  std::string run_id;
  RunSummary summary;
};

RunResult start_run(const std::filesystem::path& config_path, const RunOptions& opts = {});
RunResult resume_run(const std::filesystem::path& run_dir, const RunOptions& opts = {});

/// `id_or_path` if it names a directory, else runs_dir/id_or_path.
std::filesystem::path resolve_run(const std::string& id_or_path,
                                  const std::filesystem::path& runs_dir);

/// Builds the synthetic corpus and landscape described by the "synthetic"
/// block of a landscape file, then runs the engine on them.
struct SimulateOptions {
  std::filesystem::path landscape;
  std::filesystem::path config;  // optional base config
  RunOptions run;
};
RunResult simulate(const SimulateOptions& opts);

SimulationSetup simulation_setup_from_json(const nlohmann::json& j);

struct AblateOptions {
  std::filesystem::path config;
  std::vector<Variant> variants{Variant::full, Variant::no_prune, Variant::random_select};
  std::size_t seeds = 10;
  std::optional<std::uint64_t> seed_base;
  std::optional<std::string> ablation_id;
  std::filesystem::path runs_dir;
  std::optional<std::int64_t> max_steps;
  const std::atomic<bool>* stop = nullptr;
};

/// One run per (variant, seed) under <runs>/<ablation_id>/. Returns the
/// ablation summary that is also written to ablation.json.
nlohmann::json ablate(const AblateOptions& opts);

/// report.json content: per-step series, totals, errors per cost and the
/// ledger reconciliation.
nlohmann::json build_report(const std::filesystem::path& run_dir);
nlohmann::json write_report(const std::filesystem::path& run_dir);

struct ExportResult {
  std::filesystem::path dir;
  std::size_t rows = 0;
  bool partial = false;
  std::vector<std::string> warnings;
};

/// Writes sources.jsonl plus copies of steps.jsonl, dag.json and report.json.
/// Throws RuntimeFailure on an embedding dimension mismatch.
ExportResult export_bundle(const std::filesystem::path& run_dir,
                           const std::filesystem::path& out_dir = {},
                           const std::string& model_tag = {});

struct CrossvalOptions {
  std::vector<std::filesystem::path> provider_runs;
  std::vector<std::filesystem::path> testee_configs;
  CorrelationMode mode = CorrelationMode::per_question;
  /// Restrict each provider subset to its admitted source paragraphs.
  bool sources_only = false;
  std::filesystem::path out;
};

/// Rows are testees, columns are providers.
nlohmann::json crossval(const CrossvalOptions& opts);

struct IngestResult {
  IngestStats stats;
  std::filesystem::path corpus;
};
IngestResult ingest(const std::filesystem::path& input, std::size_t min_para_len,
                    const std::filesystem::path& out_dir);

/// Builds the abstract index named by the config's [embedding]/[index]
/// sections into out_dir (index.bin, index_manifest.txt).
nlohmann::json build_index(const std::filesystem::path& config_path,
                           const std::filesystem::path& corpus_override,
                           const std::filesystem::path& out_dir);

/// steps.jsonl lines with wall_time_s removed.
std::vector<std::string> canonical_steps(const std::filesystem::path& steps_jsonl);

}  // namespace sea::app
