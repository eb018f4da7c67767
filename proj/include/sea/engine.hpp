#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sea/abstract_index.hpp"
#include "sea/budget.hpp"
#include "sea/config.hpp"
#include "sea/corpus.hpp"
#include "sea/embedding.hpp"
#include "sea/metrics.hpp"
#include "sea/qa.hpp"
#include "sea/relation_dag.hpp"
#include "sea/retrieval.hpp"
#include "sea/run_store.hpp"
#include "sea/testee.hpp"

namespace sea {

struct EngineAdapters {
  const Corpus* corpus = nullptr;
  const AbstractIndex* index = nullptr;
  ParagraphEmbeddingCache* cache = nullptr;
  ChatModel* generator = nullptr;
  Testee* testee = nullptr;
  BudgetLedger* ledger = nullptr;
  /// True when embedding requests hit a paid endpoint and should be charged.
  bool charge_embeddings = false;
  std::string embedding_model;
};

struct ParagraphOutcome {
  ParaIndex para = 0;
  std::string para_id;
  BatchOrigin origin = BatchOrigin::retrieved;
  std::vector<std::string> provenance;
  ErrorTally tally;
  /// Per-paragraph error; nullopt when no question was produced.
  std::optional<double> error;
  bool generation_failed = false;
  bool admitted = false;
};

struct StepRecord {
  std::int64_t t = 0;
  std::vector<ParagraphOutcome> batch;
  ErrorTally step_tally;
  ErrorTally cumulative;
  std::optional<double> step_mean_of_means;
  std::optional<double> cumulative_mean_of_means;
  std::vector<std::string> admitted;
  std::vector<std::string> pruned;
  std::size_t active_sources = 0;
  std::size_t dag_nodes = 0;
  std::size_t fallback_count = 0;
  /// Why the batch was not (fully) retrieved, if it was not.
  std::string note;
  double cost_delta = 0.0;
  double consumed = 0.0;
  double wall_time_s = 0.0;

  std::optional<double> step_error() const { return step_tally.error(); }
  std::optional<double> cumulative_error() const { return cumulative.error(); }
};

nlohmann::json to_json(const StepRecord& r, bool with_time = true);

enum class RunStatus { running, done, exhausted, failed };
enum class Termination { none, budget, corpus, operator_stop, max_steps, failure };

std::string_view status_name(RunStatus s);
std::string_view termination_name(Termination t);
std::optional<RunStatus> parse_status(std::string_view s);

struct RunSummary {
  RunStatus status = RunStatus::running;
  Termination termination = Termination::none;
  std::int64_t steps = 0;
  std::string error;
};

/// Points inside a step where tests can inject a crash.
enum class Phase { batch_selected, evaluated, charged, artifacts_appended, committed };
using PhaseHook = std::function<void(std::int64_t t, Phase)>;

/// The search loop. Owns the search state; adapters are borrowed.
class Engine {
 public:
  Engine(EngineConfig cfg, EngineAdapters adapters, RunStore* store = nullptr);

  /// Restores state from the store's checkpoint and cuts partial-step tails
  /// off the append-only files.
  void resume();

  /// One iteration. Returns nullopt when no eligible paragraph is left.
  std::optional<StepRecord> step();

  /// Steps while consumed < limit; also stops on corpus exhaustion, after
  /// `max_steps` steps of this call, or when `stop` becomes true.
  RunSummary run(std::optional<std::int64_t> max_steps = std::nullopt,
                 const std::atomic<bool>* stop = nullptr);

  void set_phase_hook(PhaseHook hook) { hook_ = std::move(hook); }
  /// Keep every AnswerRecord in memory (tests).
  void set_keep_answers(bool on) { keep_answers_ = on; }

  std::int64_t t() const { return t_; }
  const ParagraphSet& evaluated() const { return evaluated_; }
  const KnowledgeBaseView& view() const { return view_; }
  const RelationDag& dag() const { return dag_; }
  const ErrorTally& cumulative() const { return cumulative_; }
  const std::vector<StepRecord>& records() const { return records_; }
  const std::vector<AnswerRecord>& answers() const { return answers_; }
  const EngineConfig& config() const { return cfg_; }
  RunStatus status() const { return status_; }
  Termination termination() const { return termination_; }

  nlohmann::json dag_json() const;

 private:
  Batch select_batch(std::string& note);
  void commit(const StepRecord& rec, const std::vector<QaSet>& sets,
              const std::vector<AnswerRecord>& answers, std::size_t ledger_from);
  nlohmann::json state_json() const;
  void write_status();
  void phase(Phase p);

  EngineConfig cfg_;
  EngineAdapters ad_;
  RunStore* store_;
  KnowledgeBaseView view_;
  ParagraphSet evaluated_;
  RelationDag dag_;
  ErrorTally cumulative_;
  double mom_sum_ = 0.0;
  std::uint64_t mom_count_ = 0;
  std::int64_t t_ = 0;
  RunStatus status_ = RunStatus::running;
  Termination termination_ = Termination::none;
  std::vector<StepRecord> records_;
  std::vector<AnswerRecord> answers_;
  bool keep_answers_ = false;
  PhaseHook hook_;
};

}  // namespace sea
