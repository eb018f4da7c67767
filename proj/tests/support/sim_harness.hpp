#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sea/engine.hpp"
#include "sea/synthetic.hpp"

namespace sea::testing {

struct SimRun {
  std::vector<StepRecord> steps;
  std::vector<AnswerRecord> answers;
  std::vector<ChargeRecord> charges;
  double consumed = 0.0;
  std::size_t dag_nodes = 0;
  RunSummary summary;
};

struct SimRunOptions {
  Variant variant = Variant::full;
  std::uint64_t seed = 1;
  std::int64_t steps = 20;
  double budget = 1e12;
  bool keep_answers = false;
  bool verify_dag = false;
  std::size_t max_in_flight = 8;
  double malformed_rate = 0.0;
  EngineConfig base;  // xi, gamma, retrieval and qa settings
};

/// Runs the engine on a prepared world with the simulated testee and the
/// template generator, in memory.
inline SimRun run_simulated(const SimulationWorld& world, const SimRunOptions& o) {
  EngineConfig cfg = o.base;
  cfg.variant = o.variant;
  cfg.seed = o.seed;
  cfg.verify_dag = o.verify_dag;
  cfg.max_in_flight = o.max_in_flight;
  HashingEmbedder embedder(world.embed_cfg.dimension);
  ParagraphEmbeddingCache cache(embedder, world.embed_cfg);
  TemplateGenerator gen(o.seed);
  gen.set_malformed_rate(o.malformed_rate);
  SimulatedTestee testee(world.landscape);
  BudgetLedger ledger(BudgetMode::api_calls, o.budget);
  EngineAdapters ad;
  ad.corpus = &world.synth.corpus;
  ad.index = &world.index;
  ad.cache = &cache;
  ad.generator = &gen;
  ad.testee = &testee;
  ad.ledger = &ledger;
  Engine engine(cfg, ad);
  engine.set_keep_answers(o.keep_answers);
  SimRun out;
  out.summary = engine.run(o.steps);
  out.steps = engine.records();
  out.answers = engine.answers();
  out.charges = ledger.records();
  out.consumed = ledger.consumed();
  out.dag_nodes = engine.dag().size();
  return out;
}

}  // namespace sea::testing
