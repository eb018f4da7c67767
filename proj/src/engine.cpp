#include "sea/engine.hpp"

#include <chrono>
#include <map>
#include <stdexcept>

#include "sea/common.hpp"

namespace sea {

using nlohmann::json;

namespace {

constexpr const char* kAppendOnly[] = {"steps.jsonl", "answers.jsonl", "qa.jsonl", "calls.jsonl"};

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json tally_json(const ErrorTally& t) {
  return json{{"wrong", t.wrong}, {"total", t.total}, {"unparsable", t.unparsable}};
}

ErrorTally tally_from(const json& j) {
  return ErrorTally{j.at("wrong").get<std::uint64_t>(), j.at("total").get<std::uint64_t>(),
                    j.at("unparsable").get<std::uint64_t>()};
}

json charge_json(const ChargeRecord& r, std::int64_t step) {
  return json{{"seq", r.seq},
              {"step", step},
              {"category", category_name(r.category)},
              {"model", r.model},
              {"prompt_tokens", r.usage.prompt_tokens},
              {"completion_tokens", r.usage.completion_tokens},
              {"calls", r.usage.calls},
              {"estimated", r.usage.estimated},
              {"amount", r.amount},
              {"in_scope", r.in_scope}};
}

ChargeRecord charge_from(const json& j) {
  ChargeRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  auto cat = parse_category(j.at("category").get<std::string>());
  if (!cat) throw RuntimeFailure("calls.jsonl: unknown category");
  r.category = *cat;
  r.model = j.at("model").get<std::string>();
  r.usage = Usage{j.at("prompt_tokens").get<std::int64_t>(),
                  j.at("completion_tokens").get<std::int64_t>(), j.at("calls").get<std::int64_t>(),
                  j.at("estimated").get<bool>()};
  r.amount = j.at("amount").get<double>();
  r.in_scope = j.at("in_scope").get<bool>();
  return r;
}

}  // namespace

json to_json(const StepRecord& r, bool with_time) {
  json batch = json::array();
  for (const auto& p : r.batch) {
    batch.push_back(json{{"para_id", p.para_id},
                         {"origin", origin_name(p.origin)},
                         {"fallback", p.origin == BatchOrigin::fallback},
                         {"provenance", p.provenance},
                         {"n_questions", p.tally.total},
                         {"wrong", p.tally.wrong},
                         {"unparsable", p.tally.unparsable},
                         {"error", opt(p.error)},
                         {"generation_failed", p.generation_failed},
                         {"admitted", p.admitted}});
  }
  json j{{"t", r.t},
         {"batch", batch},
         {"T_E", opt(r.step_error())},
         {"T_S", opt(r.cumulative_error())},
         {"T_E_mean_of_means", opt(r.step_mean_of_means)},
         {"T_S_mean_of_means", opt(r.cumulative_mean_of_means)},
         {"step_tally", tally_json(r.step_tally)},
         {"cumulative_tally", tally_json(r.cumulative)},
         {"admitted", r.admitted},
         {"pruned", r.pruned},
         {"active_sources", r.active_sources},
         {"dag_nodes", r.dag_nodes},
         {"fallback_count", r.fallback_count},
         {"note", r.note},
         {"cost_delta", r.cost_delta},
         {"consumed", r.consumed}};
  if (with_time) j["wall_time_s"] = r.wall_time_s;
  return j;
}

std::string_view status_name(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::exhausted: return "exhausted";
    case RunStatus::failed: return "failed";
  }
  return "?";
}

std::optional<RunStatus> parse_status(std::string_view s) {
  for (auto st : {RunStatus::running, RunStatus::done, RunStatus::exhausted, RunStatus::failed}) {
    if (status_name(st) == s) return st;
  }
  return std::nullopt;
}

std::string_view termination_name(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::budget: return "budget";
    case Termination::corpus: return "corpus";
    case Termination::operator_stop: return "operator";
    case Termination::max_steps: return "max_steps";
    case Termination::failure: return "failure";
  }
  return "?";
}

Engine::Engine(EngineConfig cfg, EngineAdapters adapters, RunStore* store)
    : cfg_(std::move(cfg)),
      ad_(adapters),
      store_(store),
      view_(*adapters.corpus),
      evaluated_(adapters.corpus->num_paragraphs()) {
  cfg_.validate();
  if (!ad_.corpus || !ad_.cache || !ad_.generator || !ad_.testee || !ad_.ledger) {
    throw std::invalid_argument("engine adapters incomplete");
  }
  if (cfg_.variant != Variant::random_select && !ad_.index) {
    throw std::invalid_argument("retrieval needs an abstract index");
  }
  dag_.set_verify(cfg_.verify_dag);
}

void Engine::phase(Phase p) {
  if (hook_) hook_(t_, p);
}

Batch Engine::select_batch(std::string& note) {
  const std::size_t bs = cfg_.retrieval.batch_size;
  const auto t = static_cast<std::uint64_t>(t_);
  Batch batch;
  auto uniform = [&](BatchOrigin origin, std::string_view purpose) {
    for (ParaIndex p : sample_eligible(view_, evaluated_, bs, child_seed(cfg_.seed, t, purpose))) {
      batch.entries.push_back({p, origin, {}});
    }
  };
  if (t_ == 1) {
    if (cfg_.initial_mode == InitialMode::category_uniform) {
      const auto cats = cfg_.categories.empty() ? ad_.corpus->categories() : cfg_.categories;
      auto s = sample_uniform_by_category(view_, bs, cats, child_seed(cfg_.seed, t, "initial"),
                                          &evaluated_);
      for (ParaIndex p : s.paragraphs) batch.entries.push_back({p, BatchOrigin::initial, {}});
      if (s.short_supply) note = "short_supply";
    } else {
      uniform(BatchOrigin::initial, "initial");
    }
    return batch;
  }
  if (cfg_.variant == Variant::random_select) {
    uniform(BatchOrigin::uniform, "uniform");
    return batch;
  }
  std::vector<ParaIndex> sources;
  for (const auto& n : dag_.nodes()) {
    if (n.active) sources.push_back(*ad_.corpus->find_paragraph(n.id));
  }
  if (sources.empty()) {
    note = "no_active_sources";
    uniform(BatchOrigin::fallback, "fallback");
    return batch;
  }
  CandidateSet cands;
  try {
    RetrievalContext ctx{view_, evaluated_, *ad_.index, *ad_.cache};
    cands = hierarchical_retrieve(sources, ctx, cfg_.retrieval);
  } catch (const NeighborhoodExhausted&) {
    note = "neighborhood_exhausted";
  }
  batch = assemble_batch(cands, bs, child_seed(cfg_.seed, t, "batch"), view_, evaluated_);
  if (note.empty() && batch.fallback_count() > 0) note = "short_candidates";
  return batch;
}

std::optional<StepRecord> Engine::step() {
  const auto started = std::chrono::steady_clock::now();
  const Corpus& corpus = *ad_.corpus;
  ++t_;
  std::string note;
  Batch batch = select_batch(note);
  if (batch.entries.empty()) {
    --t_;
    return std::nullopt;
  }
  for (const auto& e : batch.entries) {
    if (!view_.active(e.para) || evaluated_.contains(e.para)) {
      throw std::logic_error("loop prevention violated for " + corpus.paragraph(e.para).para_id);
    }
  }
  phase(Phase::batch_selected);

  const std::size_t n = batch.entries.size();
  std::vector<ParaIndex> paras;
  for (const auto& e : batch.entries) paras.push_back(e.para);
  ad_.cache->ensure(paras, [&](ParaIndex p) { return corpus.paragraph(p).text; });

  std::vector<QaSet> sets(n);
  parallel_for(n, cfg_.max_in_flight, [&](std::size_t i) {
    const ParaIndex p = paras[i];
    ParagraphInput in{corpus.paragraph(p).para_id, corpus.title_line(p), corpus.paragraph(p).text};
    sets[i] = build_qa_set(in, *ad_.generator, cfg_.qa);
  });

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < sets[i].items.size(); ++j) jobs.emplace_back(i, j);
  }
  std::vector<AnswerRecord> answers(jobs.size());
  parallel_for(jobs.size(), cfg_.max_in_flight, [&](std::size_t k) {
    const auto [i, j] = jobs[k];
    const Paragraph& para = corpus.paragraph(paras[i]);
    TesteeContext ctx{para.category, &ad_.cache->get(paras[i])};
    answers[k] = ad_.testee->ask(sets[i].items[j], ctx);
  });
  phase(Phase::evaluated);

  // Charges are applied at the join, in batch order, so the ledger sequence
  // does not depend on thread scheduling.
  BudgetLedger& ledger = *ad_.ledger;
  const std::size_t ledger_from = ledger.record_count();
  const double consumed_before = ledger.consumed();
  std::size_t k = 0;
  StepRecord rec;
  rec.t = t_;
  rec.note = note;
  rec.fallback_count = batch.fallback_count();
  double step_mom_sum = 0.0;
  std::uint64_t step_mom_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& c : sets[i].charges) ledger.charge(CostCategory::generation, c.model, c.usage);
    ParagraphOutcome out;
    out.para = paras[i];
    out.para_id = corpus.paragraph(paras[i]).para_id;
    out.origin = batch.entries[i].origin;
    for (ParaIndex s : batch.entries[i].provenance) {
      out.provenance.push_back(corpus.paragraph(s).para_id);
    }
    out.generation_failed = sets[i].failed;
    for (std::size_t j = 0; j < sets[i].items.size(); ++j, ++k) {
      for (const auto& u : answers[k].attempts) {
        ledger.charge(CostCategory::testee, ad_.testee->model_tag(), u);
      }
      out.tally.add(answers[k]);
    }
    out.error = out.tally.error();
    if (out.error) {
      step_mom_sum += *out.error;
      ++step_mom_count;
    }
    rec.step_tally.add(out.tally);
    rec.batch.push_back(std::move(out));
  }
  for (const auto& u : ad_.cache->drain_usage()) {
    ledger.charge(CostCategory::embedding, ad_.embedding_model, u);
  }
  phase(Phase::charged);

  std::vector<NewSource> admitted;
  std::vector<ParaIndex> to_remove;
  if (cfg_.variant != Variant::random_select) {
    for (auto& o : rec.batch) {
      if (!o.error || o.generation_failed || !(*o.error > cfg_.xi)) continue;
      o.admitted = true;
      admitted.push_back(NewSource{o.para_id, *o.error, o.provenance});
      to_remove.push_back(o.para);
      rec.admitted.push_back(o.para_id);
    }
  }
  dag_.add_sources(admitted, t_);
  view_.remove(to_remove);
  if (cfg_.variant == Variant::full) rec.pruned = dag_.prune(cfg_.gamma);
  for (ParaIndex p : paras) evaluated_.insert(p);

  cumulative_.add(rec.step_tally);
  mom_sum_ += step_mom_sum;
  mom_count_ += step_mom_count;
  rec.cumulative = cumulative_;
  if (step_mom_count) rec.step_mean_of_means = step_mom_sum / static_cast<double>(step_mom_count);
  if (mom_count_) rec.cumulative_mean_of_means = mom_sum_ / static_cast<double>(mom_count_);
  rec.dag_nodes = dag_.size();
  for (const auto& nd : dag_.nodes()) rec.active_sources += nd.active ? 1 : 0;
  rec.consumed = ledger.consumed();
  rec.cost_delta = rec.consumed - consumed_before;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  commit(rec, sets, answers, ledger_from);
  if (keep_answers_) answers_.insert(answers_.end(), answers.begin(), answers.end());
  records_.push_back(rec);
  return rec;
}

void Engine::commit(const StepRecord& rec, const std::vector<QaSet>& sets,
                    const std::vector<AnswerRecord>& answers, std::size_t ledger_from) {
  if (store_) {
    for (const auto& s : sets) {
      for (const auto& tr : s.transcripts) {
        json j = to_json(tr);
        j["step"] = rec.t;
        store_->append_line("transcripts.jsonl", j.dump());
      }
      for (const auto& q : s.items) {
        json j = to_json(q);
        j["step"] = rec.t;
        store_->append_line("qa.jsonl", j.dump());
      }
    }
    for (const auto& a : answers) {
      json j = to_json(a);
      j["step"] = rec.t;
      store_->append_line("answers.jsonl", j.dump());
    }
    for (const auto& c : ad_.ledger->records_since(ledger_from)) {
      store_->append_line("calls.jsonl", charge_json(c, rec.t).dump());
    }
    store_->append_line("steps.jsonl", to_json(rec).dump());
    phase(Phase::artifacts_appended);
    store_->flush();
    store_->write_json("dag.json", dag_json());
    store_->write_json("state.json", state_json());
  }
  phase(Phase::committed);
}

json Engine::dag_json() const {
  json nodes = json::array();
  for (const auto& n : dag_.nodes()) {
    nodes.push_back(json{{"id", n.id}, {"step", n.step}, {"error", n.error}, {"active", n.active}});
  }
  json edges = json::array();
  for (const auto& e : dag_.edges()) {
    edges.push_back(json{{"from", dag_.nodes()[e.from].id},
                         {"to", dag_.nodes()[e.to].id},
                         {"step", e.step}});
  }
  return json{{"nodes", nodes}, {"edges", edges}};
}

json Engine::state_json() const {
  const Corpus& corpus = *ad_.corpus;
  json evaluated = json::array();
  for (ParaIndex p : evaluated_.items()) evaluated.push_back(corpus.paragraph(p).para_id);
  json removed = json::array();
  for (ParaIndex p : view_.removed().items()) removed.push_back(corpus.paragraph(p).para_id);
  json offsets = json::object();
  for (const char* f : kAppendOnly) offsets[f] = store_ ? store_->size(f) : 0;
  return json{{"version", 1},
              {"t", t_},
              {"seed", cfg_.seed},
              {"evaluated", evaluated},
              {"removed", removed},
              {"dag", dag_json()},
              {"tally", tally_json(cumulative_)},
              {"mom_sum", mom_sum_},
              {"mom_count", mom_count_},
              {"offsets", offsets},
              {"ledger_records", ad_.ledger->record_count()},
              {"consumed", ad_.ledger->consumed()}};
}

void Engine::resume() {
  if (!store_) throw std::logic_error("resume needs a run store");
  if (!store_->exists("state.json")) {
    for (const char* f : kAppendOnly) store_->truncate(f, 0);
    return;
  }
  const json st = store_->read_json("state.json");
  if (st.at("version").get<int>() != 1) throw RuntimeFailure("unsupported state.json version");
  if (st.at("seed").get<std::uint64_t>() != cfg_.seed) {
    throw RuntimeFailure("state.json seed does not match the run config");
  }
  for (const char* f : kAppendOnly) {
    store_->truncate(f, st.at("offsets").at(f).get<std::uint64_t>());
  }
  const Corpus& corpus = *ad_.corpus;
  auto lookup = [&](const json& id) {
    auto p = corpus.find_paragraph(id.get<std::string>());
    if (!p) throw RuntimeFailure("checkpoint names unknown paragraph " + id.get<std::string>());
    return *p;
  };
  for (const auto& id : st.at("evaluated")) evaluated_.insert(lookup(id));
  std::vector<ParaIndex> removed;
  for (const auto& id : st.at("removed")) removed.push_back(lookup(id));
  view_.remove(removed);

  const json& dj = st.at("dag");
  std::map<std::string, std::vector<std::string>> parents;
  for (const auto& e : dj.at("edges")) {
    parents[e.at("to").get<std::string>()].push_back(e.at("from").get<std::string>());
  }
  std::vector<NewSource> group;
  std::int64_t group_step = -1;
  auto flush_group = [&] {
    if (!group.empty()) dag_.add_sources(group, group_step);
    group.clear();
  };
  for (const auto& nj : dj.at("nodes")) {
    const auto step = nj.at("step").get<std::int64_t>();
    if (step != group_step) {
      flush_group();
      group_step = step;
    }
    const auto id = nj.at("id").get<std::string>();
    group.push_back(NewSource{id, nj.at("error").get<double>(), parents[id]});
  }
  flush_group();
  std::uint32_t i = 0;
  for (const auto& nj : dj.at("nodes")) dag_.set_active(i++, nj.at("active").get<bool>());

  cumulative_ = tally_from(st.at("tally"));
  mom_sum_ = st.at("mom_sum").get<double>();
  mom_count_ = st.at("mom_count").get<std::uint64_t>();
  t_ = st.at("t").get<std::int64_t>();

  std::vector<ChargeRecord> charges;
  if (store_->exists("calls.jsonl")) {
    for (const auto& j : read_jsonl(store_->path("calls.jsonl"))) charges.push_back(charge_from(j));
  }
  if (charges.size() != st.at("ledger_records").get<std::size_t>()) {
    throw RuntimeFailure("calls.jsonl does not match the checkpoint");
  }
  ad_.ledger->restore(charges);
  if (ad_.ledger->consumed() != st.at("consumed").get<double>()) {
    throw RuntimeFailure("ledger reconciliation failed on resume");
  }
}

void Engine::write_status() {
  if (!store_ || !store_->exists("manifest.json")) return;
  json m = store_->read_json("manifest.json");
  m["status"] = status_name(status_);
  m["termination"] = termination_name(termination_);
  m["steps"] = t_;
  store_->write_json("manifest.json", m);
}

RunSummary Engine::run(std::optional<std::int64_t> max_steps, const std::atomic<bool>* stop) {
  status_ = RunStatus::running;
  termination_ = Termination::none;
  if (store_ && !store_->exists("state.json")) store_->write_json("state.json", state_json());
  write_status();
  std::int64_t done_here = 0;
  try {
    for (;;) {
      if (ad_.ledger->consumed() >= ad_.ledger->limit()) {
        status_ = RunStatus::exhausted;
        termination_ = Termination::budget;
        break;
      }
      if (stop && stop->load()) {
        status_ = RunStatus::done;
        termination_ = Termination::operator_stop;
        break;
      }
      if (max_steps && done_here >= *max_steps) {
        status_ = RunStatus::done;
        termination_ = Termination::max_steps;
        break;
      }
      if (!step()) {
        status_ = RunStatus::exhausted;
        termination_ = Termination::corpus;
        break;
      }
      ++done_here;
    }
  } catch (const std::exception& e) {
    status_ = RunStatus::failed;
    termination_ = Termination::failure;
    try {
      write_status();
    } catch (...) {
    }
    throw;
  }
  write_status();
  return RunSummary{status_, termination_, t_, {}};
}

}  // namespace sea
