#include "sea/budget.hpp"

#include <algorithm>
#include <sstream>

#include "sea/common.hpp"
#include "sea/toml_util.hpp"

namespace sea {

Usage Usage::estimate(std::size_t prompt_chars, std::size_t completion_chars) {
  return Usage{static_cast<std::int64_t>(prompt_chars / 4),
               static_cast<std::int64_t>(completion_chars / 4), 1, true};
}

std::string_view category_name(CostCategory c) {
  switch (c) {
    case CostCategory::generation: return "generation";
    case CostCategory::testee: return "testee";
    case CostCategory::embedding: return "embedding";
  }
  return "?";
}

std::optional<CostCategory> parse_category(std::string_view s) {
  if (s == "generation") return CostCategory::generation;
  if (s == "testee") return CostCategory::testee;
  if (s == "embedding") return CostCategory::embedding;
  return std::nullopt;
}

std::string_view mode_name(BudgetMode m) {
  return m == BudgetMode::api_calls ? "api-calls" : "token-dollars";
}

const Price* PriceTable::find(const std::string& model) const {
  auto it = prices_.find(model);
  return it == prices_.end() ? nullptr : &it->second;
}

PriceTable PriceTable::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

PriceTable PriceTable::parse(std::string_view toml_text, const std::string& source) {
  auto doc = parse_toml(toml_text, source);
  PriceTable out;
  const auto* models = doc.get("model");
  if (!models) return out;
  const auto* tbl = models->as_table();
  if (!tbl) throw ConfigError(where(*models, source) + ": [model] must be a table");
  for (const auto& [tag, node] : *tbl) {
    const auto* entry = node.as_table();
    if (!entry) throw ConfigError(where(node, source) + ": model entry must be a table");
    TableReader r(*entry, source, "model." + std::string(tag.str()));
    Price p;
    p.input_per_mtok = r.number("input_per_mtok", 0.0, 0.0);
    p.output_per_mtok = r.number("output_per_mtok", 0.0, 0.0);
    r.finish();
    out.set(std::string(tag.str()), p);
  }
  return out;
}

BudgetLedger::BudgetLedger(BudgetMode mode, double limit, PriceTable prices,
                           std::vector<CostCategory> scope)
    : mode_(mode), limit_(limit), prices_(std::move(prices)), scope_(std::move(scope)) {}

bool BudgetLedger::in_scope(CostCategory c) const {
  return std::find(scope_.begin(), scope_.end(), c) != scope_.end();
}

double BudgetLedger::price_of(const std::string& model, const Usage& usage) const {
  if (mode_ == BudgetMode::api_calls) return static_cast<double>(usage.calls);
  const Price* p = prices_.find(model);
  if (!p) throw ConfigError("model \"" + model + "\" is missing from the price table");
  return static_cast<double>(usage.prompt_tokens) * p->input_per_mtok / 1e6 +
         static_cast<double>(usage.completion_tokens) * p->output_per_mtok / 1e6;
}

double BudgetLedger::charge(CostCategory category, const std::string& model, const Usage& usage) {
  if (usage.prompt_tokens < 0 || usage.completion_tokens < 0 || usage.calls < 0) {
    throw std::invalid_argument("negative usage");
  }
  const double amount = price_of(model, usage);
  std::lock_guard lk(mu_);
  ChargeRecord rec{records_.size(), category, model, usage, amount, in_scope(category)};
  totals_[category] += amount;
  if (rec.in_scope) consumed_ += amount;
  records_.push_back(std::move(rec));
  return consumed_;
}

double BudgetLedger::consumed() const {
  std::lock_guard lk(mu_);
  return consumed_;
}

double BudgetLedger::total(CostCategory c) const {
  std::lock_guard lk(mu_);
  auto it = totals_.find(c);
  return it == totals_.end() ? 0.0 : it->second;
}

std::vector<ChargeRecord> BudgetLedger::records() const {
  std::lock_guard lk(mu_);
  return records_;
}

std::size_t BudgetLedger::record_count() const {
  std::lock_guard lk(mu_);
  return records_.size();
}

std::vector<ChargeRecord> BudgetLedger::records_since(std::size_t from) const {
  std::lock_guard lk(mu_);
  if (from >= records_.size()) return {};
  return {records_.begin() + static_cast<std::ptrdiff_t>(from), records_.end()};
}

void BudgetLedger::restore(const std::vector<ChargeRecord>& records) {
  std::lock_guard lk(mu_);
  records_.clear();
  totals_.clear();
  consumed_ = 0.0;
  for (const auto& r : records) {
    ChargeRecord rec = r;
    rec.seq = records_.size();
    rec.in_scope = in_scope(rec.category);
    totals_[rec.category] += rec.amount;
    if (rec.in_scope) consumed_ += rec.amount;
    records_.push_back(std::move(rec));
  }
}

}  // namespace sea
