#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sea {

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  /// Number of API calls this usage stands for (failed attempts included).
  std::int64_t calls = 1;
  /// Token counts were estimated as characters / 4.
  bool estimated = false;

  static Usage estimate(std::size_t prompt_chars, std::size_t completion_chars);
};

enum class BudgetMode { api_calls, token_dollars };
enum class CostCategory { generation, testee, embedding };

std::string_view category_name(CostCategory c);
std::optional<CostCategory> parse_category(std::string_view s);
std::string_view mode_name(BudgetMode m);

struct Price {
  double input_per_mtok = 0.0;
  double output_per_mtok = 0.0;
};

/// model tag -> price per 10^6 tokens. Loaded from prices.toml:
///   [model."gpt-4o"]
///   input_per_mtok = 2.5
///   output_per_mtok = 10.0
class PriceTable {
 public:
  void set(std::string model, Price p) { prices_[std::move(model)] = p; }
  const Price* find(const std::string& model) const;
  bool empty() const { return prices_.empty(); }
  const std::map<std::string, Price>& entries() const { return prices_; }

  static PriceTable load(const std::filesystem::path& path);
  static PriceTable parse(std::string_view toml_text, const std::string& source = "prices.toml");

 private:
  std::map<std::string, Price> prices_;
};

struct ChargeRecord {
  std::uint64_t seq = 0;
  CostCategory category = CostCategory::testee;
  std::string model;
  Usage usage;
  /// Amount in the ledger's unit (calls or dollars).
  double amount = 0.0;
  bool in_scope = true;
};

/// Running cost account. consumed() counts only categories in scope, summed
/// in charge order; every charge is also kept as a ChargeRecord.
class BudgetLedger {
 public:
  BudgetLedger(BudgetMode mode, double limit, PriceTable prices = {},
               std::vector<CostCategory> scope = {CostCategory::generation,
                                                  CostCategory::testee});

  /// Returns the new in-scope consumed total. Throws ConfigError for a model
  /// missing from the price table in token-dollar mode.
  double charge(CostCategory category, const std::string& model, const Usage& usage);

  /// Amount a charge would add, without recording it.
  double price_of(const std::string& model, const Usage& usage) const;

  double consumed() const;
  double limit() const { return limit_; }
  bool exhausted() const { return consumed() >= limit_; }
  double total(CostCategory c) const;
  BudgetMode mode() const { return mode_; }
  bool in_scope(CostCategory c) const;

  std::vector<ChargeRecord> records() const;
  std::size_t record_count() const;
  /// Records with seq >= from.
  std::vector<ChargeRecord> records_since(std::size_t from) const;

  /// Replays persisted records (resume). Recomputes totals in record order.
  void restore(const std::vector<ChargeRecord>& records);

 private:
  BudgetMode mode_;
  double limit_;
  PriceTable prices_;
  std::vector<CostCategory> scope_;
  double consumed_ = 0.0;
  std::map<CostCategory, double> totals_;
  std::vector<ChargeRecord> records_;
  mutable std::mutex mu_;
};

}  // namespace sea
