#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sea/abstract_index.hpp"
#include "sea/budget.hpp"
#include "sea/embedding.hpp"
#include "sea/qa.hpp"
#include "sea/retrieval.hpp"
#include "sea/testee.hpp"

namespace sea {

enum class Variant { full, no_prune, random_select };
enum class InitialMode { category_uniform, fully_random };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
std::string_view initial_mode_name(InitialMode m);

struct EngineConfig {
  double xi = 0.5;
  double gamma = 0.5;
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  InitialMode initial_mode = InitialMode::category_uniform;
  /// Categories for the initial batch; empty means the corpus's own labels.
  std::vector<std::string> categories = default_categories();
  std::size_t max_in_flight = 8;
  /// Checks acyclicity after every DAG mutation.
  bool verify_dag = false;
  RetrievalConfig retrieval;
  QaConfig qa;

  void validate() const;
};

enum class GeneratorKind { remote, template_engine };
enum class TesteeKind { remote, simulated };

struct GeneratorSettings {
  GeneratorKind kind = GeneratorKind::template_engine;
  EndpointConfig endpoint{.base_url = {}, .model = {}, .api_key_env = "SEA_GEN_API_KEY"};
  /// Fault injection for the template engine.
  double malformed_rate = 0.0;
};

struct TesteeSettings {
  TesteeKind kind = TesteeKind::simulated;
  EndpointConfig endpoint{.base_url = {}, .model = {}, .api_key_env = "SEA_TESTEE_API_KEY"};
  TesteeSampling sampling;
  int max_retries = 3;
  /// JSON landscape file (simulated testee).
  std::string landscape;
  std::string model_tag = "simulated";
};

struct BudgetSettings {
  BudgetMode mode = BudgetMode::api_calls;
  double limit = 20000;
  std::string prices;
  std::vector<CostCategory> scope{CostCategory::generation, CostCategory::testee};
};

struct PathSettings {
  /// Normalized corpus produced by `sea ingest` (or a raw corpus file).
  std::string corpus;
  /// Directory with index.bin from `sea index`; empty builds the index in memory.
  std::string index;
  std::string runs = "runs";
};

struct RunConfig {
  EngineConfig engine;
  GeneratorSettings generator;
  TesteeSettings testee;
  EmbeddingProviderConfig embedding;
  IndexBuildParams index;
  BudgetSettings budget;
  PathSettings paths;
  /// Directory of the config file; relative paths resolve against it.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& p) const;
};

/// Throws ConfigError with "file:line:col: key: message" diagnostics.
RunConfig parse_config(std::string_view toml_text, const std::string& source,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace sea
