#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sea/budget.hpp"
#include "sea/embedding.hpp"
#include "sea/qa.hpp"

namespace sea {

/// Parsed choice: 'A'..'D', or 0 for UNPARSABLE.
using Choice = char;
inline constexpr Choice kUnparsable = 0;

/// Extraction order: the last \box{X} or \boxed{X} with X in A-D (X may be
/// followed by ':', ')', '.', whitespace or '}'); else the last standalone
/// A-D right after "answer is" or "answer:" (case-insensitive); else
/// UNPARSABLE.
Choice parse_choice(std::string_view raw);
std::string choice_name(Choice c);

/// Testee prompt with {topic}, {que}, {opts} filled.
std::string render_testee_prompt(const QaItem& qa, std::string_view topic);

struct AnswerRecord {
  std::string qa_id;
  std::string para_id;
  std::string raw_text;
  Choice parsed = kUnparsable;
  char expected = 'A';
  /// UNPARSABLE counts as wrong.
  bool correct = false;
  /// Summed over every attempt.
  Usage usage;
  double latency_s = 0.0;
  /// Non-empty when transport retries ran out.
  std::string error;
  /// One entry per attempt, in order; what the ledger is charged.
  std::vector<Usage> attempts;

  bool wrong() const { return !correct; }
};

nlohmann::json to_json(const AnswerRecord& r);
AnswerRecord answer_from_json(const nlohmann::json& j);

struct TesteeContext {
  std::string_view topic;
  /// Embedding of the paragraph the question came from (simulated testee).
  const EmbeddingVector* paragraph_embedding = nullptr;
};

class Testee {
 public:
  virtual ~Testee() = default;
  /// Thread-safe. Does not touch any ledger; the caller charges `attempts`.
  virtual AnswerRecord ask(const QaItem& qa, const TesteeContext& ctx) = 0;
  virtual std::string model_tag() const = 0;
  virtual std::string fingerprint() const = 0;
};

/// ask() followed by charging every attempt to the ledger.
AnswerRecord ask_and_charge(Testee& testee, const QaItem& qa, const TesteeContext& ctx,
                            BudgetLedger& ledger);

struct TesteeSampling {
  double temperature = 0.1;
  double top_p = 0.9;
};

/// Remote chat testee. Transport failures are retried up to max_retries
/// times; each failed attempt costs one call and no tokens. Unparsable
/// replies are not re-asked.
class RemoteTestee final : public Testee {
 public:
  RemoteTestee(ChatModel& model, TesteeSampling sampling, int max_retries);
  AnswerRecord ask(const QaItem& qa, const TesteeContext& ctx) override;
  std::string model_tag() const override { return model_.model_tag(); }
  std::string fingerprint() const override { return model_.fingerprint(); }

 private:
  ChatModel& model_;
  TesteeSampling sampling_;
  int max_retries_;
};

struct ErrorRegion {
  EmbeddingVector center;
  /// Cosine distance (1 - cosine) up to which a point is inside.
  double radius = 0.0;
  double error_prob = 0.0;
};

/// Planted error landscape for the simulated testee.
struct ErrorLandscape {
  std::vector<ErrorRegion> regions;
  double base_error_prob = 0.0;
  std::uint64_t seed = 0;

  /// Max error_prob over regions containing `v`, else base_error_prob.
  double error_prob(const EmbeddingVector& v) const;
  void validate() const;

  nlohmann::json to_json() const;
  /// Regions may give "center" (vector), "center_text" (embedded with
  /// `provider`) or "center_para" (looked up through `para_vector`).
  static ErrorLandscape from_json(
      const nlohmann::json& j, EmbeddingProvider* provider,
      const std::function<std::optional<EmbeddingVector>(std::string_view)>& para_vector = {});
  static ErrorLandscape load(
      const std::filesystem::path& path, EmbeddingProvider* provider,
      const std::function<std::optional<EmbeddingVector>(std::string_view)>& para_vector = {});
};

/// Simulated answer: wrong with the landscape's probability at the
/// paragraph embedding, drawn from a stream seeded by (landscape seed,
/// qa_id); a wrong answer is uniform over the three incorrect letters.
AnswerRecord simulate_answer(const QaItem& qa, const EmbeddingVector& paragraph_embedding,
                             const ErrorLandscape& landscape);

class SimulatedTestee final : public Testee {
 public:
  SimulatedTestee(ErrorLandscape landscape, std::string tag = "simulated");
  AnswerRecord ask(const QaItem& qa, const TesteeContext& ctx) override;
  std::string model_tag() const override { return tag_; }
  std::string fingerprint() const override;
  const ErrorLandscape& landscape() const { return landscape_; }

 private:
  ErrorLandscape landscape_;
  std::string tag_;
};

}  // namespace sea
