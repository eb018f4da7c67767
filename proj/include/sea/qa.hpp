#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sea/budget.hpp"
#include "sea/openai_client.hpp"

namespace sea {

struct QaItem {
  std::string qa_id;
  std::string para_id;
  int base_index = 0;
  /// 0 for the generated question, 1.. for rephrasings.
  int variant_index = 0;
  std::string question;
  /// Option texts for A, B, C, D (labels stripped).
  std::array<std::string, 4> options;
  char answer = 'A';
  std::string statement;

  static std::string make_id(std::string_view para_id, int base, int variant);
  /// "A: ...\nB: ...\nC: ...\nD: ..."
  std::string options_block() const;
  bool operator==(const QaItem&) const = default;
};

nlohmann::json to_json(const QaItem& q);
/// Re-validates; throws std::invalid_argument on a schema violation.
QaItem qa_from_json(const nlohmann::json& j);
/// Empty string when valid, otherwise the first violation.
std::string validate(const QaItem& q);

/// One question as the generator returned it, before ids are attached.
struct RawQuestion {
  std::string question;
  std::array<std::string, 4> options;
  char answer = 'A';
  std::string statement;
};

struct ParsedReply {
  std::vector<RawQuestion> items;
  /// Empty when the reply is acceptable.
  std::string error;
  bool ok() const { return error.empty(); }
};

/// Validates a generator reply as a whole: a JSON array (optionally inside a
/// code fence) of at least `expected` objects, each with a non-empty
/// question, exactly four options labelled A-D once each, an answer letter
/// A-D and a string statement. Extra items beyond `expected` are dropped.
ParsedReply parse_generator_reply(std::string_view text, std::size_t expected);

struct ChatRequest {
  std::string prompt;
  double temperature = 0.1;
  double top_p = 0.9;
  /// 0 for the first try of a prompt, incremented on each retry.
  int attempt = 0;
};

struct ChatReply {
  bool ok = false;
  std::string text;
  Usage usage;
  std::string error;
  double latency_s = 0.0;
};

/// Single-turn chat completion; one attempt per call.
class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual ChatReply complete(const ChatRequest& req) = 0;
  virtual std::string model_tag() const = 0;
  virtual std::string fingerprint() const { return model_tag(); }
};

/// POST {base_url}/chat/completions.
class RemoteChatModel final : public ChatModel {
 public:
  explicit RemoteChatModel(EndpointConfig endpoint);
  ChatReply complete(const ChatRequest& req) override;
  std::string model_tag() const override { return client_.config().model; }
  std::string fingerprint() const override;

 private:
  OpenAiClient client_;
};

/// Offline generator that answers the generation and rephrase prompts with
/// deterministic cloze questions built from the prompt's context. Option
/// order is shuffled with the seed, so answer letters vary.
class TemplateGenerator final : public ChatModel {
 public:
  explicit TemplateGenerator(std::uint64_t seed, std::string tag = "template-generator");
  /// Probability that an attempt returns a malformed reply (fault injection).
  void set_malformed_rate(double p) { malformed_rate_ = p; }
  ChatReply complete(const ChatRequest& req) override;
  std::string model_tag() const override { return tag_; }
  std::string fingerprint() const override;

 private:
  std::uint64_t seed_;
  std::string tag_;
  double malformed_rate_ = 0.0;
};

/// Test double returning queued replies in order, or the fallback function
/// once the queue is empty.
class ScriptedChatModel final : public ChatModel {
 public:
  using Fn = std::function<ChatReply(const ChatRequest&)>;
  explicit ScriptedChatModel(std::string tag = "scripted", Fn fallback = {});
  void push(ChatReply r);
  void push_text(std::string text);
  ChatReply complete(const ChatRequest& req) override;
  std::string model_tag() const override { return tag_; }
  std::size_t calls() const;

 private:
  std::string tag_;
  Fn fallback_;
  std::deque<ChatReply> queue_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

struct QaConfig {
  std::size_t n_base = 5;
  std::size_t n_variants = 4;
  /// Extra attempts after a malformed reply or transport failure.
  int max_retries = 3;
  /// A paragraph must produce more than floor * target_total items.
  double floor = 0.6;
  double temperature = 0.1;
  double top_p = 0.9;

  std::size_t target_total() const { return n_base * (1 + n_variants); }
};

/// One generator exchange, kept for audit.
struct Transcript {
  std::string para_id;
  std::string kind;  // "generate" or "rephrase"
  int base_index = -1;
  int attempt = 0;
  std::string prompt;
  std::string reply;
  bool accepted = false;
  std::string error;
  Usage usage;
};

nlohmann::json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);

struct GenerationCharge {
  std::string model;
  Usage usage;
};

struct QaSet {
  std::string para_id;
  std::vector<QaItem> items;
  std::size_t target_total = 0;
  bool failed = false;
  /// Base questions whose group was dropped.
  std::vector<int> failed_bases;
  std::vector<Transcript> transcripts;
  /// One entry per generator attempt, in issue order.
  std::vector<GenerationCharge> charges;
};

struct ParagraphInput {
  std::string para_id;
  std::string title;
  std::string context;
};

struct GenerationOutcome {
  std::vector<QaItem> items;
  bool ok = false;
};

/// n_base questions with variant_index 0, or !ok after all retries.
GenerationOutcome generate_base_questions(const ParagraphInput& para, std::size_t n_base,
                                          ChatModel& gen, const QaConfig& cfg, QaSet& log);

/// n_variants rephrasings of `base` (variant_index 1..n), or !ok.
GenerationOutcome rephrase_question(const ParagraphInput& para, const QaItem& base,
                                    std::size_t n_variants, ChatModel& gen, const QaConfig& cfg,
                                    QaSet& log);

/// Generation then rephrasing. A base question whose rephrasing fails is
/// dropped together with its variants; the set fails when it ends up with
/// floor * target_total items or fewer.
QaSet build_qa_set(const ParagraphInput& para, ChatModel& gen, const QaConfig& cfg);

/// Rebuilds the accepted items of a set from its transcripts alone.
std::vector<QaItem> reconstruct_from_transcripts(const std::vector<Transcript>& transcripts,
                                                 const QaConfig& cfg);

/// {"question", "options" ["A: ..."...], "answer"} as handed to the rephrase prompt.
std::string base_question_json(const QaItem& q);

}  // namespace sea
