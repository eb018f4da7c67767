#include "sea/testee.hpp"

#include <array>
#include <cctype>
#include <chrono>
#include <cmath>

#include "sea/common.hpp"
#include "sea/prompts.hpp"

namespace sea {

using nlohmann::json;

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_choice(char c) { return c >= 'A' && c <= 'D'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool ieq_at(std::string_view s, std::size_t at, std::string_view word) {
  if (at + word.size() > s.size()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (lower(s[at + i]) != word[i]) return false;
  }
  return true;
}

/// Letter at the start of a \box{...} body.
Choice box_body(std::string_view s, std::size_t at) {
  while (at < s.size() && s[at] == ' ') ++at;
  if (at >= s.size() || !is_choice(s[at])) return kUnparsable;
  const char c = s[at];
  if (at + 1 >= s.size()) return kUnparsable;
  const char next = s[at + 1];
  if (next == '}' || next == ':' || next == ')' || next == '.' ||
      std::isspace(static_cast<unsigned char>(next))) {
    return c;
  }
  return kUnparsable;
}

Choice after_phrase(std::string_view s, std::size_t at) {
  while (at < s.size() && (s[at] == ' ' || s[at] == '\t' || s[at] == '*' || s[at] == '(' ||
                           s[at] == ':')) {
    ++at;
  }
  if (at >= s.size() || !is_choice(s[at])) return kUnparsable;
  if (at + 1 < s.size() && is_letter(s[at + 1])) return kUnparsable;
  return s[at];
}

}  // namespace

Choice parse_choice(std::string_view s) {
  Choice boxed = kUnparsable;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') continue;
    std::size_t body = std::string_view::npos;
    if (s.compare(i + 1, 6, "boxed{") == 0) {
      body = i + 7;
    } else if (s.compare(i + 1, 4, "box{") == 0) {
      body = i + 5;
    }
    if (body == std::string_view::npos) continue;
    if (Choice c = box_body(s, body); c != kUnparsable) boxed = c;
  }
  if (boxed != kUnparsable) return boxed;

  Choice prose = kUnparsable;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (ieq_at(s, i, "answer is")) {
      if (Choice c = after_phrase(s, i + 9); c != kUnparsable) prose = c;
    } else if (ieq_at(s, i, "answer:")) {
      if (Choice c = after_phrase(s, i + 7); c != kUnparsable) prose = c;
    }
  }
  return prose;
}

std::string choice_name(Choice c) {
  return c == kUnparsable ? std::string("UNPARSABLE") : std::string(1, c);
}

std::string render_testee_prompt(const QaItem& qa, std::string_view topic) {
  return render_prompt(prompt_template(PromptKind::testee),
                       {{"topic", std::string(topic)}, {"que", qa.question},
                        {"opts", qa.options_block()}});
}

json to_json(const AnswerRecord& r) {
  json attempts = json::array();
  for (const auto& u : r.attempts) {
    attempts.push_back(json{{"prompt_tokens", u.prompt_tokens},
                            {"completion_tokens", u.completion_tokens},
                            {"calls", u.calls},
                            {"estimated", u.estimated}});
  }
  return json{{"qa_id", r.qa_id},
              {"para_id", r.para_id},
              {"raw_text", r.raw_text},
              {"parsed", choice_name(r.parsed)},
              {"expected", std::string(1, r.expected)},
              {"correct", r.correct},
              {"prompt_tokens", r.usage.prompt_tokens},
              {"completion_tokens", r.usage.completion_tokens},
              {"estimated", r.usage.estimated},
              {"latency_s", r.latency_s},
              {"error", r.error},
              {"attempts", attempts}};
}

AnswerRecord answer_from_json(const json& j) {
  AnswerRecord r;
  r.qa_id = j.at("qa_id").get<std::string>();
  r.para_id = j.at("para_id").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  const auto p = j.at("parsed").get<std::string>();
  r.parsed = p.size() == 1 ? p[0] : kUnparsable;
  r.expected = j.at("expected").get<std::string>().at(0);
  r.correct = j.at("correct").get<bool>();
  r.usage.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  r.usage.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  r.usage.estimated = j.at("estimated").get<bool>();
  r.latency_s = j.at("latency_s").get<double>();
  r.error = j.at("error").get<std::string>();
  for (const auto& a : j.at("attempts")) {
    r.attempts.push_back(Usage{a.at("prompt_tokens").get<std::int64_t>(),
                               a.at("completion_tokens").get<std::int64_t>(),
                               a.at("calls").get<std::int64_t>(),
                               a.at("estimated").get<bool>()});
  }
  r.usage.calls = static_cast<std::int64_t>(r.attempts.size());
  return r;
}

AnswerRecord ask_and_charge(Testee& testee, const QaItem& qa, const TesteeContext& ctx,
                            BudgetLedger& ledger) {
  AnswerRecord r = testee.ask(qa, ctx);
  for (const auto& u : r.attempts) ledger.charge(CostCategory::testee, testee.model_tag(), u);
  return r;
}

RemoteTestee::RemoteTestee(ChatModel& model, TesteeSampling sampling, int max_retries)
    : model_(model), sampling_(sampling), max_retries_(max_retries) {}

AnswerRecord RemoteTestee::ask(const QaItem& qa, const TesteeContext& ctx) {
  AnswerRecord r;
  r.qa_id = qa.qa_id;
  r.para_id = qa.para_id;
  r.expected = qa.answer;
  r.usage = Usage{0, 0, 0, false};
  const std::string prompt = render_testee_prompt(qa, ctx.topic);
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    ChatReply reply = model_.complete(ChatRequest{prompt, sampling_.temperature, sampling_.top_p,
                                                  attempt});
    r.latency_s += reply.latency_s;
    if (!reply.ok) {
      r.attempts.push_back(Usage{0, 0, 1, false});
      r.error = reply.error.empty() ? "transport failure" : reply.error;
      continue;
    }
    r.attempts.push_back(reply.usage);
    r.raw_text = reply.text;
    r.error.clear();
    break;
  }
  for (const auto& u : r.attempts) {
    r.usage.prompt_tokens += u.prompt_tokens;
    r.usage.completion_tokens += u.completion_tokens;
    r.usage.estimated = r.usage.estimated || u.estimated;
  }
  r.usage.calls = static_cast<std::int64_t>(r.attempts.size());
  r.parsed = r.error.empty() ? parse_choice(r.raw_text) : kUnparsable;
  r.correct = r.parsed != kUnparsable && r.parsed == qa.answer;
  return r;
}

// ---------------------------------------------------------------------------

double ErrorLandscape::error_prob(const EmbeddingVector& v) const {
  double p = base_error_prob;
  bool inside = false;
  double best = 0.0;
  for (const auto& r : regions) {
    if (1.0 - cosine(r.center, v) <= r.radius) {
      best = inside ? std::max(best, r.error_prob) : r.error_prob;
      inside = true;
    }
  }
  return inside ? best : p;
}

void ErrorLandscape::validate() const {
  auto prob_ok = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!prob_ok(base_error_prob)) throw ConfigError("base_error_prob must be in [0, 1]");
  for (const auto& r : regions) {
    if (!prob_ok(r.error_prob)) throw ConfigError("region error_prob must be in [0, 1]");
    if (!std::isfinite(r.radius) || r.radius < 0.0 || r.radius > 2.0) {
      throw ConfigError("region radius must be a cosine distance in [0, 2]");
    }
  }
}

json ErrorLandscape::to_json() const {
  json regs = json::array();
  for (const auto& r : regions) {
    regs.push_back(json{{"center", r.center.values}, {"radius", r.radius},
                        {"error_prob", r.error_prob}});
  }
  return json{{"mode", "region"}, {"base_error_prob", base_error_prob}, {"seed", seed},
              {"regions", regs}};
}

ErrorLandscape ErrorLandscape::from_json(
    const json& j, EmbeddingProvider* provider,
    const std::function<std::optional<EmbeddingVector>(std::string_view)>& para_vector) {
  ErrorLandscape l;
  try {
    if (j.value("mode", std::string("region")) != "region") {
      throw ConfigError("landscape mode must be \"region\"");
    }
    l.base_error_prob = j.value("base_error_prob", 0.0);
    l.seed = j.value("seed", std::uint64_t{0});
    for (const auto& r : j.value("regions", json::array())) {
      ErrorRegion reg;
      reg.radius = r.at("radius").get<double>();
      reg.error_prob = r.at("error_prob").get<double>();
      if (r.contains("center")) {
        reg.center = EmbeddingVector::from_raw(r.at("center").get<std::vector<float>>());
      } else if (r.contains("center_text")) {
        if (!provider) throw ConfigError("center_text needs an embedding provider");
        std::vector<std::string> t{r.at("center_text").get<std::string>()};
        reg.center = EmbeddingVector::from_raw(provider->embed_raw(t).at(0));
      } else if (r.contains("center_para")) {
        const auto id = r.at("center_para").get<std::string>();
        std::optional<EmbeddingVector> v = para_vector ? para_vector(id) : std::nullopt;
        if (!v) throw ConfigError("center_para " + id + " is not a known paragraph");
        reg.center = std::move(*v);
      } else {
        throw ConfigError("region needs center, center_text or center_para");
      }
      l.regions.push_back(std::move(reg));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("landscape: ") + e.what());
  } catch (const EmbeddingError& e) {
    throw ConfigError(std::string("landscape: ") + e.what());
  }
  l.validate();
  return l;
}

ErrorLandscape ErrorLandscape::load(
    const std::filesystem::path& path, EmbeddingProvider* provider,
    const std::function<std::optional<EmbeddingVector>(std::string_view)>& para_vector) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return from_json(j, provider, para_vector);
}

AnswerRecord simulate_answer(const QaItem& qa, const EmbeddingVector& emb,
                             const ErrorLandscape& landscape) {
  AnswerRecord r;
  r.qa_id = qa.qa_id;
  r.para_id = qa.para_id;
  r.expected = qa.answer;
  Rng rng(splitmix64(landscape.seed ^ fnv1a64(qa.qa_id)));
  const double p = landscape.error_prob(emb);
  char choice = qa.answer;
  if (rng.uniform01() < p) {
    std::array<char, 3> wrong{};
    std::size_t n = 0;
    for (char c = 'A'; c <= 'D'; ++c) {
      if (c != qa.answer) wrong[n++] = c;
    }
    choice = wrong[rng.below(3)];
  }
  r.raw_text = std::string("\\box{") + choice + "}";
  r.parsed = parse_choice(r.raw_text);
  r.correct = r.parsed == qa.answer;
  return r;
}

SimulatedTestee::SimulatedTestee(ErrorLandscape landscape, std::string tag)
    : landscape_(std::move(landscape)), tag_(std::move(tag)) {
  landscape_.validate();
}

std::string SimulatedTestee::fingerprint() const {
  return "simulated:" + hex64(fnv1a64(landscape_.to_json().dump()));
}

AnswerRecord SimulatedTestee::ask(const QaItem& qa, const TesteeContext& ctx) {
  if (!ctx.paragraph_embedding) {
    throw std::invalid_argument("simulated testee needs the paragraph embedding");
  }
  AnswerRecord r = simulate_answer(qa, *ctx.paragraph_embedding, landscape_);
  const std::string prompt = render_testee_prompt(qa, ctx.topic);
  r.usage = Usage::estimate(prompt.size(), r.raw_text.size());
  r.attempts.push_back(r.usage);
  return r;
}

}  // namespace sea
