#include "sea/qa.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "sea/common.hpp"
#include "sea/prompts.hpp"

namespace sea {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_label_sep(char c) { return c == ':' || c == '.' || c == ')'; }

/// "A: text", "A. text", "A) text", "(A) text" -> (letter, text).
std::optional<std::pair<char, std::string>> split_option(std::string_view s) {
  s = trim(s);
  bool paren = false;
  if (!s.empty() && s.front() == '(') {
    paren = true;
    s.remove_prefix(1);
  }
  if (s.size() < 2 || s[0] < 'A' || s[0] > 'D') return std::nullopt;
  const char letter = s[0];
  s.remove_prefix(1);
  if (paren) {
    if (s.empty() || s.front() != ')') return std::nullopt;
    s.remove_prefix(1);
    if (!s.empty() && is_label_sep(s.front())) s.remove_prefix(1);
  } else {
    if (s.empty() || !is_label_sep(s.front())) return std::nullopt;
    s.remove_prefix(1);
  }
  s = trim(s);
  if (s.empty()) return std::nullopt;
  return std::pair{letter, std::string(s)};
}

std::optional<char> parse_answer_letter(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '(') s.remove_prefix(1);
  if (s.empty() || s[0] < 'A' || s[0] > 'D') return std::nullopt;
  if (s.size() == 1) return s[0];
  const char next = s[1];
  if (is_label_sep(next) || std::isspace(static_cast<unsigned char>(next))) return s[0];
  return std::nullopt;
}

std::string_view strip_fence(std::string_view text) {
  auto open = text.find("```");
  if (open == std::string_view::npos) return text;
  auto body = text.find('\n', open);
  if (body == std::string_view::npos) return text;
  auto close = text.find("```", body);
  if (close == std::string_view::npos) return text.substr(body + 1);
  return text.substr(body + 1, close - body - 1);
}

std::string describe_json_type(const json& j) { return j.type_name(); }

std::string check_object(const json& o, RawQuestion& out) {
  if (!o.is_object()) return "item is " + describe_json_type(o) + ", expected object";
  auto q = o.find("question");
  if (q == o.end() || !q->is_string()) return "missing string field \"question\"";
  if (trim(q->get_ref<const std::string&>()).empty()) return "empty question";
  out.question = std::string(trim(q->get_ref<const std::string&>()));

  auto opts = o.find("options");
  if (opts == o.end() || !opts->is_array()) return "missing array field \"options\"";
  if (opts->size() != 4) return "expected 4 options, got " + std::to_string(opts->size());
  std::array<bool, 4> seen{};
  for (const auto& opt : *opts) {
    if (!opt.is_string()) return "option is not a string";
    auto parsed = split_option(opt.get_ref<const std::string&>());
    if (!parsed) return "option \"" + opt.get<std::string>() + "\" lacks an A-D label or text";
    const int slot = parsed->first - 'A';
    if (seen[slot]) return std::string("option label ") + parsed->first + " repeated";
    seen[slot] = true;
    out.options[slot] = std::move(parsed->second);
  }

  auto ans = o.find("answer");
  if (ans == o.end() || !ans->is_string()) return "missing string field \"answer\"";
  auto letter = parse_answer_letter(ans->get_ref<const std::string&>());
  if (!letter) return "answer \"" + ans->get<std::string>() + "\" is not one of A-D";
  out.answer = *letter;

  auto st = o.find("statement");
  if (st == o.end() || !st->is_string()) return "missing string field \"statement\"";
  out.statement = st->get<std::string>();
  return {};
}

}  // namespace

std::string QaItem::make_id(std::string_view para_id, int base, int variant) {
  return std::string(para_id) + "/b" + std::to_string(base) + "/v" + std::to_string(variant);
}

std::string QaItem::options_block() const {
  std::string out;
  for (int i = 0; i < 4; ++i) {
    if (i) out += '\n';
    out += static_cast<char>('A' + i);
    out += ": ";
    out += options[static_cast<std::size_t>(i)];
  }
  return out;
}

std::string validate(const QaItem& q) {
  if (trim(q.question).empty()) return "empty question";
  for (const auto& o : q.options) {
    if (trim(o).empty()) return "empty option";
  }
  if (q.answer < 'A' || q.answer > 'D') return "answer outside A-D";
  if (q.base_index < 0 || q.variant_index < 0) return "negative index";
  if (q.qa_id != QaItem::make_id(q.para_id, q.base_index, q.variant_index)) return "qa_id mismatch";
  return {};
}

json to_json(const QaItem& q) {
  return json{{"qa_id", q.qa_id},
              {"para_id", q.para_id},
              {"base_index", q.base_index},
              {"variant_index", q.variant_index},
              {"question", q.question},
              {"options", q.options},
              {"answer", std::string(1, q.answer)},
              {"statement", q.statement}};
}

QaItem qa_from_json(const json& j) {
  QaItem q;
  try {
    q.qa_id = j.at("qa_id").get<std::string>();
    q.para_id = j.at("para_id").get<std::string>();
    q.base_index = j.at("base_index").get<int>();
    q.variant_index = j.at("variant_index").get<int>();
    q.question = j.at("question").get<std::string>();
    const auto& opts = j.at("options");
    if (!opts.is_array() || opts.size() != 4) throw std::invalid_argument("expected 4 options");
    for (std::size_t i = 0; i < 4; ++i) q.options[i] = opts[i].get<std::string>();
    const auto a = j.at("answer").get<std::string>();
    if (a.size() != 1) throw std::invalid_argument("answer must be one letter");
    q.answer = a[0];
    q.statement = j.at("statement").get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("qa item: ") + e.what());
  }
  if (auto err = validate(q); !err.empty()) throw std::invalid_argument("qa item: " + err);
  return q;
}

ParsedReply parse_generator_reply(std::string_view text, std::size_t expected) {
  ParsedReply out;
  std::string_view body = trim(strip_fence(text));
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) {
    out.error = "reply is not valid JSON";
    return out;
  }
  if (!j.is_array()) {
    out.error = "reply is " + describe_json_type(j) + ", expected array";
    return out;
  }
  if (j.size() < expected) {
    out.error = "expected " + std::to_string(expected) + " items, got " + std::to_string(j.size());
    return out;
  }
  for (std::size_t i = 0; i < expected; ++i) {
    RawQuestion q;
    if (auto err = check_object(j[i], q); !err.empty()) {
      out.items.clear();
      out.error = "item " + std::to_string(i) + ": " + err;
      return out;
    }
    out.items.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------

RemoteChatModel::RemoteChatModel(EndpointConfig endpoint) : client_(std::move(endpoint)) {}

std::string RemoteChatModel::fingerprint() const {
  return "openai-chat:" + client_.config().base_url + ":" + client_.config().model;
}

ChatReply RemoteChatModel::complete(const ChatRequest& req) {
  json body{{"model", client_.config().model},
            {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
            {"temperature", req.temperature},
            {"top_p", req.top_p}};
  HttpResponse resp = client_.post_json("/chat/completions", body);
  ChatReply r;
  r.latency_s = resp.latency_s;
  r.usage = Usage{0, 0, 1, false};
  if (!resp.ok) {
    r.error = resp.error.empty() ? "HTTP " + std::to_string(resp.status) : resp.error;
    return r;
  }
  try {
    r.text = resp.body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    r.error = std::string("unexpected chat reply shape: ") + e.what();
    return r;
  }
  r.ok = true;
  auto u = resp.body.find("usage");
  if (u != resp.body.end() && u->is_object() && u->contains("prompt_tokens") &&
      u->contains("completion_tokens")) {
    r.usage.prompt_tokens = (*u)["prompt_tokens"].get<std::int64_t>();
    r.usage.completion_tokens = (*u)["completion_tokens"].get<std::int64_t>();
  } else {
    r.usage = Usage::estimate(req.prompt.size(), r.text.size());
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::string section(std::string_view prompt, std::string_view header) {
  auto at = prompt.find(header);
  if (at == std::string_view::npos) return {};
  at += header.size();
  auto end = prompt.find("\n\n## ", at);
  if (end == std::string_view::npos) end = prompt.size();
  return std::string(trim(prompt.substr(at, end - at)));
}

std::size_t requested_count(std::string_view prompt) {
  auto at = prompt.find("reply with ");
  if (at == std::string_view::npos) return 1;
  at += 11;
  std::size_t n = 0;
  while (at < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[at]))) {
    n = n * 10 + static_cast<std::size_t>(prompt[at++] - '0');
  }
  return std::max<std::size_t>(n, 1);
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '\'') {
      cur += c;
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

json option_array(const std::array<std::string, 4>& opts) {
  json a = json::array();
  for (int i = 0; i < 4; ++i) {
    a.push_back(std::string(1, static_cast<char>('A' + i)) + ": " + opts[static_cast<std::size_t>(i)]);
  }
  return a;
}

/// Places `correct` and the distractors in a seeded order; returns the answer letter.
char place_options(Rng& rng, const std::string& correct, std::vector<std::string> distractors,
                   std::array<std::string, 4>& out) {
  std::vector<std::string> all{correct};
  for (auto& d : distractors) all.push_back(std::move(d));
  std::array<int, 4> order{0, 1, 2, 3};
  for (int i = 3; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  char answer = 'A';
  for (int slot = 0; slot < 4; ++slot) {
    const int src = order[static_cast<std::size_t>(slot)];
    out[static_cast<std::size_t>(slot)] = all[static_cast<std::size_t>(src)];
    if (src == 0) answer = static_cast<char>('A' + slot);
  }
  return answer;
}

json cloze_questions(std::string_view title, std::string_view context, std::size_t n, Rng& rng) {
  const auto words = words_of(context);
  std::vector<std::size_t> positions;
  std::vector<std::string> distinct;
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (words[i].size() >= 4) positions.push_back(i);
      if (seen.insert(words[i]).second) distinct.push_back(words[i]);
    }
  }
  if (positions.empty()) {
    for (std::size_t i = 0; i < words.size(); ++i) positions.push_back(i);
  }
  json out = json::array();
  for (std::size_t q = 0; q < n; ++q) {
    std::string target = "(none)";
    std::string window;
    std::string filled;
    if (!positions.empty()) {
      const std::size_t pos = positions[rng.below(positions.size())];
      target = words[pos];
      const std::size_t lo = pos >= 6 ? pos - 6 : 0;
      const std::size_t hi = std::min(words.size(), pos + 7);
      for (std::size_t i = lo; i < hi; ++i) {
        if (i > lo) {
          window += ' ';
          filled += ' ';
        }
        window += i == pos ? std::string("____") : words[i];
        filled += words[i];
      }
    }
    std::vector<std::string> pool;
    for (const auto& w : distinct) {
      if (w != target) pool.push_back(w);
    }
    auto distractors = rng.sample(std::move(pool), 3);
    for (std::size_t i = distractors.size(); i < 3; ++i) {
      distractors.push_back("none of item " + std::to_string(i + 1));
    }
    std::array<std::string, 4> opts;
    const char answer = place_options(rng, target, std::move(distractors), opts);
    out.push_back(json{{"question", "Regarding " + std::string(title) +
                                        ", which word completes the passage \"" + window + "\"?"},
                       {"options", option_array(opts)},
                       {"statement", "The passage reads \"" + filled + "\"."},
                       {"answer", std::string(1, answer)}});
  }
  return out;
}

json rephrasings(std::string_view question_json, std::size_t n, Rng& rng, bool& ok) {
  json base = json::parse(question_json.begin(), question_json.end(), nullptr, false);
  ParsedReply parsed;
  if (!base.is_discarded()) {
    json wrapped = json::array({base});
    if (!wrapped[0].contains("statement")) wrapped[0]["statement"] = "";
    parsed = parse_generator_reply(wrapped.dump(), 1);
  }
  if (base.is_discarded() || !parsed.ok()) {
    ok = false;
    return json::array();
  }
  const RawQuestion& q = parsed.items[0];
  const std::string correct = q.options[static_cast<std::size_t>(q.answer - 'A')];
  std::vector<std::string> others;
  for (int i = 0; i < 4; ++i) {
    if (i != q.answer - 'A') others.push_back(q.options[static_cast<std::size_t>(i)]);
  }
  static constexpr const char* kLeads[] = {"Put differently: ", "In other words, ",
                                           "Rephrased: ", "Consider this: "};
  json out = json::array();
  for (std::size_t v = 0; v < n; ++v) {
    std::array<std::string, 4> opts;
    const char answer = place_options(rng, correct, others, opts);
    out.push_back(json{{"question", std::string(kLeads[v % 4]) + q.question},
                       {"options", option_array(opts)},
                       {"statement", q.statement},
                       {"answer", std::string(1, answer)}});
  }
  ok = true;
  return out;
}

}  // namespace

TemplateGenerator::TemplateGenerator(std::uint64_t seed, std::string tag)
    : seed_(seed), tag_(std::move(tag)) {}

std::string TemplateGenerator::fingerprint() const {
  return "template-generator/seed=" + std::to_string(seed_);
}

ChatReply TemplateGenerator::complete(const ChatRequest& req) {
  ChatReply r;
  const std::uint64_t h = fnv1a64(req.prompt);
  Rng rng(splitmix64(seed_ ^ h));
  if (malformed_rate_ > 0.0) {
    Rng fault(splitmix64(h ^ splitmix64(seed_ + 0x51ed + static_cast<std::uint64_t>(req.attempt))));
    if (fault.uniform01() < malformed_rate_) {
      r.ok = true;
      r.text = R"([{"question": "truncated", "options": ["A: x"]}])";
      r.usage = Usage::estimate(req.prompt.size(), r.text.size());
      return r;
    }
  }
  const std::size_t n = requested_count(req.prompt);
  const std::string title = section(req.prompt, "## Title\n");
  const std::string context = section(req.prompt, "## Context (Only you can see this context)\n");
  json reply;
  if (req.prompt.find("\n## Question\n") != std::string::npos) {
    bool ok = false;
    reply = rephrasings(section(req.prompt, "## Question\n"), n, rng, ok);
    if (!ok) {
      r.error = "template generator could not read the question";
      r.usage = Usage{0, 0, 1, false};
      return r;
    }
  } else {
    reply = cloze_questions(title, context, n, rng);
  }
  r.ok = true;
  r.text = reply.dump(2);
  r.usage = Usage::estimate(req.prompt.size(), r.text.size());
  return r;
}

ScriptedChatModel::ScriptedChatModel(std::string tag, Fn fallback)
    : tag_(std::move(tag)), fallback_(std::move(fallback)) {}

void ScriptedChatModel::push(ChatReply r) {
  std::lock_guard lk(mu_);
  queue_.push_back(std::move(r));
}

void ScriptedChatModel::push_text(std::string text) {
  ChatReply r;
  r.ok = true;
  r.usage = Usage{10, static_cast<std::int64_t>(text.size() / 4), 1, false};
  r.text = std::move(text);
  push(std::move(r));
}

ChatReply ScriptedChatModel::complete(const ChatRequest& req) {
  std::unique_lock lk(mu_);
  ++calls_;
  if (!queue_.empty()) {
    ChatReply r = std::move(queue_.front());
    queue_.pop_front();
    return r;
  }
  lk.unlock();
  if (fallback_) return fallback_(req);
  ChatReply r;
  r.error = "script exhausted";
  r.usage = Usage{0, 0, 1, false};
  return r;
}

std::size_t ScriptedChatModel::calls() const {
  std::lock_guard lk(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------

json to_json(const Transcript& t) {
  return json{{"para_id", t.para_id},       {"kind", t.kind},
              {"base_index", t.base_index}, {"attempt", t.attempt},
              {"prompt", t.prompt},         {"reply", t.reply},
              {"accepted", t.accepted},     {"error", t.error},
              {"prompt_tokens", t.usage.prompt_tokens},
              {"completion_tokens", t.usage.completion_tokens},
              {"estimated", t.usage.estimated}};
}

Transcript transcript_from_json(const json& j) {
  Transcript t;
  t.para_id = j.at("para_id").get<std::string>();
  t.kind = j.at("kind").get<std::string>();
  t.base_index = j.at("base_index").get<int>();
  t.attempt = j.at("attempt").get<int>();
  t.prompt = j.at("prompt").get<std::string>();
  t.reply = j.at("reply").get<std::string>();
  t.accepted = j.at("accepted").get<bool>();
  t.error = j.at("error").get<std::string>();
  t.usage.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  t.usage.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  t.usage.estimated = j.at("estimated").get<bool>();
  return t;
}

std::string base_question_json(const QaItem& q) {
  return json{{"question", q.question},
              {"options", option_array(q.options)},
              {"answer", std::string(1, q.answer)}}
      .dump();
}

namespace {

/// Runs one prompt with retries; returns the accepted items or nullopt.
std::optional<std::vector<RawQuestion>> exchange(const std::string& prompt, std::size_t expected,
                                                 const std::string& kind, int base_index,
                                                 const ParagraphInput& para, ChatModel& gen,
                                                 const QaConfig& cfg, QaSet& log) {
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    ChatReply reply = gen.complete(ChatRequest{prompt, cfg.temperature, cfg.top_p, attempt});
    Transcript t{para.para_id, kind, base_index, attempt, prompt, reply.text, false, {}, reply.usage};
    Usage charged = reply.usage;
    if (!reply.ok) charged = Usage{0, 0, 1, false};
    log.charges.push_back(GenerationCharge{gen.model_tag(), charged});
    if (!reply.ok) {
      t.error = reply.error.empty() ? "transport failure" : reply.error;
      t.usage = charged;
      log.transcripts.push_back(std::move(t));
      continue;
    }
    ParsedReply parsed = parse_generator_reply(reply.text, expected);
    t.accepted = parsed.ok();
    t.error = parsed.error;
    log.transcripts.push_back(std::move(t));
    if (parsed.ok()) return std::move(parsed.items);
  }
  return std::nullopt;
}

QaItem make_item(const std::string& para_id, int base, int variant, RawQuestion raw) {
  QaItem q;
  q.qa_id = QaItem::make_id(para_id, base, variant);
  q.para_id = para_id;
  q.base_index = base;
  q.variant_index = variant;
  q.question = std::move(raw.question);
  q.options = std::move(raw.options);
  q.answer = raw.answer;
  q.statement = std::move(raw.statement);
  return q;
}

std::string generation_prompt(const ParagraphInput& para, std::size_t n) {
  return render_prompt(prompt_template(PromptKind::qa_generation),
                       {{"num_of_qa", std::to_string(n)},
                        {"title", para.title},
                        {"context", para.context}});
}

std::string rephrase_prompt(const ParagraphInput& para, const QaItem& base, std::size_t n) {
  return render_prompt(prompt_template(PromptKind::rephrase),
                       {{"num_of_qa", std::to_string(n)},
                        {"title", para.title},
                        {"context", para.context},
                        {"question", base_question_json(base)}});
}

}  // namespace

GenerationOutcome generate_base_questions(const ParagraphInput& para, std::size_t n_base,
                                          ChatModel& gen, const QaConfig& cfg, QaSet& log) {
  if (n_base == 0) throw std::invalid_argument("n_base must be >= 1");
  GenerationOutcome out;
  auto items = exchange(generation_prompt(para, n_base), n_base, "generate", -1, para, gen, cfg,
                        log);
  if (!items) return out;
  for (std::size_t b = 0; b < items->size(); ++b) {
    out.items.push_back(make_item(para.para_id, static_cast<int>(b), 0, std::move((*items)[b])));
  }
  out.ok = true;
  return out;
}

GenerationOutcome rephrase_question(const ParagraphInput& para, const QaItem& base,
                                    std::size_t n_variants, ChatModel& gen, const QaConfig& cfg,
                                    QaSet& log) {
  GenerationOutcome out;
  if (n_variants == 0) {
    out.ok = true;
    return out;
  }
  auto items = exchange(rephrase_prompt(para, base, n_variants), n_variants, "rephrase",
                        base.base_index, para, gen, cfg, log);
  if (!items) return out;
  for (std::size_t v = 0; v < items->size(); ++v) {
    out.items.push_back(
        make_item(para.para_id, base.base_index, static_cast<int>(v + 1), std::move((*items)[v])));
  }
  out.ok = true;
  return out;
}

namespace {

bool above_floor(std::size_t produced, const QaConfig& cfg) {
  return static_cast<double>(produced) > cfg.floor * static_cast<double>(cfg.target_total());
}

}  // namespace

QaSet build_qa_set(const ParagraphInput& para, ChatModel& gen, const QaConfig& cfg) {
  QaSet set;
  set.para_id = para.para_id;
  set.target_total = cfg.target_total();
  auto bases = generate_base_questions(para, cfg.n_base, gen, cfg, set);
  if (!bases.ok) {
    set.failed = true;
    for (std::size_t b = 0; b < cfg.n_base; ++b) set.failed_bases.push_back(static_cast<int>(b));
    return set;
  }
  for (auto& base : bases.items) {
    auto variants = rephrase_question(para, base, cfg.n_variants, gen, cfg, set);
    if (!variants.ok) {
      set.failed_bases.push_back(base.base_index);
      continue;
    }
    set.items.push_back(base);
    for (auto& v : variants.items) set.items.push_back(std::move(v));
  }
  if (!above_floor(set.items.size(), cfg)) {
    set.failed = true;
    set.items.clear();
  }
  return set;
}

std::vector<QaItem> reconstruct_from_transcripts(const std::vector<Transcript>& transcripts,
                                                 const QaConfig& cfg) {
  std::map<std::string, std::vector<const Transcript*>> by_para;
  std::vector<std::string> order;
  for (const auto& t : transcripts) {
    if (!t.accepted) continue;
    auto [it, fresh] = by_para.try_emplace(t.para_id);
    if (fresh) order.push_back(t.para_id);
    it->second.push_back(&t);
  }
  std::vector<QaItem> out;
  for (const auto& pid : order) {
    std::vector<QaItem> bases;
    std::map<int, std::vector<QaItem>> variants;
    for (const Transcript* t : by_para[pid]) {
      if (t->kind == "generate") {
        auto parsed = parse_generator_reply(t->reply, cfg.n_base);
        for (std::size_t b = 0; b < parsed.items.size(); ++b) {
          bases.push_back(make_item(pid, static_cast<int>(b), 0, parsed.items[b]));
        }
      } else {
        auto parsed = parse_generator_reply(t->reply, cfg.n_variants);
        auto& vs = variants[t->base_index];
        for (std::size_t v = 0; v < parsed.items.size(); ++v) {
          vs.push_back(make_item(pid, t->base_index, static_cast<int>(v + 1), parsed.items[v]));
        }
      }
    }
    std::vector<QaItem> items;
    for (auto& b : bases) {
      auto it = variants.find(b.base_index);
      if (cfg.n_variants > 0 && it == variants.end()) continue;
      items.push_back(b);
      if (it != variants.end()) {
        for (auto& v : it->second) items.push_back(v);
      }
    }
    if (above_floor(items.size(), cfg)) {
      for (auto& q : items) out.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace sea
