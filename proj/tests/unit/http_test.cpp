#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sea/embedding.hpp"
#include "sea/qa.hpp"
#include "sea/testee.hpp"

using namespace sea;
using nlohmann::json;

namespace {

/// OpenAI-style mock on a random local port.
struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mu;
  std::vector<json> bodies;
  std::vector<std::string> auth;
  std::atomic<int> fail_next{0};
  bool with_usage = true;

  MockServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      if (fail_next > 0) {
        --fail_next;
        res.status = 500;
        res.set_content("overloaded", "text/plain");
        return;
      }
      json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", "The answer is \\box{C}"}}}}}}};
      if (with_usage) out["usage"] = {{"prompt_tokens", 17}, {"completion_tokens", 5}};
      res.set_content(out.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      record(req);
      const json body = json::parse(req.body);
      json data = json::array();
      const auto& input = body.at("input");
      // Reverse order with explicit indices.
      for (std::size_t i = input.size(); i-- > 0;) {
        std::vector<float> v(4, 0.0f);
        v[static_cast<std::size_t>(input[i].get<std::string>()[0] - 'a') % 4] = 2.0f;
        data.push_back({{"index", i}, {"embedding", v}});
      }
      res.set_content(json{{"data", data}, {"usage", {{"prompt_tokens", 3}}}}.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockServer() {
    server.stop();
    thread.join();
  }
  void record(const httplib::Request& req) {
    std::lock_guard lk(mu);
    bodies.push_back(json::parse(req.body));
    auth.push_back(req.get_header_value("Authorization"));
  }
  EndpointConfig endpoint(const std::string& model) const {
    EndpointConfig e;
    e.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    e.model = model;
    e.api_key_env = "SEA_TEST_MOCK_KEY";
    e.timeout_s = 5;
    return e;
  }
};

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("chat completion wire format") {
    ::setenv("SEA_TEST_MOCK_KEY", "sekrit", 1);
    MockServer m;
    RemoteChatModel chat(m.endpoint("mock-chat"));
    const auto r = chat.complete(ChatRequest{"hello", 0.1, 0.9, 0});
    REQUIRE(r.ok);
    CHECK(r.text == "The answer is \\box{C}");
    CHECK(r.usage.prompt_tokens == 17);
    CHECK(r.usage.completion_tokens == 5);
    CHECK_FALSE(r.usage.estimated);
    REQUIRE(m.bodies.size() == 1);
    const auto& b = m.bodies[0];
    CHECK(b["model"] == "mock-chat");
    CHECK(b["messages"][0]["role"] == "user");
    CHECK(b["messages"][0]["content"] == "hello");
    CHECK(b["temperature"] == 0.1);
    CHECK(b["top_p"] == 0.9);
    CHECK(m.auth[0] == "Bearer sekrit");
  }

  TEST_CASE("missing usage is estimated; HTTP errors are failures") {
    MockServer m;
    m.with_usage = false;
    RemoteChatModel chat(m.endpoint("mock-chat"));
    const std::string prompt(400, 'x');
    auto r = chat.complete(ChatRequest{prompt, 0.1, 0.9, 0});
    REQUIRE(r.ok);
    CHECK(r.usage.estimated);
    CHECK(r.usage.prompt_tokens == 100);
    m.fail_next = 1;
    r = chat.complete(ChatRequest{"x", 0.1, 0.9, 0});
    CHECK_FALSE(r.ok);
    CHECK(r.error.find("500") != std::string::npos);
  }

  TEST_CASE("remote testee retries a failed call") {
    MockServer m;
    m.fail_next = 1;
    RemoteChatModel chat(m.endpoint("mock-chat"));
    RemoteTestee t(chat, {}, 2);
    QaItem q;
    q.qa_id = "q";
    q.para_id = "p";
    q.question = "Q?";
    q.options = {"a", "b", "c", "d"};
    q.answer = 'C';
    const auto r = t.ask(q, TesteeContext{"topic", nullptr});
    CHECK(r.correct);
    CHECK(r.attempts.size() == 2);
    CHECK(m.bodies.size() == 2);
  }

  TEST_CASE("embedding wire format and index order") {
    MockServer m;
    RemoteEmbedder e(m.endpoint("mock-embed"), 4);
    EmbeddingProviderConfig cfg;
    cfg.kind = EmbeddingKind::remote;
    cfg.dimension = 4;
    cfg.batch_size = 2;
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto v = embed_texts(texts, e, cfg);
    REQUIRE(v.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(v[i].values[i % 4] == doctest::Approx(1.0));
    REQUIRE(m.bodies.size() == 2);
    std::set<std::string> inputs;
    for (const auto& b : m.bodies) {
      CHECK(b["model"] == "mock-embed");
      inputs.insert(b["input"].dump());
    }
    CHECK(inputs == std::set<std::string>{R"(["a","b"])", R"(["c"])"});
  }

  TEST_CASE("embedding dimension mismatch is an error") {
    MockServer m;
    RemoteEmbedder e(m.endpoint("mock-embed"), 8);
    EmbeddingProviderConfig cfg;
    cfg.kind = EmbeddingKind::remote;
    cfg.dimension = 8;
    const std::vector<std::string> texts{"a"};
    CHECK_THROWS_AS(embed_texts(texts, e, cfg), EmbeddingError);
  }
}
