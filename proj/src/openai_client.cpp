#include "sea/openai_client.hpp"

#include <cstdlib>
#include <thread>

#include "sea/common.hpp"

#include <httplib.h>

namespace sea {

TokenBucket::TokenBucket(double rate_per_s)
    : rate_(rate_per_s),
      capacity_(std::max(1.0, rate_per_s)),
      tokens_(capacity_),
      last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  for (;;) {
    double wait_s = 0.0;
    {
      std::lock_guard lk(mu_);
      const auto now = Clock::now();
      tokens_ = std::min(capacity_,
                         tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait_s = (1.0 - tokens_) / rate_;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
  }
}

OpenAiClient::OpenAiClient(EndpointConfig cfg) : cfg_(std::move(cfg)), bucket_(cfg_.rate_per_s) {
  const auto& url = cfg_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#if !defined(SEA_HAVE_OPENSSL)
  if (url.rfind("https://", 0) == 0) throw ConfigError("built without TLS support: " + url);
#endif
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

OpenAiClient::~OpenAiClient() = default;

HttpResponse OpenAiClient::post_json(const std::string& path, const nlohmann::json& body) {
  {
    std::unique_lock lk(slot_mu_);
    slot_cv_.wait(lk, [&] { return in_flight_ < std::max<std::size_t>(1, cfg_.max_in_flight); });
    ++in_flight_;
  }
  struct Release {
    OpenAiClient* self;
    ~Release() {
      {
        std::lock_guard lk(self->slot_mu_);
        --self->in_flight_;
      }
      self->slot_cv_.notify_one();
    }
  } release{this};

  bucket_.acquire();
  HttpResponse out;
  const auto start = std::chrono::steady_clock::now();
  httplib::Client client(scheme_host_);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_prefix_ + path, headers, body.dump(), "application/json");
  out.latency_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    out.error = "transport error: " + httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  if (res->status < 200 || res->status >= 300) {
    out.error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    return out;
  }
  out.body = nlohmann::json::parse(res->body, nullptr, false);
  if (out.body.is_discarded()) {
    out.error = "reply is not JSON";
    return out;
  }
  out.ok = true;
  return out;
}

}  // namespace sea
