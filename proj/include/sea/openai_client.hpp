#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <json.hpp>
#include <string>

namespace sea {

struct EndpointConfig {
  /// e.g. "https://api.openai.com/v1" or "http://127.0.0.1:8080"
  std::string base_url;
  std::string model;
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_in_flight = 8;
  /// Requests per second; 0 disables rate limiting.
  double rate_per_s = 0.0;
};

/// Token bucket with capacity max(1, rate) refilled continuously.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_s);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mu_;
};

struct HttpResponse {
  bool ok = false;
  int status = 0;
  nlohmann::json body;
  std::string error;
  double latency_s = 0.0;
};

/// Minimal client for OpenAI-compatible JSON endpoints. One attempt per
/// call; callers own retry and cost policy. Thread-safe.
class OpenAiClient {
 public:
  explicit OpenAiClient(EndpointConfig cfg);
  ~OpenAiClient();

  HttpResponse post_json(const std::string& path, const nlohmann::json& body);
  const EndpointConfig& config() const { return cfg_; }

 private:
  EndpointConfig cfg_;
  std::string scheme_host_;
  std::string path_prefix_;
  std::string api_key_;
  TokenBucket bucket_;
  std::mutex slot_mu_;
  std::condition_variable slot_cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace sea
