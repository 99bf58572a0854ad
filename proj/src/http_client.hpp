#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "json.hpp"

namespace cst {

struct HttpEndpointConfig {
  std::string url;  // http://host[:port]/path or https://...
  double timeout_seconds = 30.0;
  int retries = 2;  // attempts after the first one
  double backoff_seconds = 0.5;  // doubled after every failed attempt
  std::string bearer_token;  // empty -> no Authorization header
};

// Splits an endpoint URL into scheme://host:port and path.
struct ParsedUrl {
  std::string origin;
  std::string path;
};
ParsedUrl parse_url(const std::string& url);

// JSON-over-HTTP POST with bounded retries. Connection failures, timeouts
// and 5xx/429 responses are retried; other non-2xx responses and bodies
// that are not JSON fail immediately. Throws Error(transport).
class JsonHttpClient {
 public:
  using Sleeper = std::function<void(std::chrono::duration<double>)>;

  explicit JsonHttpClient(HttpEndpointConfig cfg);

  nlohmann::json post(const nlohmann::json& body) const;

  const HttpEndpointConfig& config() const noexcept { return cfg_; }

  // Tests replace the real sleep to keep retry tests fast.
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 private:
  HttpEndpointConfig cfg_;
  ParsedUrl target_;
  Sleeper sleeper_;
};

// Value of an environment variable, empty if unset.
std::string env_or_empty(const char* name);

}  // namespace cst
