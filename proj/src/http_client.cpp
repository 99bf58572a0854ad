#include "http_client.hpp"

#include <cstdlib>
#include <thread>

#include "error.hpp"
#include "httplib.h"

namespace cst {

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "endpoint URL needs a scheme: '" + url + "'");
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::invalid_argument, "unsupported URL scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (out.origin.size() <= scheme_end + 3) {
    throw Error(ErrorCode::invalid_argument, "endpoint URL has no host: '" + url + "'");
  }
  return out;
}

JsonHttpClient::JsonHttpClient(HttpEndpointConfig cfg)
    : cfg_(std::move(cfg)), target_(parse_url(cfg_.url)),
      sleeper_([](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }) {
  if (cfg_.retries < 0) throw Error(ErrorCode::invalid_argument, "retries must be >= 0");
  if (cfg_.timeout_seconds <= 0) throw Error(ErrorCode::invalid_argument, "timeout must be positive");
}

nlohmann::json JsonHttpClient::post(const nlohmann::json& body) const {
  httplib::Client client(target_.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(cfg_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!cfg_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.bearer_token);

  const auto payload = body.dump();
  std::string last_error;
  double backoff = cfg_.backoff_seconds;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    auto res = client.Post(target_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "server returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::transport, cfg_.url + ": HTTP " + std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::transport, cfg_.url + ": response is not JSON");
    }
  }
  throw Error(ErrorCode::transport, cfg_.url + ": " + last_error + " (after " +
                                        std::to_string(cfg_.retries + 1) + " attempts)");
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace cst
