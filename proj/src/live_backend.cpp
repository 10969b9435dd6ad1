#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <regex>

#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"
#include "walkeval/gateway.hpp"
#include "walkeval/hashing.hpp"

namespace walkeval {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch match;
  if (!std::regex_match(url, match, pattern)) {
    throw ValidationError(fmt::format("backend endpoint '{}' is not an http(s) URL", url));
  }
  return {match[1].str(), match[2].matched ? match[2].str() : "/"};
}

bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

LiveBackend::LiveBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  split_endpoint(config_.endpoint);
  const char* key = std::getenv(config_.credentials_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ValidationError(fmt::format("environment variable '{}' is not set", config_.credentials_env));
  }
  api_key_ = key;
}

LiveBackend::~LiveBackend() = default;

std::string LiveBackend::name() const { return "live:" + config_.model_name; }

std::string LiveBackend::request_body(const BackendRequest& request) {
  const std::string data_url =
      fmt::format("data:{};base64,{}", request.image_media_type, base64_encode(request.image_bytes));
  json body = {
      {"model", request.model},
      {"temperature", request.temperature},
      {"messages",
       json::array({{{"role", "user"},
                     {"content", json::array({{{"type", "text"}, {"text", request.prompt_text}},
                                              {{"type", "image_url"}, {"image_url", {{"url", data_url}}}}})}}})},
  };
  return body.dump();
}

std::string LiveBackend::response_text(std::string_view body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error&) {
    throw TransientFailure("backend returned a body that is not JSON");
  }
  try {
    const auto& content = parsed.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers return content parts.
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  } catch (const json::exception&) {
    throw BackendRejected(200, std::string(body.substr(0, 200)));
  }
}

std::string LiveBackend::complete(const BackendRequest& request) {
  const Endpoint endpoint = split_endpoint(config_.endpoint);
  httplib::Client client(endpoint.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout).count() % 1'000'000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  client.set_bearer_token_auth(api_key_);

  auto result = client.Post(endpoint.path, request_body(request), "application/json");
  if (!result) {
    throw TransientFailure(fmt::format("transport error: {}", httplib::to_string(result.error())));
  }
  if (is_transient_status(result->status)) {
    throw TransientFailure(fmt::format("HTTP {}", result->status));
  }
  if (result->status < 200 || result->status >= 300) {
    throw BackendRejected(result->status, result->body.substr(0, 200));
  }
  return response_text(result->body);
}

}  // namespace walkeval
