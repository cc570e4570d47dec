#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "selros/errors.hpp"
#include "selros/semantic.hpp"

namespace selros {

namespace detail {

struct EndpointParts {
  std::string host;
  int port = 80;
  std::string path;
};

inline EndpointParts parse_http_endpoint(const std::string& endpoint) {
  const std::string scheme = "http://";
  if (endpoint.rfind(scheme, 0) != 0)
    throw ConfigError("only http:// endpoints are supported, got: " + endpoint);
  std::string rest = endpoint.substr(scheme.size());
  EndpointParts parts;
  std::size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  parts.path = slash == std::string::npos ? "/" : rest.substr(slash);
  std::size_t colon = hostport.find(':');
  if (colon == std::string::npos) {
    parts.host = hostport;
  } else {
    parts.host = hostport.substr(0, colon);
    try {
      parts.port = std::stoi(hostport.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in endpoint: " + endpoint);
    }
  }
  if (parts.host.empty()) throw ConfigError("endpoint has no host: " + endpoint);
  return parts;
}

}  // namespace detail

// Builds the chat-completion request body for one conversation state.
inline nlohmann::json chat_request_body(const LlmConfig& config,
                                        const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const ChatMessage& m : messages)
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  return nlohmann::json{{"model", config.model},
                        {"temperature", config.temperature},
                        {"messages", msgs}};
}

// Chat-completion HTTP client. Everything that goes wrong at the transport
// level (connect failure, non-200 status, unparsable envelope) surfaces as
// LlmUnavailable so the query driver can retry it.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(LlmConfig config) : config_(std::move(config)) {
    config_.validate();
    endpoint_ = detail::parse_http_endpoint(config_.endpoint);
  }

  std::string complete(const Prompt&, const std::vector<ChatMessage>& messages) override {
    httplib::Client client(endpoint_.host, endpoint_.port);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    const std::string body = chat_request_body(config_, messages).dump();
    auto res = client.Post(endpoint_.path, headers, body, "application/json");
    if (!res)
      throw LlmUnavailable("request to " + config_.endpoint +
                           " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw LlmUnavailable("endpoint returned status " + std::to_string(res->status));

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw LlmUnavailable("endpoint returned unparsable JSON");
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
      throw LlmUnavailable("response has no choices");
    const auto& first = doc["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string())
      throw LlmUnavailable("response choice has no message content");
    return first["message"]["content"].get<std::string>();
  }

 private:
  LlmConfig config_;
  detail::EndpointParts endpoint_;
};

inline std::unique_ptr<LlmBackend> make_backend(const LlmConfig& config) {
  config.validate();
  if (config.backend == LlmBackendKind::Http)
    return std::make_unique<HttpBackend>(config);
  return std::make_unique<StubBackend>();
}

}  // namespace selros
