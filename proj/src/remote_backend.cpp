#include <cmath>
#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "aspo/agents.hpp"
#include "json_util.hpp"

namespace aspo {

using nlohmann::json;

namespace {

std::string instructions(AgentRole role) {
  std::string text =
      "You are the " + std::string(to_string(role)) +
      " agent of a security pattern selection pipeline. Reply with a single JSON document "
      "and nothing else. Only use pattern ids that appear in the request. The reply must "
      "validate against this schema: ";
  return text + response_schema(role).dump();
}

// Strips a Markdown code fence if the model wrapped its answer in one.
std::string_view unfence(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text.starts_with("```")) {
    auto nl = text.find('\n');
    if (nl == std::string_view::npos) return text;
    text.remove_prefix(nl + 1);
    if (auto end = text.rfind("```"); end != std::string_view::npos) text = text.substr(0, end);
  }
  return trim(text);
}

}  // namespace

RemoteConfig remote_config_from_json(const json& j) {
  detail::reject_unknown_keys<ConfigError>(j, {"endpoint", "model", "token_env", "timeout_s"},
                                           "backend.remote");
  RemoteConfig c;
  if (j.contains("endpoint")) c.endpoint = detail::as_string<ConfigError>(j["endpoint"], "endpoint");
  if (j.contains("model")) c.model = detail::as_string<ConfigError>(j["model"], "model");
  if (j.contains("token_env")) c.token_env = detail::as_string<ConfigError>(j["token_env"], "token_env");
  if (j.contains("timeout_s")) {
    c.timeout_s = detail::as_number<ConfigError>(j["timeout_s"], "timeout_s");
    if (!(c.timeout_s > 0.0)) throw ConfigError("backend.remote.timeout_s must be > 0");
  }
  return c;
}

json to_json(const RemoteConfig& c) {
  return json{{"endpoint", c.endpoint},
              {"model", c.model},
              {"token_env", c.token_env},
              {"timeout_s", c.timeout_s}};
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw ConfigError("remote endpoint must be an http(s) URL: " + config_.endpoint);
  }
  origin_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (origin_.starts_with("https://")) {
    throw ConfigError("this build has no TLS support; use an http:// endpoint");
  }
#endif
}

json decode_remote_response(std::string_view body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("backend reply is not JSON: ") + e.what());
  }
  if (doc.is_object() && doc.contains("choices")) {
    const auto& choices = doc["choices"];
    if (!choices.is_array() || choices.empty()) throw SchemaError("backend reply has no choices");
    const json* content = nullptr;
    if (choices[0].contains("message")) content = &choices[0]["message"]["content"];
    else if (choices[0].contains("text")) content = &choices[0]["text"];
    if (!content || !content->is_string()) throw SchemaError("backend reply has no text content");
    try {
      return json::parse(unfence(content->get_ref<const std::string&>()));
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("model output is not JSON: ") + e.what());
    }
  }
  return doc;
}

json RemoteBackend::invoke(AgentRole role, const json& request, const CallInfo& call) {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(std::floor(config_.timeout_s));
  const auto usecs = static_cast<time_t>((config_.timeout_s - std::floor(config_.timeout_s)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  if (!config_.token_env.empty()) {
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
      client.set_bearer_token_auth(token);
    }
  }

  json body{{"model", config_.model},
            {"messages",
             json::array({{{"role", "system"}, {"content", instructions(role)}},
                          {{"role", "user"}, {"content", request.dump()}}})},
            {"response_format", {{"type", "json_object"}}},
            {"temperature", 0},
            {"metadata", {{"agent", std::string(to_string(role))},
                          {"node", call.node},
                          {"epoch", call.epoch},
                          {"attempt", call.attempt}}}};

  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw BackendTimeout("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendTimeout("backend answered HTTP " + std::to_string(res->status));
  }
  return decode_remote_response(res->body);
}

std::shared_ptr<AgentBackend> make_backend(std::string_view selector, const Catalog& catalog,
                                           const RemoteConfig& remote) {
  if (selector == "mock") return std::make_shared<MockBackend>(catalog);
  if (selector == "remote") return std::make_shared<RemoteBackend>(remote);
  if (selector.starts_with("fault:")) {
    return std::make_shared<FaultBackend>(std::make_shared<MockBackend>(catalog),
                                          parse_fault_spec(selector.substr(6)), catalog);
  }
  throw ConfigError("unknown backend selector: " + std::string(selector) +
                    " (expected mock, remote or fault:<profile>)");
}

}  // namespace aspo
