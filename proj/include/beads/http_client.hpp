#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "beads/autotag.hpp"
#include "beads/error.hpp"
#include "beads/text.hpp"

namespace beads {

/// Endpoint settings, normally read from a JSON config file:
///
///   { "base_url": "https://api.example.com", "path": "/v1/chat/completions",
///     "model": "...", "auth_token_env": "BEADS_API_TOKEN",
///     "timeout_seconds": 60, "api_style": "chat" }
///
/// `api_style` is "chat" (OpenAI-compatible messages/choices) or "plain"
/// ({model, prompt} in, {text} out). The token itself never lives in the
/// file, only the name of the environment variable holding it.
struct EndpointConfig {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_token_env = "BEADS_API_TOKEN";
  int timeout_seconds = 60;
  std::string api_style = "chat";
  int max_retries = 3;
  std::size_t max_concurrent = 4;

  static EndpointConfig from_json(const nlohmann::json& j) {
    try {
      EndpointConfig c;
      c.base_url = j.at("base_url").get<std::string>();
      c.path = j.value("path", c.path);
      c.model = j.at("model").get<std::string>();
      c.auth_token_env = j.value("auth_token_env", c.auth_token_env);
      c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
      c.api_style = j.value("api_style", c.api_style);
      c.max_retries = j.value("max_retries", c.max_retries);
      c.max_concurrent = j.value("max_concurrent", c.max_concurrent);
      if (c.api_style != "chat" && c.api_style != "plain")
        throw Error(ErrorKind::MalformedConfig, "api_style must be 'chat' or 'plain'");
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedConfig, std::string("endpoint config: ") + e.what());
    }
  }

  static EndpointConfig load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::MalformedConfig, path.string() + ": " + e.what());
    }
  }
};

class HttpTaggingClient : public TaggingClient {
 public:
  explicit HttpTaggingClient(EndpointConfig config) : config_(std::move(config)) {
    if (const char* tok = std::getenv(config_.auth_token_env.c_str())) token_ = tok;
  }

  std::string model_name() const override { return config_.model; }

  std::string complete(const TagRequest& request) override {
    httplib::Client cli(config_.base_url);
    cli.set_connection_timeout(config_.timeout_seconds, 0);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    cli.set_write_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    nlohmann::json body;
    if (config_.api_style == "chat")
      body = {{"model", config_.model},
              {"temperature", 0},
              {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})}};
    else
      body = {{"model", config_.model}, {"prompt", request.prompt}};

    auto res = cli.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw TransientError("request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw TransientError("endpoint answered HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw Error(ErrorKind::InvalidResponse, "endpoint answered HTTP " + std::to_string(res->status));
    try {
      auto j = nlohmann::json::parse(res->body);
      if (config_.api_style == "chat") return j.at("choices").at(0).at("message").at("content").get<std::string>();
      return j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidResponse, std::string("unexpected response body: ") + e.what());
    }
  }

 private:
  EndpointConfig config_;
  std::string token_;
};

}  // namespace beads
