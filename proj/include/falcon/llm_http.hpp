#pragma once

// OpenAI-style chat-completion client over cpp-httplib. HTTPS requires
// building with CPPHTTPLIB_OPENSSL_SUPPORT.

#include <cstdlib>

#include <httplib.h>

#include "falcon/extract.hpp"

namespace falcon {

struct HttpChatConfig {
  std::string base_url = "https://api.openai.com";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 1.0;
  int timeout_seconds = 60;
};

class HttpChatClient : public LlmClient {
 public:
  explicit HttpChatClient(HttpChatConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) throw Error("environment variable " + config_.api_key_env + " is not set");
    api_key_ = key;
  }

  std::string complete(const std::string& prompt, const InteractionRecord&) override {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    const Json body{{"model", config_.model},
                    {"temperature", config_.temperature},
                    {"n", 1},
                    {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})}};
    const httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      throw TransportError("server returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) throw Error("chat endpoint returned HTTP " + std::to_string(res->status));
    try {
      const Json reply = Json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception&) {
      return "";
    }
  }

 private:
  HttpChatConfig config_;
  std::string api_key_;
};

}  // namespace falcon
