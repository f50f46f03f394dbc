#include <cstdlib>
#include <regex>

#ifdef COUNCIL_HAS_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "council/errors.hpp"
#include "council/llm.hpp"

namespace council {

namespace {

class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url)) {
      throw ConfigError("backends." + config_.backend_id + ".endpoint is not an http(s) URL");
    }
    host_ = m[1].str();
    base_path_ = m[2].matched ? m[2].str() : "";
    if (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
#ifndef COUNCIL_HAS_OPENSSL
    if (host_.starts_with("https://")) {
      throw ConfigError("backends." + config_.backend_id + ": built without TLS support");
    }
#endif
  }

  ChatReply send(const ChatRequest& request) override {
    httplib::Client client(host_);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (!config_.credential_env.empty()) {
      const char* key = std::getenv(config_.credential_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ConfigError("credential variable " + config_.credential_env + " is not set");
      }
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    nlohmann::json body{{"model", config_.model},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_tokens},
                        {"messages", nlohmann::json::array()}};
    for (const auto& m : request.messages) {
      body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }

    auto res = client.Post(base_path_ + "/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw ProviderError("transport error: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403) {
      throw ConfigError("backend " + config_.backend_id + " rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
      throw ProviderError("HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
      throw ConfigError("backend " + config_.backend_id + " returned HTTP " + std::to_string(res->status));
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      ChatReply reply;
      reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage")) {
        reply.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
        reply.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
      }
      return reply;
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(std::string("malformed completion body: ") + e.what());
    }
  }

 private:
  BackendConfig config_;
  std::string host_;
  std::string base_path_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_http_backend(const BackendConfig& config) {
  return std::make_unique<HttpChatBackend>(config);
}

}  // namespace council
