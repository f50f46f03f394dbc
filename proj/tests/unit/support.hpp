#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "council/embedding.hpp"
#include "council/errors.hpp"
#include "council/llm.hpp"
#include "council/trajectory.hpp"

namespace council::testing {

// Maps exact texts to fixed vectors; anything else embeds to zeros.
class VectorEmbedder final : public Embedder {
 public:
  explicit VectorEmbedder(std::size_t dim) : dim_(dim) {}

  void set(const std::string& text, std::vector<double> values) {
    table_[text] = EmbeddingVector{std::move(values)};
  }

  EmbeddingVector embed(std::string_view text) const override {
    auto it = table_.find(std::string(text));
    if (it != table_.end()) return it->second;
    return EmbeddingVector{std::vector<double>(dim_, 0.0)};
  }
  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "table"; }

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingVector> table_;
};

// Replies from a queue of scripted behaviours; the last one repeats.
class StubBackend final : public ChatBackend {
 public:
  using Behaviour = std::function<ChatReply(const ChatRequest&)>;

  explicit StubBackend(std::vector<Behaviour> script) : script_(std::move(script)) {}

  static Behaviour reply(std::string text) {
    return [text](const ChatRequest&) { return ChatReply{text, 10, 2}; };
  }
  static Behaviour timeout() {
    return [](const ChatRequest&) -> ChatReply { throw ProviderError("timed out"); };
  }
  static Behaviour unauthorized() {
    return [](const ChatRequest&) -> ChatReply { throw ConfigError("401 unauthorized"); };
  }

  ChatReply send(const ChatRequest& request) override {
    std::size_t i;
    {
      std::lock_guard lock(mutex_);
      i = std::min(calls_, script_.size() - 1);
      ++calls_;
      requests_.push_back(request);
    }
    return script_[i](request);
  }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
  }
  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  std::vector<Behaviour> script_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::vector<ChatRequest> requests_;
};

inline Trajectory make_trajectory(const std::vector<std::pair<std::string, std::string>>& steps) {
  std::vector<Step> out;
  for (const auto& [o, a] : steps) out.push_back(Step{Observation(o), Action(a)});
  return Trajectory(std::move(out));
}

}  // namespace council::testing
