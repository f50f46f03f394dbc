#pragma once

#include <mutex>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

namespace council {

// Receives one JSON object per search event.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void emit(nlohmann::json event) = 0;
};

class JsonlTraceWriter final : public TraceSink {
 public:
  explicit JsonlTraceWriter(std::ostream& out) : out_(out) {}
  void emit(nlohmann::json event) override {
    std::lock_guard lock(mutex_);
    out_ << event.dump() << '\n';
  }

 private:
  std::ostream& out_;
  std::mutex mutex_;
};

class BufferedTrace final : public TraceSink {
 public:
  void emit(nlohmann::json event) override { events_.push_back(std::move(event)); }
  const std::vector<nlohmann::json>& events() const noexcept { return events_; }
  void replay_into(TraceSink& sink) const {
    for (const auto& e : events_) sink.emit(e);
  }

 private:
  std::vector<nlohmann::json> events_;
};

}  // namespace council
