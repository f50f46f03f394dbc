#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "council/expert.hpp"

namespace council {

enum class Role { system, user, assistant };
std::string to_string(Role role);

struct ChatMessage {
  Role role;
  std::string content;
};

struct ChatRequest {
  std::string backend_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_tokens = 256;
  std::chrono::milliseconds timeout{30000};

  // Non-empty, first message is the system message, temperature >= 0.
  void validate() const;
};

struct ChatReply {
  std::string text;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

// Transport to one chat-completion service. Transient failures (network,
// timeout, 5xx, 429) throw ProviderError; auth and configuration problems
// throw ConfigError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatReply send(const ChatRequest& request) = 0;
};

struct BackendConfig {
  std::string backend_id;
  std::string endpoint;        // e.g. http://localhost:8000
  std::string model;
  std::string credential_env;  // name of the env var holding the API key
  std::size_t request_cap = 4;

  static BackendConfig from_json(const nlohmann::json& j);
};

struct RetryPolicy {
  std::size_t max_retries = 1;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
};

struct CompletionResult {
  std::string text;
  std::size_t retries = 0;
};

struct BackendUsage {
  std::size_t requests = 0;
  std::size_t failures = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

// Routes requests to named backends with a per-backend concurrency cap and
// one retry with exponential backoff on transient failure.
class LlmGateway {
 public:
  explicit LlmGateway(RetryPolicy policy = {});

  void add_backend(std::string backend_id, std::unique_ptr<ChatBackend> backend,
                   std::size_t request_cap = 4);
  bool has_backend(const std::string& backend_id) const;

  // Throws ExpertUnavailable after the final transient failure, ConfigError
  // immediately for auth/config problems or an unknown backend.
  CompletionResult complete(const ChatRequest& request);

  std::map<std::string, BackendUsage> usage() const;

 private:
  struct Slot {
    std::unique_ptr<ChatBackend> backend;
    std::unique_ptr<std::counting_semaphore<1024>> permits;
    BackendUsage usage;
  };

  RetryPolicy policy_;
  std::map<std::string, Slot> backends_;
  mutable std::mutex usage_mutex_;
};

enum class PromptMode { act, evaluate };

// Swappable wording for every prompt region.
struct PromptTemplates {
  std::string system =
      "You are one member of a council of planners solving a sequential decision task.";
  std::string exemplar_begin = "=== BEGIN PAST SUCCESSFUL TRAJECTORY ===";
  std::string exemplar_note =
      "Reference only: a previous successful trajectory from another episode. Do not continue it.";
  std::string exemplar_end = "=== END PAST SUCCESSFUL TRAJECTORY ===";
  std::string current_header = "=== CURRENT TRAJECTORY ===";
  std::string observation_label = "Current observation: ";
  std::string act_directive = "Propose the next action. Reply with the action only.";
  std::string evaluate_directive =
      "Rate how likely the current trajectory is to lead to success on a scale from 0 to 10. "
      "Reply with a single number.";
  std::string aggregate_directive =
      "Several council members proposed the candidate actions below. Return the best distinct "
      "actions, one per line, best first, with no commentary.";

  static PromptTemplates from_json(const nlohmann::json& j);
};

struct PromptBundle {
  std::string instruction;
  std::string current_region;
  std::optional<std::string> exemplar_region;
  std::string directive;
};

struct PromptInput {
  std::string instruction;
  std::string action_grammar;
  Observation current;
};

PromptBundle compose_prompt(const PromptInput& input, const Trajectory& prefix,
                            const Trajectory* exemplar, PromptMode mode,
                            const PromptTemplates& templates = {});

std::vector<ChatMessage> to_messages(const PromptBundle& bundle, const PromptTemplates& templates = {});

// First number in `text`: a decimal already in [0, 1] is taken as is,
// anything else is read on the 0-10 scale. Clamped to [0, 1]. Throws
// ParseFailure when no number is present.
double parse_score(const std::string& text);

// First non-blank line with common "Action:" style labels and quotes removed.
std::string extract_action(const std::string& text);

struct LlmExpertOptions {
  std::string backend_id;
  double act_temperature = 0.7;
  double evaluate_temperature = 0.0;
  std::size_t max_tokens = 128;
  std::chrono::milliseconds timeout{30000};
  PromptTemplates templates;
};

class LlmExpert final : public Expert {
 public:
  LlmExpert(ExpertDescriptor descriptor, std::shared_ptr<LlmGateway> gateway, LlmExpertOptions options);

  const ExpertDescriptor& descriptor() const override { return descriptor_; }
  std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix,
                                    const Trajectory* exemplar, std::size_t k) const override;
  double score(const ExpertContext& ctx, const Trajectory& prefix) const override;
  std::vector<std::string> aggregate(const ExpertContext& ctx, const Trajectory& prefix,
                                     std::span<const ActionProposal> pooled,
                                     std::size_t k) const override;

 private:
  ChatRequest request(std::vector<ChatMessage> messages, double temperature) const;

  ExpertDescriptor descriptor_;
  std::shared_ptr<LlmGateway> gateway_;
  LlmExpertOptions options_;
};

// OpenAI-compatible /v1/chat/completions over HTTP(S).
std::unique_ptr<ChatBackend> make_http_backend(const BackendConfig& config);

}  // namespace council
