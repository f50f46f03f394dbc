#include "council/llm.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "council/errors.hpp"

namespace council {

std::string to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw InvalidInput("chat request has no messages");
  if (messages.front().role != Role::system) throw InvalidInput("first chat message must be the system message");
  if (!(temperature >= 0.0)) throw InvalidInput("generation temperature must be non-negative");
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
  BackendConfig c;
  c.backend_id = j.at("backend_id").get<std::string>();
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.credential_env = j.value("credential_env", std::string());
  c.request_cap = j.value("request_cap", std::size_t{4});
  if (c.request_cap == 0) throw ConfigError("backends." + c.backend_id + ".request_cap must be positive");
  return c;
}

LlmGateway::LlmGateway(RetryPolicy policy) : policy_(policy) {}

void LlmGateway::add_backend(std::string backend_id, std::unique_ptr<ChatBackend> backend,
                             std::size_t request_cap) {
  if (!backend) throw InvalidInput("null backend");
  if (request_cap == 0 || request_cap > 1024) throw InvalidInput("request cap must be in [1, 1024]");
  Slot slot{std::move(backend),
            std::make_unique<std::counting_semaphore<1024>>(static_cast<std::ptrdiff_t>(request_cap)),
            {}};
  backends_.insert_or_assign(std::move(backend_id), std::move(slot));
}

bool LlmGateway::has_backend(const std::string& backend_id) const {
  return backends_.contains(backend_id);
}

CompletionResult LlmGateway::complete(const ChatRequest& request) {
  request.validate();
  auto it = backends_.find(request.backend_id);
  if (it == backends_.end()) throw ConfigError("unknown backend '" + request.backend_id + "'");
  auto& slot = it->second;

  auto backoff = policy_.initial_backoff;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= policy_.max_retries; ++attempt) {
    if (attempt > 0 && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * policy_.multiplier));
    }
    try {
      slot.permits->acquire();
      ChatReply reply;
      try {
        reply = slot.backend->send(request);
      } catch (...) {
        slot.permits->release();
        throw;
      }
      slot.permits->release();
      std::lock_guard lock(usage_mutex_);
      ++slot.usage.requests;
      slot.usage.prompt_tokens += reply.prompt_tokens;
      slot.usage.completion_tokens += reply.completion_tokens;
      return CompletionResult{std::move(reply.text), attempt};
    } catch (const ProviderError& e) {
      last_error = e.what();
      std::lock_guard lock(usage_mutex_);
      ++slot.usage.requests;
      ++slot.usage.failures;
    }
  }
  throw ExpertUnavailable("backend '" + request.backend_id + "' failed after " +
                          std::to_string(policy_.max_retries + 1) + " attempts: " + last_error);
}

std::map<std::string, BackendUsage> LlmGateway::usage() const {
  std::lock_guard lock(usage_mutex_);
  std::map<std::string, BackendUsage> out;
  for (const auto& [id, slot] : backends_) out.emplace(id, slot.usage);
  return out;
}

PromptTemplates PromptTemplates::from_json(const nlohmann::json& j) {
  PromptTemplates t;
  if (j.is_null()) return t;
  static const std::set<std::string> known = {"system",         "exemplar_begin",    "exemplar_note",
                                              "exemplar_end",   "current_header",    "observation_label",
                                              "act_directive",  "evaluate_directive", "aggregate_directive"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key 'prompts." + key + "'");
    if (!value.is_string()) throw ConfigError("config key 'prompts." + key + "' must be a string");
  }
  t.system = j.value("system", t.system);
  t.exemplar_begin = j.value("exemplar_begin", t.exemplar_begin);
  t.exemplar_note = j.value("exemplar_note", t.exemplar_note);
  t.exemplar_end = j.value("exemplar_end", t.exemplar_end);
  t.current_header = j.value("current_header", t.current_header);
  t.observation_label = j.value("observation_label", t.observation_label);
  t.act_directive = j.value("act_directive", t.act_directive);
  t.evaluate_directive = j.value("evaluate_directive", t.evaluate_directive);
  t.aggregate_directive = j.value("aggregate_directive", t.aggregate_directive);
  return t;
}

PromptBundle compose_prompt(const PromptInput& input, const Trajectory& prefix,
                            const Trajectory* exemplar, PromptMode mode,
                            const PromptTemplates& templates) {
  PromptBundle b;
  b.instruction = input.instruction;
  b.current_region = templates.current_header + "\n" + serialize_trajectory(prefix) +
                     templates.observation_label + escape_line(input.current.text()) + "\n";
  if (exemplar != nullptr) {
    b.exemplar_region = templates.exemplar_begin + "\n" + templates.exemplar_note + "\n" +
                        serialize_trajectory(*exemplar) + templates.exemplar_end + "\n";
  }
  if (mode == PromptMode::act) {
    b.directive = templates.act_directive;
    if (!input.action_grammar.empty()) b.directive += "\nAction format: " + input.action_grammar;
  } else {
    b.directive = templates.evaluate_directive;
  }
  return b;
}

std::vector<ChatMessage> to_messages(const PromptBundle& bundle, const PromptTemplates& templates) {
  std::string user = bundle.instruction + "\n\n";
  if (bundle.exemplar_region) user += *bundle.exemplar_region + "\n";
  user += bundle.current_region + "\n" + bundle.directive;
  return {ChatMessage{Role::system, templates.system}, ChatMessage{Role::user, std::move(user)}};
}

double parse_score(const std::string& text) {
  static const std::regex number(R"([-+]?(?:\d+(?:\.\d*)?|\.\d+))");
  std::smatch m;
  if (!std::regex_search(text, m, number)) throw ParseFailure("no number in evaluation reply");
  const std::string token = m.str();
  const double value = std::stod(token);
  const bool decimal = token.find('.') != std::string::npos;
  if (decimal && value >= 0.0 && value <= 1.0) return value;
  return std::clamp(value / 10.0, 0.0, 1.0);
}

std::string extract_action(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto trim = [](std::string s) {
      const auto ws = " \t\r`\"'*";
      s.erase(0, s.find_first_not_of(ws));
      auto last = s.find_last_not_of(ws);
      s.erase(last == std::string::npos ? 0 : last + 1);
      return s;
    };
    line = trim(line);
    for (const std::string label : {"Action:", "action:", "ACTION:", "Next action:", "ACT:"}) {
      if (line.starts_with(label)) line = trim(line.substr(label.size()));
    }
    if (!is_blank(line)) return line;
  }
  return {};
}

LlmExpert::LlmExpert(ExpertDescriptor descriptor, std::shared_ptr<LlmGateway> gateway,
                     LlmExpertOptions options)
    : descriptor_(std::move(descriptor)), gateway_(std::move(gateway)), options_(std::move(options)) {
  descriptor_.kind = ExpertKind::llm_backed;
  if (!gateway_) throw InvalidInput("LLM expert '" + descriptor_.expert_id + "' has no gateway");
}

ChatRequest LlmExpert::request(std::vector<ChatMessage> messages, double temperature) const {
  return ChatRequest{options_.backend_id, std::move(messages), temperature, options_.max_tokens,
                     options_.timeout};
}

std::vector<std::string> LlmExpert::generate(const ExpertContext& ctx, const Trajectory& prefix,
                                             const Trajectory* exemplar, std::size_t k) const {
  const PromptInput input{ctx.env.instruction(ctx.task), ctx.env.action_grammar(), ctx.current};
  const auto messages = to_messages(compose_prompt(input, prefix, exemplar, PromptMode::act,
                                                   options_.templates),
                                    options_.templates);
  std::vector<std::string> out;
  std::string last_error;
  for (std::size_t i = 0; i < k; ++i) {
    try {
      auto reply = gateway_->complete(request(messages, options_.act_temperature));
      auto action = extract_action(reply.text);
      if (!action.empty()) out.push_back(std::move(action));
    } catch (const ExpertUnavailable& e) {
      last_error = e.what();
    }
  }
  if (out.empty() && !last_error.empty()) throw ExpertUnavailable(last_error);
  return out;
}

double LlmExpert::score(const ExpertContext& ctx, const Trajectory& prefix) const {
  const PromptInput input{ctx.env.instruction(ctx.task), ctx.env.action_grammar(), ctx.current};
  const auto messages = to_messages(
      compose_prompt(input, prefix, nullptr, PromptMode::evaluate, options_.templates), options_.templates);
  return parse_score(gateway_->complete(request(messages, options_.evaluate_temperature)).text);
}

std::vector<std::string> LlmExpert::aggregate(const ExpertContext& ctx, const Trajectory& prefix,
                                              std::span<const ActionProposal> pooled,
                                              std::size_t k) const {
  const PromptInput input{ctx.env.instruction(ctx.task), ctx.env.action_grammar(), ctx.current};
  auto bundle = compose_prompt(input, prefix, nullptr, PromptMode::act, options_.templates);
  bundle.directive = options_.templates.aggregate_directive + "\nReturn at most " + std::to_string(k) +
                     " actions.\nCandidates:\n";
  for (const auto& p : pooled) bundle.directive += "- " + p.action.text() + "\n";
  const auto reply =
      gateway_->complete(request(to_messages(bundle, options_.templates), options_.evaluate_temperature));
  std::vector<std::string> out;
  std::istringstream in(reply.text);
  std::string line;
  while (std::getline(in, line) && out.size() < k) {
    if (line.starts_with("- ")) line = line.substr(2);
    auto action = extract_action(line);
    if (!action.empty()) out.push_back(std::move(action));
  }
  if (out.empty()) return Expert::aggregate(ctx, prefix, pooled, k);
  return out;
}

}  // namespace council
