#include "council/synthetic.hpp"

#include <algorithm>

#include "council/errors.hpp"
#include "council/random.hpp"

namespace council {

namespace {

const std::vector<std::string>& greek() {
  static const std::vector<std::string> names{"alpha", "beta",  "gamma", "delta", "epsilon", "zeta",
                                              "eta",   "theta", "iota",  "kappa", "lambda",  "mu"};
  return names;
}

std::string token_name(const std::string& family, std::size_t index) {
  std::string idx = std::to_string(index);
  if (idx.size() < 2) idx.insert(0, "0");
  return family + "-" + idx;
}

}  // namespace

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& params) {
  SyntheticConfig c;
  if (params.is_null()) return c;
  c.families = params.value("families", c.families);
  c.vocabulary = params.value("vocabulary", c.vocabulary);
  c.depth = params.value("depth", c.depth);
  c.attempts = params.value("attempts", c.attempts);
  c.validate();
  return c;
}

nlohmann::json SyntheticConfig::to_json() const {
  return {{"families", families}, {"vocabulary", vocabulary}, {"depth", depth}, {"attempts", attempts}};
}

void SyntheticConfig::validate() const {
  if (families == 0) throw InvalidInput("synthetic.families must be positive");
  if (vocabulary < 2) throw InvalidInput("synthetic.vocabulary must be at least 2");
  if (depth == 0) throw InvalidInput("synthetic.depth must be positive");
  if (attempts == 0) throw InvalidInput("synthetic.attempts must be positive");
}

SyntheticEnvironment::SyntheticEnvironment(SyntheticConfig config) : config_(config) {
  config_.validate();
  for (std::size_t i = 0; i < config_.families; ++i) {
    family_names_.push_back(i < greek().size() ? greek()[i] : "family" + std::to_string(i));
  }
}

std::vector<std::string> SyntheticEnvironment::vocabulary(const std::string& family) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < config_.vocabulary; ++i) out.push_back(token_name(family, i));
  return out;
}

std::string SyntheticEnvironment::family(const TaskSpec& task) const {
  if (!task.payload.is_object() || !task.payload.contains("family")) {
    throw InvalidInput("synthetic payload needs a 'family'");
  }
  return task.payload.at("family").get<std::string>();
}

void SyntheticEnvironment::validate(const TaskSpec& task) const {
  const auto fam = family(task);
  if (std::find(family_names_.begin(), family_names_.end(), fam) == family_names_.end()) {
    throw InvalidInput("unknown synthetic family '" + fam + "'");
  }
  if (!task.payload.contains("instance") || !task.payload.at("instance").is_number_unsigned()) {
    throw InvalidInput("synthetic payload needs a non-negative integer 'instance'");
  }
}

std::vector<std::string> SyntheticEnvironment::hidden_sequence(const TaskSpec& task) const {
  validate(task);
  const auto fam = family(task);
  const auto instance = task.payload.at("instance").get<std::uint64_t>();
  Rng rng(combine_seed(hash_text(fam), instance));
  std::vector<std::string> hidden;
  for (std::size_t i = 0; i < config_.depth; ++i) {
    hidden.push_back(token_name(fam, uniform_index(rng, config_.vocabulary)));
  }
  return hidden;
}

std::string SyntheticEnvironment::instruction(const TaskSpec& task) const {
  const auto fam = family(task);
  std::string vocab;
  for (const auto& t : vocabulary(fam)) vocab += " " + t;
  return "Recover the hidden " + fam + " sequence of " + std::to_string(config_.depth) +
         " tokens, one token per action. Tokens:" + vocab + ".";
}

std::string SyntheticEnvironment::action_grammar() const {
  return "A single token such as " + token_name(family_names_.front(), 0) + ", nothing else.";
}

bool SyntheticEnvironment::is_token(const std::string& text) const {
  auto dash = text.rfind('-');
  if (dash == std::string::npos) return false;
  const auto fam = text.substr(0, dash);
  if (std::find(family_names_.begin(), family_names_.end(), fam) == family_names_.end()) return false;
  const auto idx = text.substr(dash + 1);
  if (idx.size() != 2 || !std::all_of(idx.begin(), idx.end(), ::isdigit)) return false;
  return static_cast<std::size_t>(std::stoi(idx)) < config_.vocabulary;
}

StepOutcome SyntheticEnvironment::synth_step(const std::vector<std::string>& hidden,
                                             SyntheticState& state, const Action& action) const {
  if (state.terminal) throw InvalidState("action '" + action.text() + "' after a terminal outcome");
  const auto& guess = action.text();
  const auto pos_text = "position " + std::to_string(state.position + 1) + " of " +
                        std::to_string(config_.depth);
  if (!is_token(guess)) {
    return StepOutcome{Observation("'" + guess + "' is not a token; still at " + pos_text + "."),
                       false, std::nullopt, true};
  }
  if (guess == hidden[state.position]) {
    ++state.position;
    state.wrong_here = 0;
    if (state.position == hidden.size()) {
      state.terminal = true;
      state.reward = 1.0;
      return StepOutcome{Observation(guess + " accepted. Sequence complete."), true, 1.0, false};
    }
    return StepOutcome{Observation(guess + " accepted. Now at position " +
                                   std::to_string(state.position + 1) + " of " +
                                   std::to_string(config_.depth) + "."),
                       false, std::nullopt, false};
  }
  ++state.wrong_here;
  if (state.wrong_here >= config_.attempts) {
    state.terminal = true;
    state.reward = 0.0;
    return StepOutcome{Observation(guess + " rejected at " + pos_text + ". No attempts left."), true,
                       0.0, false};
  }
  return StepOutcome{Observation(guess + " rejected at " + pos_text + "; " +
                                 std::to_string(config_.attempts - state.wrong_here) +
                                 " attempt(s) left."),
                     false, std::nullopt, false};
}

ReplayResult SyntheticEnvironment::replay(const TaskSpec& task, std::span<const Action> actions) const {
  const auto hidden = hidden_sequence(task);
  ReplayResult out{Observation(instruction(task)), {}, {}, false, std::nullopt};
  SyntheticState state;
  for (const auto& a : actions) out.outcomes.push_back(synth_step(hidden, state, a));
  out.terminal = state.terminal;
  if (state.terminal) out.reward = state.reward;
  out.state = "position=" + std::to_string(state.position) + " wrong=" + std::to_string(state.wrong_here);
  return out;
}

SyntheticState SyntheticEnvironment::state_after(const TaskSpec& task,
                                                 std::span<const Action> history) const {
  const auto hidden = hidden_sequence(task);
  SyntheticState state;
  for (const auto& a : history) synth_step(hidden, state, a);
  return state;
}

std::vector<Action> SyntheticEnvironment::oracle_actions(const TaskSpec& task,
                                                         std::span<const Action> history) const {
  const auto state = state_after(task, history);
  if (state.terminal) return {};
  return {Action(hidden_sequence(task)[state.position])};
}

std::vector<Action> SyntheticEnvironment::candidate_actions(const TaskSpec& task,
                                                            std::span<const Action> history) const {
  if (state_after(task, history).terminal) return {};
  std::vector<Action> out;
  for (const auto& t : vocabulary(family(task))) out.emplace_back(t);
  return out;
}

double SyntheticEnvironment::progress(const TaskSpec& task, std::span<const Action> history) const {
  const auto state = state_after(task, history);
  if (state.terminal) return state.reward;
  return static_cast<double>(state.position) / static_cast<double>(config_.depth);
}

TaskSpec make_synthetic_task(std::string task_id, std::string family, std::uint64_t instance) {
  return TaskSpec{std::move(task_id), "synthetic", {{"family", std::move(family)}, {"instance", instance}}};
}

std::vector<TaskSpec> make_synthetic_tasks(const SyntheticConfig& config, std::size_t count,
                                           std::uint64_t seed, const std::string& id_prefix) {
  SyntheticEnvironment env(config);
  Rng rng(mix_seed(seed));
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& fam = env.family_names()[uniform_index(rng, config.families)];
    tasks.push_back(make_synthetic_task(id_prefix + std::to_string(i), fam, rng() >> 16));
  }
  return tasks;
}

}  // namespace council
