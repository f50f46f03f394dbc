#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "council/environment.hpp"

namespace council {

// Offline specialization testbed. Each task hides a sequence of `depth`
// tokens drawn from its family's vocabulary; an action is one token guess.
// A correct guess advances, `attempts` wrong guesses at one position end the
// task with reward 0, recovering the whole sequence ends it with reward 1.
struct SyntheticConfig {
  std::size_t families = 3;
  std::size_t vocabulary = 16;
  std::size_t depth = 3;
  std::size_t attempts = 2;

  static SyntheticConfig from_json(const nlohmann::json& params);
  nlohmann::json to_json() const;
  void validate() const;
};

struct SyntheticState {
  std::size_t position = 0;
  std::size_t wrong_here = 0;
  bool terminal = false;
  double reward = 0.0;
};

class SyntheticEnvironment final : public Environment {
 public:
  explicit SyntheticEnvironment(SyntheticConfig config = {});

  const SyntheticConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& family_names() const noexcept { return family_names_; }
  std::vector<std::string> vocabulary(const std::string& family) const;
  std::vector<std::string> hidden_sequence(const TaskSpec& task) const;

  // Advances `state` by one guess.
  StepOutcome synth_step(const std::vector<std::string>& hidden, SyntheticState& state,
                         const Action& action) const;

  std::string name() const override { return "synthetic"; }
  void validate(const TaskSpec& task) const override;
  std::string instruction(const TaskSpec& task) const override;
  std::string action_grammar() const override;
  ReplayResult replay(const TaskSpec& task, std::span<const Action> actions) const override;

  std::string family(const TaskSpec& task) const override;
  std::vector<Action> oracle_actions(const TaskSpec& task,
                                     std::span<const Action> history) const override;
  std::vector<Action> candidate_actions(const TaskSpec& task,
                                        std::span<const Action> history) const override;
  double progress(const TaskSpec& task, std::span<const Action> history) const override;

 private:
  SyntheticState state_after(const TaskSpec& task, std::span<const Action> history) const;
  bool is_token(const std::string& text) const;

  SyntheticConfig config_;
  std::vector<std::string> family_names_;
};

TaskSpec make_synthetic_task(std::string task_id, std::string family, std::uint64_t instance);

// `count` tasks with families and instances drawn from `seed`.
std::vector<TaskSpec> make_synthetic_tasks(const SyntheticConfig& config, std::size_t count,
                                           std::uint64_t seed, const std::string& id_prefix = "syn-");

}  // namespace council
