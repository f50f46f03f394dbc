#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "council/trajectory.hpp"

namespace council {

struct TaskSpec {
  std::string task_id;
  std::string environment;
  nlohmann::json payload;
};

struct StepOutcome {
  Observation observation;
  bool terminal = false;
  std::optional<double> reward;  // present iff terminal
  bool invalid = false;          // action rejected; state unchanged
};

// Discount factor of the agent-environment formulation. The planner does not
// use it; discounted_return is provided for environments with per-step rewards.
struct DiscountConfig {
  double gamma = 0.99;
  void validate() const;
};

double discounted_return(std::span<const double> rewards, const DiscountConfig& config);

struct ReplayResult {
  Observation initial;
  std::vector<StepOutcome> outcomes;
  std::string state;  // environment-specific rendering of the final state
  bool terminal = false;
  std::optional<double> reward;  // present iff terminal

  const Observation& current() const {
    return outcomes.empty() ? initial : outcomes.back().observation;
  }
};

// Replay-based environment: state is never held between calls; it is rebuilt
// from the task and the action history. Implementations are pure functions
// and safe for concurrent use.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  // Throws InvalidInput when the payload does not describe a valid task.
  virtual void validate(const TaskSpec& task) const = 0;
  virtual std::string instruction(const TaskSpec& task) const = 0;
  virtual std::string action_grammar() const = 0;
  virtual double success_threshold() const { return 1.0; }

  // Applies `actions` in order from the task's initial state. An action after
  // a terminal outcome throws InvalidState.
  virtual ReplayResult replay(const TaskSpec& task, std::span<const Action> actions) const = 0;

  // Hooks used by scripted experts.
  virtual std::string family(const TaskSpec& /*task*/) const { return name(); }
  // Actions known to keep the task solvable, best first.
  virtual std::vector<Action> oracle_actions(const TaskSpec& task,
                                             std::span<const Action> history) const = 0;
  // Every valid action from the current state.
  virtual std::vector<Action> candidate_actions(const TaskSpec& task,
                                                std::span<const Action> history) const = 0;
  // Fraction of task constraints satisfied by the current state, in [0, 1].
  virtual double progress(const TaskSpec& task, std::span<const Action> history) const = 0;
};

ReplayResult replay(const Environment& env, const TaskSpec& task, std::span<const Action> actions);

std::unique_ptr<Environment> make_environment(const std::string& name,
                                              const nlohmann::json& params = nlohmann::json::object());

// Task file: one JSON object per line {task_id, environment, payload}.
std::vector<TaskSpec> read_tasks(std::istream& in);
std::vector<TaskSpec> read_task_file(const std::string& path);
void write_tasks(std::ostream& out, std::span<const TaskSpec> tasks);
nlohmann::json task_to_json(const TaskSpec& task);

}  // namespace council
