#pragma once

#include <optional>
#include <string>
#include <vector>

#include "council/environment.hpp"

namespace council {

inline constexpr double kGame24Target = 24.0;
inline constexpr double kGame24Tolerance = 1e-6;
inline constexpr double kGame24DivisionGuard = 1e-9;

// Renders a value the way actions and observations print it: integers without
// a decimal point, everything else with up to six significant decimals.
std::string format_number(double value);

// One "a op b = c" move on a multiset of numbers.
struct Game24Move {
  double lhs = 0.0;
  char op = '+';
  double rhs = 0.0;
  double result = 0.0;
  std::string text() const;
};

// Parses "a op b = c". Accepts + - * / and the symbols x, ×, ÷, −.
std::optional<Game24Move> parse_game24_action(const std::string& text);

// Applies one action to `numbers`. Returns the outcome and leaves `numbers`
// updated; invalid actions leave it untouched.
StepOutcome game24_step(std::vector<double>& numbers, const Action& action);

struct Game24Solution {
  bool solvable = false;
  std::string expression;          // e.g. "((10*10)-4)/4"
  std::vector<Action> witness;     // replayable moves
};

// Exhaustive search: repeatedly combine any two numbers with any operator.
// Works for any count >= 1; game24_oracle requires exactly four.
Game24Solution solve_game24(const std::vector<double>& numbers);
Game24Solution game24_oracle(const std::vector<double>& numbers);

// Independent check: every operand permutation x every operator triple x the
// five binary-tree shapes. Only reports solvability.
bool game24_solvable_by_expression_trees(const std::vector<double>& numbers);

class Game24Environment final : public Environment {
 public:
  std::string name() const override { return "game24"; }
  void validate(const TaskSpec& task) const override;
  std::string instruction(const TaskSpec& task) const override;
  std::string action_grammar() const override;
  ReplayResult replay(const TaskSpec& task, std::span<const Action> actions) const override;

  std::vector<Action> oracle_actions(const TaskSpec& task,
                                     std::span<const Action> history) const override;
  std::vector<Action> candidate_actions(const TaskSpec& task,
                                        std::span<const Action> history) const override;
  double progress(const TaskSpec& task, std::span<const Action> history) const override;

  static std::vector<double> numbers_of(const TaskSpec& task);
  static std::string render(const std::vector<double>& numbers);
};

TaskSpec make_game24_task(std::string task_id, const std::vector<int>& numbers);

// `count` distinct solvable four-number tasks over 1..13, chosen by `seed`.
std::vector<TaskSpec> game24_solvable_tasks(std::size_t count, std::uint64_t seed);

}  // namespace council
