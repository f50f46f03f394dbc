#include "council/game24.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <regex>
#include <set>

#include "council/errors.hpp"
#include "council/random.hpp"

namespace council {

namespace {

constexpr double kOperandTolerance = 1e-4;
constexpr double kResultTolerance = 5e-3;

bool near(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

std::optional<double> apply_op(double a, char op, double b) {
  switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    case '/':
      if (std::abs(b) < kGame24DivisionGuard) return std::nullopt;
      return a / b;
    default: return std::nullopt;
  }
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

struct Candidate {
  Game24Move move;
  std::vector<double> next;
};

// All distinct moves from `numbers`, in a fixed enumeration order.
std::vector<Candidate> enumerate_moves(const std::vector<double>& numbers) {
  std::vector<Candidate> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    for (std::size_t j = i + 1; j < numbers.size(); ++j) {
      const double a = numbers[i];
      const double b = numbers[j];
      const std::array<std::tuple<double, char, double>, 6> options{{
          {a, '+', b}, {a, '*', b}, {a, '-', b}, {b, '-', a}, {a, '/', b}, {b, '/', a}}};
      for (const auto& [x, op, y] : options) {
        auto value = apply_op(x, op, y);
        if (!value) continue;
        Game24Move move{x, op, y, *value};
        if (!seen.insert(move.text()).second) continue;
        std::vector<double> next;
        for (std::size_t k = 0; k < numbers.size(); ++k) {
          if (k != i && k != j) next.push_back(numbers[k]);
        }
        next.push_back(*value);
        out.push_back(Candidate{move, std::move(next)});
      }
    }
  }
  return out;
}

bool solve_recursive(std::vector<double> numbers, std::vector<std::string> exprs,
                     std::vector<Action>& moves, std::string& expression) {
  if (numbers.size() == 1) {
    if (std::abs(numbers[0] - kGame24Target) < kGame24Tolerance) {
      expression = exprs[0];
      return true;
    }
    return false;
  }
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    for (std::size_t j = 0; j < numbers.size(); ++j) {
      if (i == j) continue;
      for (char op : {'+', '-', '*', '/'}) {
        // + and * are commutative; visit each unordered pair once.
        if ((op == '+' || op == '*') && j < i) continue;
        auto value = apply_op(numbers[i], op, numbers[j]);
        if (!value) continue;
        std::vector<double> next;
        std::vector<std::string> next_exprs;
        for (std::size_t k = 0; k < numbers.size(); ++k) {
          if (k == i || k == j) continue;
          next.push_back(numbers[k]);
          next_exprs.push_back(exprs[k]);
        }
        next.push_back(*value);
        next_exprs.push_back("(" + exprs[i] + op + exprs[j] + ")");
        moves.push_back(Action(Game24Move{numbers[i], op, numbers[j], *value}.text()));
        if (solve_recursive(std::move(next), std::move(next_exprs), moves, expression)) return true;
        moves.pop_back();
      }
    }
  }
  return false;
}

std::string strip_outer_parens(std::string expr) {
  if (expr.size() < 2 || expr.front() != '(' || expr.back() != ')') return expr;
  int depth = 0;
  for (std::size_t i = 0; i + 1 < expr.size(); ++i) {
    if (expr[i] == '(') ++depth;
    if (expr[i] == ')') --depth;
    if (depth == 0) return expr;  // the first paren closes before the end
  }
  return expr.substr(1, expr.size() - 2);
}

bool hits_target(std::optional<double> v) {
  return v && std::abs(*v - kGame24Target) < kGame24Tolerance;
}

}  // namespace

std::string format_number(double value) {
  const double rounded = std::round(value);
  if (std::abs(value - rounded) < 1e-9 && std::abs(rounded) < 1e15) {
    return std::to_string(static_cast<long long>(rounded));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

std::string Game24Move::text() const {
  return format_number(lhs) + op + format_number(rhs) + "=" + format_number(result);
}

std::optional<Game24Move> parse_game24_action(const std::string& raw) {
  std::string text = replace_all(raw, "\xC3\x97", "*");       // ×
  text = replace_all(text, "\xC3\xB7", "/");                  // ÷
  text = replace_all(text, "\xE2\x88\x92", "-");              // −
  static const std::regex pattern(
      R"(^\s*(-?\d+(?:\.\d+)?)\s*([-+*/xX])\s*(-?\d+(?:\.\d+)?)\s*=\s*(-?\d+(?:\.\d+)?)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) return std::nullopt;
  char op = m[2].str()[0];
  if (op == 'x' || op == 'X') op = '*';
  return Game24Move{std::stod(m[1].str()), op, std::stod(m[3].str()), std::stod(m[4].str())};
}

StepOutcome game24_step(std::vector<double>& numbers, const Action& action) {
  auto reject = [&](const std::string& why) {
    return StepOutcome{Observation("Invalid move '" + action.text() + "': " + why +
                                   ". Remaining numbers: " + Game24Environment::render(numbers)),
                       false, std::nullopt, true};
  };
  if (numbers.size() < 2) return reject("fewer than two numbers remain");
  auto move = parse_game24_action(action.text());
  if (!move) return reject("expected the form 'a op b = c'");

  auto find = [&](double v, std::size_t skip) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < numbers.size(); ++i) {
      if (i == skip || !near(numbers[i], v, kOperandTolerance)) continue;
      if (!best || std::abs(numbers[i] - v) < std::abs(numbers[*best] - v)) best = i;
    }
    return best;
  };
  auto i = find(move->lhs, numbers.size());
  if (!i) return reject(format_number(move->lhs) + " is not available");
  auto j = find(move->rhs, *i);
  if (!j) return reject(format_number(move->rhs) + " is not available");

  auto value = apply_op(numbers[*i], move->op, numbers[*j]);
  if (!value) return reject("division by zero");
  if (!near(move->result, *value, kResultTolerance)) {
    return reject("the result should be " + format_number(*value));
  }

  std::vector<double> next;
  for (std::size_t k = 0; k < numbers.size(); ++k) {
    if (k != *i && k != *j) next.push_back(numbers[k]);
  }
  next.push_back(*value);
  numbers = std::move(next);

  const auto remaining = Game24Environment::render(numbers);
  if (numbers.size() == 1) {
    const bool won = std::abs(numbers[0] - kGame24Target) < kGame24Tolerance;
    return StepOutcome{Observation("Remaining numbers: " + remaining +
                                   (won ? ". Reached 24." : ". Did not reach 24.")),
                       true, won ? 1.0 : 0.0, false};
  }
  return StepOutcome{Observation("Remaining numbers: " + remaining), false, std::nullopt, false};
}

Game24Solution solve_game24(const std::vector<double>& numbers) {
  Game24Solution out;
  if (numbers.empty()) return out;
  std::vector<std::string> exprs;
  for (double n : numbers) exprs.push_back(format_number(n));
  std::string expression;
  if (solve_recursive(numbers, exprs, out.witness, expression)) {
    out.solvable = true;
    out.expression = strip_outer_parens(expression);
  } else {
    out.witness.clear();
  }
  return out;
}

Game24Solution game24_oracle(const std::vector<double>& numbers) {
  if (numbers.size() != 4) throw InvalidInput("the Game of 24 oracle takes exactly four numbers");
  return solve_game24(numbers);
}

bool game24_solvable_by_expression_trees(const std::vector<double>& numbers) {
  if (numbers.size() != 4) throw InvalidInput("expected four numbers");
  std::array<double, 4> p{numbers[0], numbers[1], numbers[2], numbers[3]};
  std::sort(p.begin(), p.end());
  constexpr std::array<char, 4> ops{'+', '-', '*', '/'};
  do {
    for (char o1 : ops) {
      for (char o2 : ops) {
        for (char o3 : ops) {
          auto f = [](std::optional<double> a, char op, std::optional<double> b) -> std::optional<double> {
            if (!a || !b) return std::nullopt;
            return apply_op(*a, op, *b);
          };
          const auto a = std::optional<double>(p[0]), b = std::optional<double>(p[1]),
                     c = std::optional<double>(p[2]), d = std::optional<double>(p[3]);
          if (hits_target(f(f(f(a, o1, b), o2, c), o3, d))) return true;  // ((ab)c)d
          if (hits_target(f(f(a, o1, f(b, o2, c)), o3, d))) return true;  // (a(bc))d
          if (hits_target(f(f(a, o1, b), o2, f(c, o3, d)))) return true;  // (ab)(cd)
          if (hits_target(f(a, o1, f(f(b, o2, c), o3, d)))) return true;  // a((bc)d)
          if (hits_target(f(a, o1, f(b, o2, f(c, o3, d))))) return true;  // a(b(cd))
        }
      }
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return false;
}

std::vector<double> Game24Environment::numbers_of(const TaskSpec& task) {
  const auto& payload = task.payload;
  const auto& arr = payload.is_object() ? payload.at("numbers") : payload;
  if (!arr.is_array() || arr.empty()) throw InvalidInput("game24 payload must be a list of numbers");
  std::vector<double> numbers;
  for (const auto& v : arr) {
    if (!v.is_number()) throw InvalidInput("game24 payload must be a list of numbers");
    numbers.push_back(v.get<double>());
  }
  return numbers;
}

std::string Game24Environment::render(const std::vector<double>& numbers) {
  std::string out;
  for (double n : numbers) {
    if (!out.empty()) out += ' ';
    out += format_number(n);
  }
  return out;
}

void Game24Environment::validate(const TaskSpec& task) const {
  auto numbers = numbers_of(task);
  if (numbers.size() > 6) throw InvalidInput("game24 tasks take at most six numbers");
}

std::string Game24Environment::instruction(const TaskSpec& task) const {
  return "Use the numbers " + render(numbers_of(task)) +
         " and the operations + - * / to obtain 24. Each step combines two of the remaining "
         "numbers into one.";
}

std::string Game24Environment::action_grammar() const {
  return "One move per line in the form 'a op b = c', where a and b are remaining numbers, "
         "op is one of + - * /, and c is the result. Example: 10*10=100";
}

ReplayResult Game24Environment::replay(const TaskSpec& task, std::span<const Action> actions) const {
  auto numbers = numbers_of(task);
  ReplayResult out{Observation(instruction(task) + " Remaining numbers: " + render(numbers)), {}, {}, false, std::nullopt};
  if (numbers.size() == 1) {
    out.terminal = true;
    out.reward = std::abs(numbers[0] - kGame24Target) < kGame24Tolerance ? 1.0 : 0.0;
  }
  for (const auto& action : actions) {
    if (out.terminal) throw InvalidState("action '" + action.text() + "' after a terminal outcome");
    auto outcome = game24_step(numbers, action);
    out.terminal = outcome.terminal;
    out.reward = outcome.reward;
    out.outcomes.push_back(std::move(outcome));
  }
  out.state = render(numbers);
  return out;
}

std::vector<Action> Game24Environment::oracle_actions(const TaskSpec& task,
                                                      std::span<const Action> history) const {
  const auto state = replay(task, history);
  if (state.terminal) return {};
  auto numbers = numbers_of(task);
  for (const auto& a : history) game24_step(numbers, a);
  std::vector<Action> out;
  for (const auto& c : enumerate_moves(numbers)) {
    if (solve_game24(c.next).solvable) out.emplace_back(c.move.text());
  }
  return out;
}

std::vector<Action> Game24Environment::candidate_actions(const TaskSpec& task,
                                                         std::span<const Action> history) const {
  const auto state = replay(task, history);
  if (state.terminal) return {};
  auto numbers = numbers_of(task);
  for (const auto& a : history) game24_step(numbers, a);
  std::vector<Action> out;
  for (const auto& c : enumerate_moves(numbers)) out.emplace_back(c.move.text());
  return out;
}

double Game24Environment::progress(const TaskSpec& task, std::span<const Action> history) const {
  const auto state = replay(task, history);
  if (state.terminal) return *state.reward;
  auto numbers = numbers_of(task);
  for (const auto& a : history) game24_step(numbers, a);
  return solve_game24(numbers).solvable ? 1.0 : 0.0;
}

TaskSpec make_game24_task(std::string task_id, const std::vector<int>& numbers) {
  return TaskSpec{std::move(task_id), "game24", nlohmann::json(numbers)};
}

std::vector<TaskSpec> game24_solvable_tasks(std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<int>> pool;
  for (int a = 1; a <= 13; ++a)
    for (int b = a; b <= 13; ++b)
      for (int c = b; c <= 13; ++c)
        for (int d = c; d <= 13; ++d) {
          std::vector<int> v{a, b, c, d};
          if (solve_game24({double(a), double(b), double(c), double(d)}).solvable) pool.push_back(v);
        }
  Rng rng(mix_seed(seed));
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[uniform_index(rng, i)]);
  if (count > pool.size()) throw InvalidInput("not enough solvable Game of 24 tasks");
  std::vector<TaskSpec> tasks;
  for (std::size_t i = 0; i < count; ++i) {
    tasks.push_back(make_game24_task("g24-" + std::to_string(i), pool[i]));
  }
  return tasks;
}

}  // namespace council
