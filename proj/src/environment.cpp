#include "council/environment.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "council/errors.hpp"
#include "council/game24.hpp"
#include "council/synthetic.hpp"

namespace council {

using json = nlohmann::json;

void DiscountConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
}

double discounted_return(std::span<const double> rewards, const DiscountConfig& config) {
  config.validate();
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    total += weight * r;
    weight *= config.gamma;
  }
  return total;
}

ReplayResult replay(const Environment& env, const TaskSpec& task, std::span<const Action> actions) {
  return env.replay(task, actions);
}

std::unique_ptr<Environment> make_environment(const std::string& name, const json& params) {
  if (name == "game24") return std::make_unique<Game24Environment>();
  if (name == "synthetic") return std::make_unique<SyntheticEnvironment>(SyntheticConfig::from_json(params));
  throw InvalidInput("unknown environment '" + name + "'");
}

json task_to_json(const TaskSpec& task) {
  return {{"task_id", task.task_id}, {"environment", task.environment}, {"payload", task.payload}};
}

std::vector<TaskSpec> read_tasks(std::istream& in) {
  std::vector<TaskSpec> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto obj = json::parse(line);
      tasks.push_back(TaskSpec{obj.at("task_id").get<std::string>(),
                               obj.at("environment").get<std::string>(), obj.at("payload")});
    } catch (const std::exception& e) {
      throw ParseFailure("task file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tasks;
}

std::vector<TaskSpec> read_task_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open task file '" + path + "'");
  return read_tasks(in);
}

void write_tasks(std::ostream& out, std::span<const TaskSpec> tasks) {
  for (const auto& t : tasks) out << task_to_json(t).dump() << '\n';
}

}  // namespace council
