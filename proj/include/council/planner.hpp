#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "council/environment.hpp"
#include "council/expert.hpp"
#include "council/routing.hpp"
#include "council/trace.hpp"
#include "council/value.hpp"

namespace council {

using NodeId = std::size_t;

struct SearchNode {
  NodeId node_id = 0;
  std::optional<NodeId> parent;
  Trajectory prefix;
  Observation observation;  // reached after the prefix
  std::optional<Action> incoming_action;
  std::optional<ExpertId> acting_expert;
  std::size_t visits = 0;
  double q = 0.0;
  bool terminal = false;
  std::optional<double> terminal_reward;
  std::vector<NodeId> children;
  std::optional<double> fused_value;

  std::size_t depth() const noexcept { return prefix.depth(); }
};

class SearchTree {
 public:
  explicit SearchTree(Observation root_observation, Trajectory root_prefix = {});

  NodeId root() const noexcept { return 0; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const SearchNode& node(NodeId id) const { return nodes_.at(id); }
  SearchNode& node(NodeId id) { return nodes_.at(id); }

  // Appends a child one step deeper than `parent`. Throws InvalidState when
  // the parent is terminal.
  NodeId add_child(NodeId parent, Action action, Observation observation, ExpertId acting_expert);

  // Root-to-node chain of node ids.
  std::vector<NodeId> path_to(NodeId id) const;

 private:
  std::vector<SearchNode> nodes_;
};

inline constexpr double kDefaultExploration = 1.0;

struct SearchBudget {
  std::size_t iterations = 10;  // K
  std::size_t expansion_width = 4;
  std::size_t max_depth = 12;
  double exploration = kDefaultExploration;  // c

  void validate() const;
};

// +infinity for an unvisited node, else Q + c * sqrt(ln(parent_N) / N).
double uct(const SearchNode& node, std::size_t parent_visits, double c);

// Descends by maximal UCT until a terminal or childless node. Ties go to the
// higher fused value, then to the earlier child.
std::vector<NodeId> select(const SearchTree& tree, double c);

// N += 1 and Q <- ((N - 1) Q + r) / N for every node on the path.
void backpropagate(SearchTree& tree, std::span<const NodeId> path, double reward);

struct PlannerConfig {
  SearchBudget budget;
  RoutingStrategy strategy = RoutingStrategy::task_aware;
  double temperature = kDefaultRoutingTemperature;
  std::optional<ExpertId> aggregator;
  ValueMode value_mode = ValueMode::full;
  std::optional<double> success_threshold;  // environment default when unset
  std::uint64_t seed = 0;
  EpisodeId episode_id;  // task id when empty
  bool update_memory = true;
};

struct PlanResult {
  std::string task_id;
  EpisodeId episode_id;
  bool success = false;
  Trajectory best_trajectory;
  double reward = 0.0;
  std::size_t iterations_used = 0;
  std::size_t nodes_expanded = 0;
  std::size_t max_depth_reached = 0;
  std::vector<ExpertId> per_step_expert;
  std::vector<std::string> diagnostics;
};

// Budgeted search for one task. Memory is updated with the outcome unless
// `config.update_memory` is false. Expert and environment failures are
// reported in diagnostics and never thrown; invalid configuration is.
PlanResult search(const Environment& env, const TaskSpec& task, Council& council,
                  const PlannerConfig& config, TraceSink* trace = nullptr);

}  // namespace council
