#include "council/planner.hpp"

#include <cmath>
#include <limits>

#include "council/errors.hpp"

namespace council {

using nlohmann::json;

namespace {

SearchNode make_node(NodeId id, std::optional<NodeId> parent, Trajectory prefix, Observation observation) {
  return SearchNode{.node_id = id,
                    .parent = parent,
                    .prefix = std::move(prefix),
                    .observation = std::move(observation),
                    .incoming_action = std::nullopt,
                    .acting_expert = std::nullopt,
                    .visits = 0,
                    .q = 0.0,
                    .terminal = false,
                    .terminal_reward = std::nullopt,
                    .children = {},
                    .fused_value = std::nullopt};
}

}  // namespace

SearchTree::SearchTree(Observation root_observation, Trajectory root_prefix) {
  nodes_.push_back(make_node(0, std::nullopt, std::move(root_prefix), std::move(root_observation)));
}

NodeId SearchTree::add_child(NodeId parent, Action action, Observation observation, ExpertId acting_expert) {
  auto& p = nodes_.at(parent);
  if (p.terminal) throw InvalidState("cannot add a child to a terminal node");
  const NodeId id = nodes_.size();
  auto child = make_node(id, parent, p.prefix.extended(Step{p.observation, action}), std::move(observation));
  child.incoming_action = std::move(action);
  child.acting_expert = std::move(acting_expert);
  nodes_.at(parent).children.push_back(id);
  nodes_.push_back(std::move(child));
  return id;
}

std::vector<NodeId> SearchTree::path_to(NodeId id) const {
  std::vector<NodeId> path;
  for (std::optional<NodeId> cur = id; cur; cur = nodes_.at(*cur).parent) path.push_back(*cur);
  return {path.rbegin(), path.rend()};
}

void SearchBudget::validate() const {
  if (iterations == 0) throw InvalidInput("budget.K must be positive");
  if (expansion_width == 0) throw InvalidInput("budget.expansion_width must be positive");
  if (max_depth == 0) throw InvalidInput("budget.max_depth must be positive");
  if (!(exploration >= 0.0) || !std::isfinite(exploration)) {
    throw InvalidInput("budget.c must be a non-negative number");
  }
}

double uct(const SearchNode& node, std::size_t parent_visits, double c) {
  if (node.visits == 0) return std::numeric_limits<double>::infinity();
  const double n_p = static_cast<double>(std::max<std::size_t>(parent_visits, 1));
  return node.q + c * std::sqrt(std::log(n_p) / static_cast<double>(node.visits));
}

std::vector<NodeId> select(const SearchTree& tree, double c) {
  std::vector<NodeId> path{tree.root()};
  for (;;) {
    const auto& cur = tree.node(path.back());
    if (cur.terminal || cur.children.empty()) return path;
    NodeId best = cur.children.front();
    double best_u = -std::numeric_limits<double>::infinity();
    double best_f = -std::numeric_limits<double>::infinity();
    for (NodeId id : cur.children) {
      const auto& child = tree.node(id);
      const double u = uct(child, cur.visits, c);
      const double f = child.fused_value.value_or(-std::numeric_limits<double>::infinity());
      if (u > best_u || (u == best_u && f > best_f)) {
        best = id;
        best_u = u;
        best_f = f;
      }
    }
    path.push_back(best);
  }
}

void backpropagate(SearchTree& tree, std::span<const NodeId> path, double reward) {
  for (NodeId id : path) {
    auto& n = tree.node(id);
    n.visits += 1;
    const auto count = static_cast<double>(n.visits);
    n.q = ((count - 1.0) * n.q + reward) / count;
  }
}

namespace {

json path_json(std::span<const NodeId> path) { return json(std::vector<NodeId>(path.begin(), path.end())); }

json decision_json(const RoutingDecision& d) {
  json dist = json::object();
  for (std::size_t i = 0; i < d.distribution.experts.size(); ++i) {
    dist[d.distribution.experts[i]] = d.distribution.probability[i];
  }
  return {{"strategy", to_string(d.strategy)},
          {"chosen", d.chosen},
          {"exemplar_segment", d.exemplar_segment_id ? json(*d.exemplar_segment_id) : json(nullptr)},
          {"distribution", dist}};
}

std::vector<Action> with_action(const Trajectory& prefix, const Action& action) {
  auto actions = prefix.actions();
  actions.push_back(action);
  return actions;
}

class Search {
 public:
  Search(const Environment& env, const TaskSpec& task, Council& council, const PlannerConfig& config,
         TraceSink* trace)
      : env_(env),
        task_(task),
        council_(council),
        config_(config),
        trace_(trace),
        episode_(config.episode_id.empty() ? task.task_id : config.episode_id),
        rng_(combine_seed(config.seed, hash_text(episode_))) {}

  PlanResult run();

 private:
  struct Proposed {
    RoutingDecision decision;
    std::vector<ActionProposal> proposals;
  };

  std::optional<Proposed> propose(const SearchNode& leaf, json& event);
  double rollout(NodeId from, json& event);
  void finish(PlanResult& result);
  void emit(json event) {
    if (trace_) {
      event["episode"] = episode_;
      trace_->emit(std::move(event));
    }
  }

  const Environment& env_;
  const TaskSpec& task_;
  Council& council_;
  const PlannerConfig& config_;
  TraceSink* trace_;
  EpisodeId episode_;
  Rng rng_;
  double threshold_ = 1.0;
  std::size_t route_counter_ = 0;
  std::vector<RetrievalRecord> retrievals_;
  std::optional<SearchTree> tree_;
  std::vector<NodeId> candidates_;  // frontier and terminal nodes
  std::optional<NodeId> solved_;
  // A successful env-only rollout, as (trajectory, acting experts).
  std::optional<std::pair<Trajectory, std::vector<ExpertId>>> solved_rollout_;
  std::vector<std::string> diagnostics_;
};

std::optional<Search::Proposed> Search::propose(const SearchNode& leaf, json& event) {
  const ExpertContext ctx{env_, task_, leaf.observation, config_.seed};
  RouteRequest req;
  req.prefix = leaf.prefix;
  req.query = query_text(leaf.prefix, tree_->node(0).observation);
  req.episode_id = episode_;
  req.step_index = route_counter_++;
  req.strategy = config_.strategy;
  req.temperature = config_.temperature;
  req.aggregator = config_.aggregator;
  req.context = &ctx;
  req.width = config_.budget.expansion_width;

  for (int attempt = 0; attempt < 2; ++attempt) {
    std::optional<RoutingDecision> decision;
    try {
      decision = route(council_, req, rng_, retrievals_);
      event["routing"] = decision_json(*decision);
      Proposed out{*decision, {}};
      if (decision->proposals) {
        out.proposals = *decision->proposals;
      } else {
        const auto* exemplar = decision->exemplar ? &*decision->exemplar : nullptr;
        out.proposals = propose_actions(council_.member(decision->chosen), ctx, leaf.prefix, exemplar,
                                        config_.budget.expansion_width);
      }
      return out;
    } catch (const ExpertUnavailable& e) {
      diagnostics_.push_back(std::string("expert unavailable: ") + e.what());
      if (decision) req.excluded.push_back(decision->chosen);
    }
  }
  return std::nullopt;
}

// Terminal-reward-only valuation: the routed experts act one proposal at a
// time until the episode ends or the depth cap is hit.
double rollout_reward(const ReplayResult& r) { return r.reward.value_or(0.0); }

double Search::rollout(NodeId from, json& event) {
  const auto& start = tree_->node(from);
  Trajectory prefix = start.prefix;
  Observation current = start.observation;
  std::vector<ExpertId> experts;
  for (NodeId id : tree_->path_to(from)) {
    if (tree_->node(id).acting_expert) experts.push_back(*tree_->node(id).acting_expert);
  }
  double reward = 0.0;
  while (prefix.depth() < config_.budget.max_depth) {
    const ExpertContext ctx{env_, task_, current, config_.seed};
    RouteRequest req;
    req.prefix = prefix;
    req.query = query_text(prefix, tree_->node(0).observation);
    req.episode_id = episode_;
    req.step_index = route_counter_++;
    req.strategy = config_.strategy;
    req.temperature = config_.temperature;
    req.aggregator = config_.aggregator;
    req.context = &ctx;
    req.width = 1;
    std::vector<ActionProposal> props;
    ExpertId chosen;
    try {
      auto d = route(council_, req, rng_, retrievals_);
      chosen = d.chosen;
      if (d.proposals) {
        props = *d.proposals;
      } else {
        props = propose_actions(council_.member(d.chosen), ctx, prefix,
                                d.exemplar ? &*d.exemplar : nullptr, 1);
      }
    } catch (const ExpertUnavailable& e) {
      diagnostics_.push_back(std::string("rollout expert unavailable: ") + e.what());
      break;
    }
    if (props.empty()) break;
    std::optional<ReplayResult> replayed;
    try {
      replayed = env_.replay(task_, with_action(prefix, props.front().action));
    } catch (const std::exception&) {
      break;
    }
    const auto& r = *replayed;
    if (r.outcomes.back().invalid) break;
    prefix = prefix.extended(Step{current, props.front().action});
    experts.push_back(props.front().proposer);
    current = r.current();
    if (r.terminal) {
      reward = rollout_reward(r);
      if (reward >= threshold_ && !solved_rollout_) solved_rollout_.emplace(prefix, experts);
      break;
    }
  }
  event["rollout"] = {{"from", from}, {"depth", prefix.depth()}, {"reward", reward}};
  return reward;
}

PlanResult Search::run() {
  config_.budget.validate();
  if (council_.size() == 0) throw InvalidInput("council is empty");
  threshold_ = config_.success_threshold.value_or(env_.success_threshold());

  PlanResult result;
  result.task_id = task_.task_id;
  result.episode_id = episode_;

  const auto initial = env_.replay(task_, {});
  tree_.emplace(initial.initial);
  if (initial.terminal) {
    auto& root = tree_->node(0);
    root.terminal = true;
    root.terminal_reward = initial.reward.value_or(0.0);
    result.reward = *root.terminal_reward;
    result.success = result.reward >= threshold_;
    finish(result);
    return result;
  }

  const auto& budget = config_.budget;
  for (std::size_t it = 0; it < budget.iterations && !solved_ && !solved_rollout_; ++it) {
    result.iterations_used = it + 1;
    json event{{"event", "iteration"}, {"iteration", it + 1}};
    auto path = select(*tree_, budget.exploration);
    event["path"] = path_json(path);
    json backups = json::array();
    const NodeId leaf_id = path.back();

    if (tree_->node(leaf_id).terminal) {
      const double r = tree_->node(leaf_id).terminal_reward.value_or(0.0);
      backpropagate(*tree_, path, r);
      backups.push_back({{"path", path_json(path)}, {"reward", r}});
      event["backprop"] = backups;
      emit(std::move(event));
      continue;
    }

    auto proposed = propose(tree_->node(leaf_id), event);
    if (!proposed) {
      event["aborted"] = "no council member available";
      emit(std::move(event));
      continue;
    }

    // Apply candidates; invalid ones are discarded.
    std::vector<NodeId> children;
    json child_events = json::array();
    for (const auto& p : proposed->proposals) {
      const auto& leaf = tree_->node(leaf_id);
      std::optional<ReplayResult> replayed;
      try {
        replayed = env_.replay(task_, with_action(leaf.prefix, p.action));
      } catch (const std::exception& e) {
        diagnostics_.push_back(std::string("replay failed: ") + e.what());
        continue;
      }
      const auto& r = *replayed;
      if (r.outcomes.back().invalid) {
        child_events.push_back({{"action", p.action.text()}, {"invalid", true}});
        continue;
      }
      const NodeId id = tree_->add_child(leaf_id, p.action, r.current(), p.proposer);
      auto& child = tree_->node(id);
      if (r.terminal) {
        child.terminal = true;
        child.terminal_reward = r.reward.value_or(0.0);
      } else if (child.depth() >= budget.max_depth) {
        child.terminal = true;
        child.terminal_reward = 0.0;
      }
      result.max_depth_reached = std::max(result.max_depth_reached, child.depth());
      children.push_back(id);
    }
    result.nodes_expanded += children.size();

    if (children.empty()) {
      backpropagate(*tree_, path, 0.0);
      backups.push_back({{"path", path_json(path)}, {"reward", 0.0}});
      event["batch"] = {{"parent", leaf_id}, {"children", child_events}};
      event["backprop"] = backups;
      emit(std::move(event));
      continue;
    }

    // Dual-signal values for the sibling set.
    SiblingBatch batch;
    const auto mode = config_.value_mode;
    for (NodeId id : children) {
      const auto& child = tree_->node(id);
      ValueSignals s;
      if (mode == ValueMode::full || mode == ValueMode::llm_only) {
        const ExpertContext ctx{env_, task_, child.observation, config_.seed};
        auto v = llm_value(council_, ctx, child.prefix, rng_);
        s.v_llm = v.score;
        s.evaluator_expert = v.evaluator;
      }
      // The memory lookup also feeds the retrieval ledger, so it runs in
      // llm-only mode too; only the fusion differs between value modes.
      if (mode != ValueMode::env_only) {
        auto& profile = council_.profile(proposed->decision.chosen);
        auto v = sms_value(profile, child.prefix, council_.embedder(), episode_);
        s.v_sms = v.score;
        s.matched_segment = v.segment;
        if (v.segment) retrievals_.push_back({proposed->decision.chosen, *v.segment, v.usage_count});
      }
      batch.children.push_back(std::move(s));
    }
    fuse_batch(batch, mode);
    for (std::size_t i = 0; i < children.size(); ++i) {
      auto& child = tree_->node(children[i]);
      child.fused_value = batch.q[i];
      child.q = batch.q[i];
      const auto& s = batch.children[i];
      child_events.push_back({{"node", children[i]},
                              {"action", child.incoming_action->text()},
                              {"expert", *child.acting_expert},
                              {"v_llm", s.v_llm},
                              {"v_sms", s.v_sms},
                              {"llm_normalized", batch.llm_normalized[i]},
                              {"sms_normalized", batch.sms_normalized[i]},
                              {"q", batch.q[i]},
                              {"evaluator", s.evaluator_expert},
                              {"segment", s.matched_segment ? json(*s.matched_segment) : json(nullptr)},
                              {"terminal", child.terminal},
                              {"reward", child.terminal_reward ? json(*child.terminal_reward) : json(nullptr)}});
    }
    event["batch"] = {{"parent", leaf_id},
                      {"children", child_events},
                      {"sigma_llm", batch.sigma_llm},
                      {"sigma_sms", batch.sigma_sms},
                      {"alpha", batch.alpha}};

    // Terminal children are resolved immediately; the frontier is the best
    // remaining child.
    std::optional<NodeId> frontier;
    for (NodeId id : children) {
      const auto& child = tree_->node(id);
      if (child.terminal) {
        auto child_path = path;
        child_path.push_back(id);
        backpropagate(*tree_, child_path, *child.terminal_reward);
        backups.push_back({{"path", path_json(child_path)}, {"reward", *child.terminal_reward}});
        candidates_.push_back(id);
        if (*child.terminal_reward >= threshold_ && !solved_) solved_ = id;
      } else if (!frontier || *child.fused_value > *tree_->node(*frontier).fused_value) {
        frontier = id;
      }
    }
    if (frontier && !solved_) {
      auto frontier_path = path;
      frontier_path.push_back(*frontier);
      const double r = mode == ValueMode::env_only ? rollout(*frontier, event)
                                                   : *tree_->node(*frontier).fused_value;
      backpropagate(*tree_, frontier_path, r);
      backups.push_back({{"path", path_json(frontier_path)}, {"reward", r}});
      candidates_.push_back(*frontier);
    }
    event["backprop"] = backups;
    emit(std::move(event));
  }

  if (solved_) {
    const auto& node = tree_->node(*solved_);
    result.success = true;
    result.best_trajectory = node.prefix;
    result.reward = *node.terminal_reward;
  } else if (solved_rollout_) {
    result.success = true;
    result.best_trajectory = solved_rollout_->first;
    result.per_step_expert = solved_rollout_->second;
    result.reward = 1.0;
    result.max_depth_reached = std::max(result.max_depth_reached, result.best_trajectory.depth());
  } else if (!candidates_.empty()) {
    NodeId best = candidates_.front();
    for (NodeId id : candidates_) {
      if (tree_->node(id).q > tree_->node(best).q) best = id;
    }
    const auto& node = tree_->node(best);
    result.best_trajectory = node.prefix;
    result.reward = node.terminal ? node.terminal_reward.value_or(0.0) : 0.0;
  }
  if (!solved_rollout_) {
    if (solved_ || !candidates_.empty()) {
      NodeId end = solved_ ? *solved_ : tree_->root();
      if (!solved_) {
        for (NodeId id : candidates_) {
          if (tree_->node(id).prefix == result.best_trajectory) {
            end = id;
            break;
          }
        }
      }
      for (NodeId id : tree_->path_to(end)) {
        if (tree_->node(id).acting_expert) result.per_step_expert.push_back(*tree_->node(id).acting_expert);
      }
    }
  }
  finish(result);
  return result;
}

void Search::finish(PlanResult& result) {
  result.diagnostics = diagnostics_;
  if (config_.update_memory) {
    EpisodeRecord record{episode_,          task_.task_id,          result.best_trajectory,
                         result.reward,     result.success,         result.per_step_expert,
                         retrievals_};
    finalize_episode(council_.profiles(), record, council_.embedder());
  }
  emit({{"event", "result"},
        {"task_id", task_.task_id},
        {"success", result.success},
        {"reward", result.reward},
        {"iterations_used", result.iterations_used},
        {"nodes_expanded", result.nodes_expanded},
        {"max_depth_reached", result.max_depth_reached},
        {"trajectory", serialize_trajectory(result.best_trajectory)}});
}

}  // namespace

PlanResult search(const Environment& env, const TaskSpec& task, Council& council,
                  const PlannerConfig& config, TraceSink* trace) {
  Search s(env, task, council, config, trace);
  return s.run();
}

}  // namespace council
