#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "council/errors.hpp"
#include "council/game24.hpp"
#include "council/planner.hpp"
#include "council/scripted.hpp"
#include "council/synthetic.hpp"
#include "council/trace.hpp"
#include "support.hpp"

using namespace council;

namespace {

// Always guesses a wrong token.
class WrongExpert final : public Expert {
 public:
  const ExpertDescriptor& descriptor() const override { return d_; }
  std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix, const Trajectory*,
                                    std::size_t k) const override {
    const auto history = prefix.actions();
    const auto right = ctx.env.oracle_actions(ctx.task, history);
    std::vector<std::string> out;
    for (const auto& a : ctx.env.candidate_actions(ctx.task, history)) {
      if (out.size() == k) break;
      if (right.empty() || a.text() != right.front().text()) out.push_back(a.text());
    }
    return out;
  }
  double score(const ExpertContext&, const Trajectory&) const override { return 0.5; }

 private:
  ExpertDescriptor d_{"wrong", "wrong", ExpertKind::scripted};
};

class DownExpert final : public Expert {
 public:
  explicit DownExpert(std::string id) : d_{id, id, ExpertKind::llm_backed} {}
  const ExpertDescriptor& descriptor() const override { return d_; }
  std::vector<std::string> generate(const ExpertContext&, const Trajectory&, const Trajectory*,
                                    std::size_t) const override {
    throw ExpertUnavailable("backend down");
  }
  double score(const ExpertContext&, const Trajectory&) const override { throw ExpertUnavailable("down"); }

 private:
  ExpertDescriptor d_;
};

std::shared_ptr<const Embedder> embedder() { return std::make_shared<TrigramEmbedder>(64); }

SearchNode& visited(SearchTree& tree, NodeId id, std::size_t n, double q) {
  auto& node = tree.node(id);
  node.visits = n;
  node.q = q;
  return node;
}

}  // namespace

TEST_CASE("uct") {
  SearchTree tree(Observation("root"));
  auto id = tree.add_child(0, Action("a"), Observation("x"), "e");
  CHECK(std::isinf(uct(tree.node(id), 4, 1.0)));
  visited(tree, id, 5, 0.7);
  CHECK(uct(tree.node(id), 10, 0.0) == 0.7);
  visited(tree, id, 2, 0.5);
  CHECK(uct(tree.node(id), 8, 1.0) == doctest::Approx(0.5 + std::sqrt(std::log(8.0) / 2.0)).epsilon(1e-12));
  CHECK(uct(tree.node(id), 8, 1.0) == doctest::Approx(1.51967).epsilon(1e-5));
}

TEST_CASE("select") {
  SearchTree tree(Observation("root"));
  CHECK(select(tree, 1.0) == std::vector<NodeId>{0});

  SUBCASE("higher UCT wins") {
    auto a = tree.add_child(0, Action("a"), Observation("x"), "e");
    auto b = tree.add_child(0, Action("b"), Observation("y"), "e");
    visited(tree, 0, 2, 0.0);
    visited(tree, a, 1, 1.2);
    visited(tree, b, 1, 0.9);
    CHECK(select(tree, 0.0) == std::vector<NodeId>{0, a});
  }
  SUBCASE("unvisited children order by fused value, then insertion") {
    auto a = tree.add_child(0, Action("a"), Observation("x"), "e");
    auto b = tree.add_child(0, Action("b"), Observation("y"), "e");
    auto c = tree.add_child(0, Action("c"), Observation("z"), "e");
    tree.node(a).fused_value = 0.3;
    tree.node(b).fused_value = 0.8;
    tree.node(c).fused_value = 0.8;
    CHECK(select(tree, 1.0) == std::vector<NodeId>{0, b});
  }
  SUBCASE("an unvisited child beats any visited one") {
    auto a = tree.add_child(0, Action("a"), Observation("x"), "e");
    auto b = tree.add_child(0, Action("b"), Observation("y"), "e");
    visited(tree, 0, 1, 0.0);
    visited(tree, a, 1, 1.0);
    CHECK(select(tree, 1.0) == std::vector<NodeId>{0, b});
  }
  SUBCASE("stops at terminal nodes") {
    auto a = tree.add_child(0, Action("a"), Observation("x"), "e");
    tree.node(a).terminal = true;
    CHECK(select(tree, 1.0) == std::vector<NodeId>{0, a});
    CHECK_THROWS_AS(tree.add_child(a, Action("b"), Observation("y"), "e"), InvalidState);
  }
}

TEST_CASE("backpropagate averages incrementally") {
  SearchTree tree(Observation("root"));
  std::vector<NodeId> path{0};
  backpropagate(tree, path, 0.8);
  CHECK(tree.node(0).visits == 1);
  CHECK(tree.node(0).q == doctest::Approx(0.8));
  backpropagate(tree, path, 0.2);
  CHECK(tree.node(0).visits == 2);
  CHECK(tree.node(0).q == doctest::Approx(0.5));
  backpropagate(tree, path, 0.5);
  CHECK(tree.node(0).visits == 3);
  CHECK(tree.node(0).q == doctest::Approx(0.5));
}

TEST_CASE("tree edges extend the prefix by one step") {
  SearchTree tree(Observation("root"));
  auto a = tree.add_child(0, Action("a"), Observation("x"), "e1");
  auto b = tree.add_child(a, Action("b"), Observation("y"), "e2");
  CHECK(tree.node(b).prefix.depth() == 2);
  CHECK(tree.node(a).prefix.is_prefix_of(tree.node(b).prefix));
  CHECK(tree.node(b).prefix.steps()[1].observation.text() == "x");
  CHECK(tree.node(b).parent == a);
  CHECK(tree.path_to(b) == std::vector<NodeId>{0, a, b});
  CHECK_FALSE(tree.node(0).parent);
  CHECK_FALSE(tree.node(0).incoming_action);
}

TEST_CASE("budget validation") {
  SearchBudget b;
  CHECK_NOTHROW(b.validate());
  b.iterations = 0;
  CHECK_THROWS_AS(b.validate(), InvalidInput);
  b = {};
  b.exploration = -1.0;
  CHECK_THROWS_AS(b.validate(), InvalidInput);
}

TEST_CASE("a one-step task solves in one iteration") {
  SyntheticEnvironment env(SyntheticConfig{3, 16, 1, 2});
  auto task = make_synthetic_task("t", "alpha", 5);
  Council council({std::make_shared<OracleExpert>("o", OracleExpert::Options{})}, embedder());
  auto r = search(env, task, council, PlannerConfig{});
  CHECK(r.success);
  CHECK(r.iterations_used == 1);
  CHECK(r.max_depth_reached == 1);
  CHECK(r.reward == 1.0);
  CHECK(r.per_step_expert == std::vector<ExpertId>{"o"});
  // The success is written to memory.
  CHECK(council.profile("o").size() == 1);
}

TEST_CASE("a council that never proposes a correct action exhausts the budget") {
  SyntheticEnvironment env;
  auto task = make_synthetic_task("t", "beta", 2);
  Council council({std::make_shared<WrongExpert>()}, embedder());
  PlannerConfig cfg;
  cfg.budget.iterations = 5;
  auto r = search(env, task, council, cfg);
  CHECK_FALSE(r.success);
  CHECK(r.iterations_used == 5);
  CHECK(r.reward == 0.0);
  CHECK(council.profile("wrong").size() == 0);
}

TEST_CASE("the oracle specialist solves 4 4 10 10") {
  Game24Environment env;
  auto task = make_game24_task("g", {4, 4, 10, 10});
  Council council({std::make_shared<OracleExpert>("o", OracleExpert::Options{})}, embedder());
  auto r = search(env, task, council, PlannerConfig{});
  REQUIRE(r.success);
  CHECK(r.best_trajectory.depth() == 3);
  auto replayed = env.replay(task, r.best_trajectory.actions());
  CHECK(replayed.terminal);
  CHECK(replayed.reward == 1.0);
}

TEST_CASE("duplicate proposals produce one child") {
  Game24Environment env;
  auto task = make_game24_task("g", {4, 4, 10, 10});
  TableExpert::Options o;
  o.actions[""] = {"10*10=100", "10*10=100", "4+4=8", "10-4=6"};
  Council council({std::make_shared<TableExpert>("table", o)}, embedder());
  PlannerConfig cfg;
  cfg.budget.iterations = 1;
  BufferedTrace trace;
  auto r = search(env, task, council, cfg, &trace);
  CHECK(r.nodes_expanded == 3);
  const auto& batch = trace.events().front().at("batch");
  CHECK(batch.at("children").size() == 3);
}

TEST_CASE("children created at the depth cap are failures") {
  SyntheticEnvironment env;
  auto task = make_synthetic_task("t", "gamma", 8);
  Council council({std::make_shared<OracleExpert>("o", OracleExpert::Options{})}, embedder());
  PlannerConfig cfg;
  cfg.budget.max_depth = 1;
  cfg.budget.iterations = 4;
  auto r = search(env, task, council, cfg);
  CHECK_FALSE(r.success);
  CHECK(r.max_depth_reached == 1);
}

TEST_CASE("unavailable experts are routed around") {
  SyntheticEnvironment env;
  auto task = make_synthetic_task("t", "alpha", 4);
  SUBCASE("one member down") {
    Council council({std::make_shared<DownExpert>("down"), std::make_shared<OracleExpert>("o", OracleExpert::Options{})},
                    embedder());
    PlannerConfig cfg;
    cfg.strategy = RoutingStrategy::round_robin;
    auto r = search(env, task, council, cfg);
    CHECK(r.success);
    CHECK_FALSE(r.diagnostics.empty());
  }
  SUBCASE("everyone down") {
    Council council({std::make_shared<DownExpert>("d1"), std::make_shared<DownExpert>("d2")}, embedder());
    PlannerConfig cfg;
    cfg.budget.iterations = 3;
    BufferedTrace trace;
    auto r = search(env, task, council, cfg, &trace);
    CHECK_FALSE(r.success);
    CHECK(r.iterations_used == 3);
    CHECK(r.nodes_expanded == 0);
    CHECK(trace.events().front().contains("aborted"));
  }
}

TEST_CASE("search invariants on random councils") {
  SyntheticEnvironment env;
  const auto tasks = make_synthetic_tasks(env.config(), 40, 77);
  Council council({std::make_shared<OracleExpert>("alpha", OracleExpert::Options{.family = "alpha", .noise = 0.2}),
                   std::make_shared<RandomExpert>("r", 0.5, 0.3),
                   std::make_shared<OracleExpert>("beta", OracleExpert::Options{.family = "beta", .pad_with_distractors = true})},
                  embedder());
  std::mt19937_64 gen(1);
  for (const auto& task : tasks) {
    PlannerConfig cfg;
    cfg.budget.iterations = 1 + gen() % 12;
    cfg.budget.expansion_width = 1 + gen() % 5;
    cfg.strategy = static_cast<RoutingStrategy>(gen() % 5);
    cfg.value_mode = static_cast<ValueMode>(gen() % 3);
    cfg.seed = gen();
    BufferedTrace trace;
    auto r = search(env, task, council, cfg, &trace);
    CHECK(r.iterations_used <= cfg.budget.iterations);
    CHECK(r.nodes_expanded <= cfg.budget.iterations * cfg.budget.expansion_width);
    CHECK(r.nodes_expanded >= r.max_depth_reached);
    if (r.success) CHECK(r.reward >= 1.0);
    CHECK(r.per_step_expert.size() == r.best_trajectory.depth());

    // Rebuild the tree from the trace and check every backed-up path.
    std::map<NodeId, NodeId> parent;
    std::map<NodeId, std::size_t> visits;
    for (const auto& e : trace.events()) {
      if (e.at("event") != "iteration") continue;
      if (e.contains("batch")) {
        for (const auto& c : e.at("batch").at("children")) {
          if (c.contains("node")) parent[c.at("node").get<NodeId>()] = e.at("batch").at("parent").get<NodeId>();
        }
      }
      if (!e.contains("backprop")) continue;
      for (const auto& b : e.at("backprop")) {
        auto path = b.at("path").get<std::vector<NodeId>>();
        REQUIRE(!path.empty());
        CHECK(path.front() == 0);
        for (std::size_t i = 1; i < path.size(); ++i) CHECK(parent.at(path[i]) == path[i - 1]);
        for (NodeId id : path) ++visits[id];
      }
    }
    std::map<NodeId, std::size_t> child_sum;
    for (const auto& [child, p] : parent) child_sum[p] += visits[child];
    for (const auto& [p, total] : child_sum) CHECK(visits[p] >= total);
  }
}

TEST_CASE("search is deterministic per seed") {
  SyntheticEnvironment env;
  const auto tasks = make_synthetic_tasks(env.config(), 10, 3);
  auto run_once = [&] {
    Council council({std::make_shared<OracleExpert>("a", OracleExpert::Options{.family = "alpha", .noise = 0.2}),
                     std::make_shared<OracleExpert>("b", OracleExpert::Options{.family = "beta", .noise = 0.2})},
                    embedder());
    std::string out;
    for (const auto& task : tasks) {
      BufferedTrace trace;
      PlannerConfig cfg;
      cfg.seed = 42;
      search(env, task, council, cfg, &trace);
      for (const auto& e : trace.events()) out += e.dump() + "\n";
    }
    return out;
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("env-only mode values frontiers by rollout") {
  SyntheticEnvironment env;
  auto task = make_synthetic_task("t", "alpha", 12);
  Council council({std::make_shared<OracleExpert>("o", OracleExpert::Options{})}, embedder());
  PlannerConfig cfg;
  cfg.value_mode = ValueMode::env_only;
  BufferedTrace trace;
  auto r = search(env, task, council, cfg, &trace);
  CHECK(r.success);
  CHECK(r.iterations_used == 1);
  CHECK(trace.events().front().contains("rollout"));
  CHECK(env.replay(task, r.best_trajectory.actions()).reward == 1.0);
}
