#include "doctest.h"

#include <set>

#include "council/errors.hpp"
#include "council/expert.hpp"
#include "council/scripted.hpp"
#include "council/synthetic.hpp"
#include "support.hpp"

using namespace council;
using council::testing::make_trajectory;

namespace {

// Fails `failures` times per score call sequence, then returns `value`.
class FlakyEvaluator final : public Expert {
 public:
  FlakyEvaluator(int failures, double value) : failures_(failures), value_(value) {}
  const ExpertDescriptor& descriptor() const override { return d_; }
  std::vector<std::string> generate(const ExpertContext&, const Trajectory&, const Trajectory*,
                                    std::size_t) const override {
    return {};
  }
  double score(const ExpertContext&, const Trajectory&) const override {
    if (calls_++ < failures_) throw ExpertUnavailable("backend timed out");
    return value_;
  }
  int calls() const { return calls_; }

 private:
  ExpertDescriptor d_{"flaky", "flaky", ExpertKind::llm_backed};
  int failures_;
  double value_;
  mutable int calls_ = 0;
};

class RawExpert final : public Expert {
 public:
  RawExpert(std::vector<std::string> texts, double score) : texts_(std::move(texts)), score_(score) {}
  const ExpertDescriptor& descriptor() const override { return d_; }
  std::vector<std::string> generate(const ExpertContext&, const Trajectory&, const Trajectory*,
                                    std::size_t) const override {
    return texts_;
  }
  double score(const ExpertContext&, const Trajectory&) const override { return score_; }

 private:
  ExpertDescriptor d_{"raw", "raw", ExpertKind::scripted};
  std::vector<std::string> texts_;
  double score_;
};

struct Fixture {
  SyntheticEnvironment env{SyntheticConfig{3, 16, 4, 2}};
  TaskSpec task = make_synthetic_task("t1", "beta", 17);
  ExpertContext ctx(const Trajectory& prefix = {}) const {
    return ExpertContext{env, task, env.replay(task, prefix.actions()).current(), 99};
  }
  // The first `n` correct steps of the task.
  Trajectory solved_prefix(std::size_t n) const {
    const auto hidden = env.hidden_sequence(task);
    std::vector<Action> actions;
    for (std::size_t i = 0; i < n; ++i) actions.emplace_back(hidden[i]);
    auto replayed = env.replay(task, actions);
    std::vector<Step> steps;
    Observation obs = replayed.initial;
    for (std::size_t i = 0; i < n; ++i) {
      steps.push_back(Step{obs, actions[i]});
      obs = replayed.outcomes[i].observation;
    }
    return Trajectory(std::move(steps));
  }
};

}  // namespace

TEST_CASE("table expert truncates its scripted list to k") {
  Fixture f;
  TableExpert::Options o;
  o.actions[serialize_trajectory(Trajectory{})] = {"x1", "x2", "x3", "x4", "x5"};
  TableExpert expert("table", o);
  auto proposals = propose_actions(expert, f.ctx(), Trajectory{}, nullptr, 3);
  REQUIRE(proposals.size() == 3);
  CHECK(proposals[0].action.text() == "x1");
  CHECK(proposals[2].action.text() == "x3");
  CHECK(proposals[0].proposer == "table");

  auto unknown = make_trajectory({{"elsewhere", "y"}});
  CHECK(propose_actions(expert, f.ctx(), unknown, nullptr, 3).empty());
}

TEST_CASE("duplicate and blank proposals collapse") {
  Fixture f;
  RawExpert expert({"a", "a", "b", "  "}, 0.5);
  auto proposals = propose_actions(expert, f.ctx(), Trajectory{}, nullptr, 3);
  REQUIRE(proposals.size() == 2);
  CHECK(proposals[0].action.text() == "a");
  CHECK(proposals[1].action.text() == "b");
  CHECK_THROWS_AS(propose_actions(expert, f.ctx(), Trajectory{}, nullptr, 0), InvalidInput);
}

TEST_CASE("an in-family oracle specialist proposes the correct next token") {
  Fixture f;
  OracleExpert expert("beta-specialist", {.family = "beta", .pad_with_distractors = true, .shuffle = true});
  const auto hidden = f.env.hidden_sequence(f.task);
  for (std::size_t pos = 0; pos < hidden.size(); ++pos) {
    auto prefix = f.solved_prefix(pos);
    auto proposals = propose_actions(expert, f.ctx(prefix), prefix, nullptr, 4);
    CHECK(proposals.size() == 4);
    bool found = false;
    for (const auto& p : proposals) found = found || p.action.text() == hidden[pos];
    CHECK(found);
  }
}

TEST_CASE("proposal lists respect k and never repeat") {
  Fixture f;
  std::vector<std::shared_ptr<const Expert>> experts = {
      std::make_shared<OracleExpert>("o", OracleExpert::Options{.family = "beta", .pad_with_distractors = true}),
      std::make_shared<OracleExpert>("off", OracleExpert::Options{.family = "alpha"}),
      std::make_shared<RandomExpert>("r"),
  };
  for (const auto& e : experts) {
    for (std::size_t k = 1; k <= 20; ++k) {
      auto proposals = propose_actions(*e, f.ctx(), Trajectory{}, nullptr, k);
      CHECK(proposals.size() <= k);
      std::set<std::string> seen;
      for (const auto& p : proposals) CHECK(seen.insert(p.action.text()).second);
    }
  }
}

TEST_CASE("scripted experts are pure functions of their inputs") {
  Fixture f;
  RandomExpert a("r", 0.5, 0.3);
  RandomExpert b("r", 0.5, 0.3);
  auto prefix = f.solved_prefix(1);
  for (int i = 0; i < 5; ++i) {
    CHECK(a.generate(f.ctx(prefix), prefix, nullptr, 4) == b.generate(f.ctx(prefix), prefix, nullptr, 4));
    CHECK(a.score(f.ctx(prefix), prefix) == b.score(f.ctx(prefix), prefix));
  }
  // A different episode seed changes the draw.
  auto other = f.ctx(prefix);
  other.seed = 100;
  CHECK(a.generate(other, prefix, nullptr, 8) != a.generate(f.ctx(prefix), prefix, nullptr, 8));
}

TEST_CASE("evaluate_plausibility") {
  Fixture f;
  ConstantEvaluatorExpert one("c", 1.0);
  CHECK(evaluate_plausibility(one, f.ctx(), Trajectory{}) == 1.0);

  // depth 4 with two correct tokens placed: two of four constraints hold.
  OracleExpert judge("beta-specialist", {.family = "beta"});
  auto prefix = f.solved_prefix(2);
  CHECK(evaluate_plausibility(judge, f.ctx(prefix), prefix) == doctest::Approx(0.5));

  FlakyEvaluator twice(2, 0.9);
  CHECK(evaluate_plausibility(twice, f.ctx(), Trajectory{}) == 0.5);
  CHECK(twice.calls() == 2);

  FlakyEvaluator once(1, 0.9);
  CHECK(evaluate_plausibility(once, f.ctx(), Trajectory{}) == 0.9);

  RawExpert wild({}, 7.0);
  CHECK(evaluate_plausibility(wild, f.ctx(), Trajectory{}) == 1.0);
  RawExpert negative({}, -3.0);
  CHECK(evaluate_plausibility(negative, f.ctx(), Trajectory{}) == 0.0);
}

TEST_CASE("noisy scores stay inside [0, 1]") {
  Fixture f;
  RandomExpert noisy("n", 0.5, 5.0);
  for (int i = 0; i < 200; ++i) {
    auto ctx = f.ctx();
    ctx.seed = static_cast<std::uint64_t>(i);
    const double v = evaluate_plausibility(noisy, ctx, Trajectory{});
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("default aggregation interleaves proposers in council order") {
  Fixture f;
  RandomExpert agg("agg");
  std::vector<ActionProposal> pooled = {
      {Action("a1"), "A"}, {Action("a2"), "A"}, {Action("b1"), "B"}, {Action("a1"), "B"}, {Action("b2"), "B"},
  };
  auto merged = agg.aggregate(f.ctx(), Trajectory{}, pooled, 3);
  CHECK(merged == std::vector<std::string>{"a1", "b1", "a2"});
}

TEST_CASE("council bookkeeping") {
  auto emb = std::make_shared<TrigramEmbedder>(16);
  std::vector<std::shared_ptr<const Expert>> members = {
      std::make_shared<RandomExpert>("a"), std::make_shared<RandomExpert>("b"),
      std::make_shared<RandomExpert>("c")};
  Council council(members, emb, MemoryOptions{8, 0.5});
  CHECK(council.size() == 3);
  CHECK(council.profiles().size() == 3);
  CHECK(council.profile("b").capacity() == 8);
  CHECK(council.index_of("c") == 2);
  CHECK_FALSE(council.any_llm_backed());
  CHECK_THROWS_AS(council.member("zzz"), InvalidInput);

  council.profile("b").insert(make_trajectory({{"o", "a"}}), *emb);
  std::vector<ExpertId> ids = {"c", "b"};
  auto sub = council.subset(ids);
  CHECK(sub.size() == 2);
  CHECK(sub.member(0).id() == "c");
  CHECK(sub.profile("b").size() == 1);

  std::vector<std::shared_ptr<const Expert>> dup = {std::make_shared<RandomExpert>("a"),
                                                    std::make_shared<RandomExpert>("a")};
  CHECK_THROWS_AS(Council(dup, emb), InvalidInput);
  CHECK_THROWS_AS(Council({}, emb), InvalidInput);
}
