#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "council/errors.hpp"
#include "council/game24.hpp"
#include "council/harness.hpp"

using namespace council;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("council-harness-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<json> lines(const std::string& path) {
  std::vector<json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

json synthetic_config() {
  json council = json::array();
  for (std::string f : {"alpha", "beta", "gamma"}) {
    council.push_back({{"expert_id", f}, {"script", "oracle"}, {"family", f}, {"noise", 0.1}});
  }
  return {{"seed", 7}, {"environment", "synthetic"}, {"generate_tasks", 12}, {"council", council},
          {"memory", {{"capacity", 8}}}};
}

std::string config_error(const json& j) {
  try {
    RunConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config errors name the offending key") {
  auto base = synthetic_config();
  CHECK(config_error(base).empty());

  auto j = base;
  j.erase("seed");
  CHECK(config_error(j).find("'seed'") != std::string::npos);

  j = base;
  j["budgett"] = 1;
  CHECK(config_error(j).find("'budgett'") != std::string::npos);

  j = base;
  j["budget"] = {{"K", 0}};
  CHECK(config_error(j).find("'budget.K'") != std::string::npos);

  j = base;
  j["routing"] = {{"strategy", "bogus"}};
  CHECK(config_error(j).find("'routing.strategy'") != std::string::npos);

  j = base;
  j["routing"] = {{"temperature", -1}};
  CHECK(config_error(j).find("'routing.temperature'") != std::string::npos);

  j = base;
  j["value"] = {{"mode", "llm"}};
  CHECK(config_error(j).find("'value.mode'") != std::string::npos);

  j = base;
  j["memory"] = {{"capacity", 0}};
  CHECK(config_error(j).find("'memory.capacity'") != std::string::npos);

  j = base;
  j["environment"] = "webshop";
  CHECK(config_error(j).find("'environment'") != std::string::npos);

  j = base;
  j["council"].push_back({{"expert_id", "alpha"}});
  CHECK(config_error(j).find("'council[3].expert_id'") != std::string::npos);

  j = base;
  j["council"].push_back({{"expert_id", "remote"}, {"kind", "llm"}, {"backend", "nowhere"}});
  CHECK(config_error(j).find("'backends'") != std::string::npos);

  j = base;
  j["backends"] = {{{"backend_id", "b"}, {"endpoint", "http://x"}, {"model", "m"}, {"api_key", "sk-123"}}};
  auto msg = config_error(j);
  CHECK(msg.find("'backends[0].credential_env'") != std::string::npos);
  CHECK(msg.find("sk-123") == std::string::npos);

  j = base;
  j["prompts"] = {{"act", "x"}};
  CHECK(config_error(j).find("'prompts.act'") != std::string::npos);
}

TEST_CASE("config round-trips through JSON") {
  auto j = synthetic_config();
  j["routing"] = {{"strategy", "collaborative"}, {"temperature", 0.2}, {"aggregator", "beta"}};
  j["budget"] = {{"K", 7}, {"expansion_width", 3}, {"max_depth", 9}, {"c", 0.5}};
  auto c = RunConfig::from_json(j);
  auto again = RunConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
  CHECK(again.strategy == RoutingStrategy::collaborative);
  CHECK(again.aggregator == "beta");
  CHECK(again.budget.iterations == 7);
}

TEST_CASE("empty task file") {
  TempDir dir;
  std::ofstream(dir.file("tasks.jsonl")).close();
  auto j = synthetic_config();
  j.erase("generate_tasks");
  j["tasks"] = dir.file("tasks.jsonl");
  j["output"] = {{"metrics", dir.file("m.jsonl")}};
  auto m = run(RunConfig::from_json(j));
  CHECK(m.rows.empty());
  auto out = lines(dir.file("m.jsonl"));
  REQUIRE(out.size() == 1);
  CHECK(out[0].at("summary") == true);
  CHECK(out[0].at("tasks") == 0);
  CHECK(out[0].at("success_rate").is_null());
}

TEST_CASE("oracle specialist on two solvable Game of 24 tasks") {
  TempDir dir;
  {
    std::ofstream t(dir.file("tasks.jsonl"));
    t << task_to_json(make_game24_task("a", {4, 4, 10, 10})).dump() << "\n";
    t << task_to_json(make_game24_task("b", {1, 2, 3, 4})).dump() << "\n";
  }
  json j{{"seed", 1},
         {"environment", "game24"},
         {"tasks", dir.file("tasks.jsonl")},
         {"council", {{{"expert_id", "oracle"}, {"script", "oracle"}}}},
         {"output", {{"metrics", dir.file("m.jsonl")}}}};
  auto config = RunConfig::from_json(j);
  auto ctx = build_context(config);
  CHECK(ctx.gateway == nullptr);

  auto m = run(config);
  REQUIRE(m.summary.success_rate);
  CHECK(*m.summary.success_rate == 1.0);
  auto out = lines(dir.file("m.jsonl"));
  REQUIRE(out.size() == 3);
  CHECK(out[0].at("task_id") == "a");
  CHECK(out[2].at("success_rate") == 1.0);
}

TEST_CASE("tasks for another environment are rejected") {
  TempDir dir;
  {
    std::ofstream t(dir.file("tasks.jsonl"));
    t << task_to_json(make_game24_task("a", {4, 4, 10, 10})).dump() << "\n";
  }
  auto j = synthetic_config();
  j.erase("generate_tasks");
  j["tasks"] = dir.file("tasks.jsonl");
  CHECK_THROWS_AS(run(RunConfig::from_json(j)), ConfigError);
}

TEST_CASE("scripted runs are byte-reproducible") {
  TempDir dir;
  auto once = [&](const std::string& tag) {
    auto j = synthetic_config();
    j["warmup_tasks"] = 4;
    j["output"] = {{"metrics", dir.file("m" + tag)}, {"trace", dir.file("t" + tag)}};
    j["memory"]["save"] = dir.file("mem" + tag);
    run(RunConfig::from_json(j));
  };
  once("1");
  once("2");
  CHECK(slurp(dir.file("m1")) == slurp(dir.file("m2")));
  CHECK(slurp(dir.file("t1")) == slurp(dir.file("t2")));
  CHECK(slurp(dir.file("mem1")) == slurp(dir.file("mem2")));
  CHECK_FALSE(slurp(dir.file("t1")).empty());
}

TEST_CASE("metrics rows agree with the summary") {
  TempDir dir;
  auto j = synthetic_config();
  j["warmup_tasks"] = 5;
  j["output"] = {{"metrics", dir.file("m.jsonl")}};
  auto m = run(RunConfig::from_json(j));
  auto out = lines(dir.file("m.jsonl"));
  REQUIRE(out.size() == 13);
  std::size_t scored = 0, solved = 0, warm = 0;
  double nodes = 0.0;
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    if (out[i].at("warmup").get<bool>()) {
      ++warm;
      continue;
    }
    ++scored;
    solved += out[i].at("success").get<bool>();
    nodes += out[i].at("nodes_expanded").get<double>();
  }
  CHECK(warm == 5);
  CHECK(scored == 7);
  const auto& summary = out.back();
  CHECK(summary.at("tasks") == 7);
  CHECK(summary.at("warmup_tasks") == 5);
  CHECK(summary.at("success_rate").get<double>() == doctest::Approx(static_cast<double>(solved) / 7.0));
  CHECK(summary.at("mean_nodes").get<double>() == doctest::Approx(nodes / 7.0));

  RunMetrics tampered = m;
  tampered.summary.success_rate = 0.123;
  std::ostringstream sink;
  CHECK_THROWS_AS(write_metrics(sink, tampered), InvalidState);
}

TEST_CASE("memory persists across runs only through an explicit file") {
  TempDir dir;
  auto j = synthetic_config();
  j["memory"]["save"] = dir.file("mem.jsonl");
  run(RunConfig::from_json(j));

  RunConfig loaded_cfg = RunConfig::from_json(j);
  loaded_cfg.memory_save.clear();
  loaded_cfg.memory_load = dir.file("mem.jsonl");
  auto ctx = build_context(loaded_cfg);
  std::size_t total = 0;
  for (const auto& [id, p] : ctx.council->profiles()) total += p.size();
  CHECK(total > 0);

  // Rerunning the same tasks on loaded memory must not reuse settled episode ids.
  auto second = run(loaded_cfg);
  REQUIRE_FALSE(second.rows.empty());
  CHECK(second.rows.front().episode_id.rfind("g2/", 0) == 0);
  loaded_cfg.memory_save = dir.file("mem2.jsonl");
  run(loaded_cfg);
  RunConfig third_cfg = loaded_cfg;
  third_cfg.memory_load = dir.file("mem2.jsonl");
  third_cfg.memory_save.clear();
  CHECK(run(third_cfg).rows.front().episode_id.rfind("g3/", 0) == 0);
  loaded_cfg.memory_save.clear();

  loaded_cfg.memory_load.clear();
  auto fresh = build_context(loaded_cfg);
  for (const auto& [id, p] : fresh.council->profiles()) CHECK(p.size() == 0);

  loaded_cfg.memory_load = dir.file("missing.jsonl");
  CHECK_THROWS(build_context(loaded_cfg));
}

TEST_CASE("independent episodes give the same results with any worker count") {
  auto j = synthetic_config();
  j["memory"]["share"] = false;
  auto serial = RunConfig::from_json(j);
  j["workers"] = 4;
  auto parallel = RunConfig::from_json(j);

  auto collect = [](const RunConfig& c) {
    auto ctx = build_context(c);
    auto tasks = load_tasks(c, *ctx.environment);
    std::ostringstream trace_out;
    JsonlTraceWriter trace(trace_out);
    auto m = run_tasks(c, *ctx.environment, tasks, *ctx.council, &trace);
    std::ostringstream metrics_out;
    write_metrics(metrics_out, m);
    return metrics_out.str() + trace_out.str();
  };
  CHECK(collect(serial) == collect(parallel));
}

TEST_CASE("ablation variants") {
  auto c = RunConfig::from_json(synthetic_config());
  auto labels = [&](AblationAxis axis) {
    std::vector<std::string> out;
    for (const auto& v : ablation_variants(c, axis)) out.push_back(v.label);
    return out;
  };
  CHECK(labels(AblationAxis::routing) ==
        std::vector<std::string>{"task-aware", "random", "round-robin", "voting", "collaborative"});
  CHECK(labels(AblationAxis::value_signal) == std::vector<std::string>{"full", "llm-only", "sms-only", "env-only"});
  CHECK(labels(AblationAxis::council_size) ==
        std::vector<std::string>{"alpha", "beta", "gamma", "alpha+beta", "alpha+gamma", "beta+gamma",
                                 "alpha+beta+gamma"});
  CHECK(parse_ablation_axis("council-size") == AblationAxis::council_size);
  CHECK_THROWS_AS(parse_ablation_axis("size"), InvalidInput);
}

TEST_CASE("ablation runs every variant on the same seeds") {
  auto j = synthetic_config();
  j["seeds"] = {1, 2};
  j["generate_tasks"] = 6;
  auto rows = ablation(RunConfig::from_json(j), AblationAxis::value_signal);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.seeds == std::vector<std::uint64_t>{1, 2});
    REQUIRE(r.per_seed.size() == 2);
    CHECK(r.mean_success == doctest::Approx((r.per_seed[0].success_rate.value_or(0.0) +
                                             r.per_seed[1].success_rate.value_or(0.0)) / 2.0));
  }
  std::ostringstream table;
  write_ablation_table(table, rows);
  CHECK(table.str().find("sms-only") != std::string::npos);
  auto js = ablation_to_json(rows);
  CHECK(js.size() == 4);
}
