#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "council/errors.hpp"
#include "council/game24.hpp"
#include "council/harness.hpp"
#include "council/synthetic.hpp"

using nlohmann::json;
using namespace council;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> environment, tasks, strategy, aggregator, value_mode;
  std::optional<double> temperature, c, success_threshold, cold_start_prior;
  std::optional<std::size_t> k, width, max_depth, workers, capacity, warmup, generate;
  std::optional<std::string> metrics, trace, memory_load, memory_save;
  bool no_share = false;
  std::vector<std::uint64_t> seeds;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_path, "JSON config file supplying defaults");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--environment", environment, "game24 or synthetic");
    app.add_option("--tasks", tasks, "task file (JSON lines)");
    app.add_option("--generate-tasks", generate, "generate this many tasks when no task file is given");
    app.add_option("--warmup", warmup, "leading tasks that only build memory");
    app.add_option("--strategy", strategy, "task-aware, random, round-robin, voting, collaborative");
    app.add_option("--temperature", temperature, "routing softmax temperature");
    app.add_option("--aggregator", aggregator, "aggregating member for collaborative routing");
    app.add_option("--value-mode", value_mode, "full, llm-only, sms-only, env-only");
    app.add_option("-K,--iterations", k, "search iterations per task");
    app.add_option("--width", width, "candidates per expansion");
    app.add_option("--max-depth", max_depth, "depth cap");
    app.add_option("--exploration", c, "UCT exploration constant");
    app.add_option("--success-threshold", success_threshold, "reward counted as success");
    app.add_option("--capacity", capacity, "segments per expert profile");
    app.add_option("--cold-start-prior", cold_start_prior, "utility of segments without outcomes");
    app.add_option("--memory-load", memory_load, "memory file to start from");
    app.add_option("--memory-save", memory_save, "memory file to write after the run");
    app.add_flag("--no-share", no_share, "isolate memory between tasks");
    app.add_option("--workers", workers, "parallel tasks when memory is not shared");
    app.add_option("--metrics", metrics, "metrics output (JSON lines)");
    app.add_option("--trace", trace, "trace output (JSON lines)");
    app.add_option("--seeds", seeds, "seeds for ablation runs");
  }

  json merged() const {
    json j = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file " + config_path);
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("config file " + config_path + " is not valid JSON: " + e.what());
      }
    }
    auto set = [&](const char* section, const char* key, const auto& value) {
      if (!value) return;
      if (section) {
        j[section][key] = *value;
      } else {
        j[key] = *value;
      }
    };
    set(nullptr, "seed", seed);
    set(nullptr, "environment", environment);
    set(nullptr, "tasks", tasks);
    set(nullptr, "generate_tasks", generate);
    set(nullptr, "warmup_tasks", warmup);
    set("routing", "strategy", strategy);
    set("routing", "temperature", temperature);
    set("routing", "aggregator", aggregator);
    set("value", "mode", value_mode);
    set("budget", "K", k);
    set("budget", "expansion_width", width);
    set("budget", "max_depth", max_depth);
    set("budget", "c", c);
    set(nullptr, "success_threshold", success_threshold);
    set("memory", "capacity", capacity);
    set("memory", "cold_start_prior", cold_start_prior);
    set("memory", "load", memory_load);
    set("memory", "save", memory_save);
    set(nullptr, "workers", workers);
    set("output", "metrics", metrics);
    set("output", "trace", trace);
    if (no_share) j["memory"]["share"] = false;
    if (!seeds.empty()) j["seeds"] = seeds;
    return j;
  }
};

void print_summary(const RunSummary& s) { std::cout << s.to_json().dump() << '\n'; }

int oracle_command(const std::string& path) {
  const auto tasks = read_task_file(path);
  std::size_t solvable = 0;
  for (const auto& t : tasks) {
    if (t.environment != "game24") throw InvalidInput("task '" + t.task_id + "' is not a game24 task");
    const auto& p = t.payload.is_object() ? t.payload.at("numbers") : t.payload;
    const auto numbers = p.get<std::vector<double>>();
    const auto sol = game24_oracle(numbers);
    json row{{"task_id", t.task_id}, {"numbers", p}, {"solvable", sol.solvable}};
    if (sol.solvable) {
      ++solvable;
      row["expression"] = sol.expression;
      json moves = json::array();
      for (const auto& a : sol.witness) moves.push_back(a.text());
      row["witness"] = moves;
    }
    std::cout << row.dump() << '\n';
  }
  std::cout << json{{"summary", true}, {"tasks", tasks.size()}, {"solvable", solvable}}.dump() << '\n';
  return 0;
}

int memory_inspect(const std::string& path, std::size_t dim, bool verbose) {
  ProfileMap profiles;
  TrigramEmbedder embedder(dim);
  const auto n = load_memory_file(path, profiles, embedder, MemoryOptions{});
  std::cout << "segments: " << n << '\n';
  for (const auto& [id, profile] : profiles) {
    const auto segs = profile.segments();
    std::size_t resolved = 0, entries = 0;
    for (const auto& s : segs) {
      for (const auto& e : s.ledger) {
        ++entries;
        if (e.outcome) ++resolved;
      }
    }
    std::cout << id << ": " << segs.size() << " segments, " << entries << " ledger entries (" << resolved
              << " resolved)\n";
    if (!verbose) continue;
    for (const auto& s : segs) {
      std::cout << "  #" << s.segment_id << " depth " << s.prefix.depth() << " utility " << profile.utility(s.segment_id)
                << " last action: " << s.prefix.steps().back().action.text() << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expert-council tree search planner"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run_cmd = app.add_subcommand("run", "plan every task and write metrics");
  run_opts.attach(*run_cmd);

  Overrides abl_opts;
  std::string axis;
  std::string ablation_out;
  auto* abl_cmd = app.add_subcommand("ablation", "compare variants along one axis");
  abl_opts.attach(*abl_cmd);
  abl_cmd->add_option("--axis", axis, "routing, value-signal, council-size")->required();
  abl_cmd->add_option("--output", ablation_out, "write the table as JSON");

  std::string oracle_tasks;
  auto* oracle_cmd = app.add_subcommand("oracle", "check Game of 24 solvability for a task file");
  oracle_cmd->add_option("tasks", oracle_tasks, "task file")->required();

  auto* mem_cmd = app.add_subcommand("memory", "inspect, load or save memory files");
  mem_cmd->require_subcommand(1);
  std::string inspect_path;
  std::size_t dim = 256;
  bool verbose = false;
  auto* inspect_cmd = mem_cmd->add_subcommand("inspect", "summarize a memory file");
  inspect_cmd->add_option("file", inspect_path)->required();
  inspect_cmd->add_option("--dim", dim, "embedding dimension");
  inspect_cmd->add_flag("-v,--verbose", verbose, "list segments");
  std::string load_path;
  auto* load_cmd = mem_cmd->add_subcommand("load", "parse a memory file and report its segment count");
  load_cmd->add_option("file", load_path)->required();
  load_cmd->add_option("--dim", dim, "embedding dimension");
  std::vector<std::string> save_inputs;
  std::string save_output;
  std::size_t save_capacity = kDefaultProfileCapacity;
  auto* save_cmd = mem_cmd->add_subcommand("save", "merge memory files, prune to capacity and write one file");
  save_cmd->add_option("inputs", save_inputs, "memory files to merge")->required();
  save_cmd->add_option("-o,--output", save_output, "destination")->required();
  save_cmd->add_option("--capacity", save_capacity, "segments per expert profile");
  save_cmd->add_option("--dim", dim, "embedding dimension");

  std::string gen_env = "game24";
  std::size_t gen_count = 10;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  json gen_params = json::object();
  std::size_t families = 3, vocabulary = 16, depth = 3, attempts = 2;
  auto* gen_cmd = app.add_subcommand("generate", "write a task file");
  gen_cmd->add_option("--environment", gen_env, "game24 or synthetic");
  gen_cmd->add_option("--count", gen_count, "number of tasks");
  gen_cmd->add_option("--seed", gen_seed, "random seed");
  gen_cmd->add_option("--families", families);
  gen_cmd->add_option("--vocabulary", vocabulary);
  gen_cmd->add_option("--depth", depth);
  gen_cmd->add_option("--attempts", attempts);
  gen_cmd->add_option("-o,--output", gen_out, "destination (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto config = RunConfig::from_json(run_opts.merged());
      print_summary(run(config).summary);
    } else if (*abl_cmd) {
      const auto config = RunConfig::from_json(abl_opts.merged());
      const auto rows = ablation(config, parse_ablation_axis(axis));
      write_ablation_table(std::cout, rows);
      if (!ablation_out.empty()) {
        std::ofstream out(ablation_out);
        out << ablation_to_json(rows).dump(2) << '\n';
      }
    } else if (*oracle_cmd) {
      return oracle_command(oracle_tasks);
    } else if (*inspect_cmd) {
      return memory_inspect(inspect_path, dim, verbose);
    } else if (*load_cmd) {
      ProfileMap profiles;
      TrigramEmbedder embedder(dim);
      std::cout << load_memory_file(load_path, profiles, embedder, MemoryOptions{}) << " segments\n";
    } else if (*save_cmd) {
      ProfileMap profiles;
      TrigramEmbedder embedder(dim);
      const MemoryOptions options{save_capacity, kColdStartPrior};
      for (const auto& p : save_inputs) {
        ProfileMap part;
        load_memory_file(p, part, embedder, options);
        merge_profiles(profiles, part, options.capacity, options.cold_start_prior);
      }
      for (auto& [id, profile] : profiles) profile.prune();
      std::cout << save_memory_file(save_output, profiles) << " segments\n";
    } else if (*gen_cmd) {
      std::vector<TaskSpec> tasks;
      if (gen_env == "synthetic") {
        SyntheticConfig sc{families, vocabulary, depth, attempts};
        sc.validate();
        tasks = make_synthetic_tasks(sc, gen_count, gen_seed, "syn-");
      } else if (gen_env == "game24") {
        tasks = game24_solvable_tasks(gen_count, gen_seed);
      } else {
        throw InvalidInput("unknown environment '" + gen_env + "'");
      }
      if (gen_out.empty()) {
        write_tasks(std::cout, tasks);
      } else {
        std::ofstream out(gen_out);
        write_tasks(out, tasks);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
