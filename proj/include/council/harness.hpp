#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "council/environment.hpp"
#include "council/expert.hpp"
#include "council/llm.hpp"
#include "council/planner.hpp"

namespace council {

// Everything a run needs. Parsed from a JSON object whose keys mirror the
// fields below; command-line flags patch that object before parsing.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string environment = "game24";
  nlohmann::json environment_params = nlohmann::json::object();  // key "synthetic"
  std::string tasks_path;
  std::size_t generate_tasks = 0;  // used when tasks_path is empty
  std::size_t warmup_tasks = 0;    // leading tasks that only accrue memory

  std::vector<nlohmann::json> council;
  std::vector<BackendConfig> backends;
  PromptTemplates prompts;

  RoutingStrategy strategy = RoutingStrategy::task_aware;
  double temperature = kDefaultRoutingTemperature;
  std::optional<ExpertId> aggregator;
  ValueMode value_mode = ValueMode::full;
  SearchBudget budget;
  std::optional<double> success_threshold;

  MemoryOptions memory;
  std::size_t embedding_dim = 256;
  std::string memory_load;
  std::string memory_save;
  bool share_memory = true;
  std::size_t workers = 1;

  std::string metrics_path;
  std::string trace_path;
  std::vector<std::uint64_t> seeds;  // ablation seeds; {seed} when empty

  // Throws ConfigError naming the offending key.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Builds the environment, the experts and, if any member is LLM-backed, the
// gateway. Credentials are read from the environment variables named in the
// backend entries.
struct RunContext {
  std::unique_ptr<Environment> environment;
  std::shared_ptr<LlmGateway> gateway;  // null for fully scripted councils
  std::unique_ptr<Council> council;
};

RunContext build_context(const RunConfig& config);
std::shared_ptr<const Expert> make_expert(const nlohmann::json& spec, const RunConfig& config,
                                          std::shared_ptr<LlmGateway>& gateway);

// Tasks from tasks_path, or generated from (environment, generate_tasks, seed).
std::vector<TaskSpec> load_tasks(const RunConfig& config, const Environment& env);

struct RunSummary {
  std::size_t tasks = 0;
  std::size_t warmup = 0;
  std::optional<double> success_rate;
  std::optional<double> mean_reward;
  std::optional<double> mean_steps;  // max depth over successful tasks
  std::optional<double> mean_nodes;
  std::optional<double> mean_nodes_success;
  std::map<std::string, BackendUsage> tokens;

  nlohmann::json to_json() const;
};

struct RunMetrics {
  std::vector<PlanResult> rows;  // scored tasks only
  std::vector<PlanResult> warmup_rows;
  RunSummary summary;
};

RunSummary summarize(std::span<const PlanResult> rows);
nlohmann::json row_to_json(const PlanResult& row, bool warmup);

// Runs every task in order against `council`. With shared memory tasks run
// sequentially; otherwise each task starts from a copy of the initial
// profiles and up to `workers` tasks run concurrently.
RunMetrics run_tasks(const RunConfig& config, const Environment& env, std::span<const TaskSpec> tasks,
                     Council& council, TraceSink* trace = nullptr);

// Writes one row per task and a final summary object. Re-derives the
// summary from the written rows and throws InvalidState on disagreement.
void write_metrics(std::ostream& out, const RunMetrics& metrics);

// Full run: builds the context, loads memory, runs, writes metrics, trace and
// memory files as configured.
RunMetrics run(const RunConfig& config);

enum class AblationAxis { routing, value_signal, council_size };
std::string to_string(AblationAxis axis);
AblationAxis parse_ablation_axis(const std::string& name);

struct AblationVariant {
  std::string label;
  RunConfig config;
};

struct AblationRow {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<RunSummary> per_seed;
  double mean_success = 0.0;
  std::optional<double> mean_nodes_success;
  std::optional<double> mean_steps;
};

std::vector<AblationVariant> ablation_variants(const RunConfig& base, AblationAxis axis);

// Each variant on the same seeds and tasks; memory starts from the configured
// load path (or empty) for every (variant, seed) pair.
std::vector<AblationRow> ablation(const RunConfig& base, AblationAxis axis);
void write_ablation_table(std::ostream& out, std::span<const AblationRow> rows);
nlohmann::json ablation_to_json(std::span<const AblationRow> rows);

std::size_t save_memory_file(const std::string& path, const ProfileMap& profiles);
std::size_t load_memory_file(const std::string& path, ProfileMap& profiles, const Embedder& embedder,
                             const MemoryOptions& options);

}  // namespace council
