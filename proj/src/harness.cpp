#include "council/harness.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

#include "council/errors.hpp"
#include "council/game24.hpp"
#include "council/scripted.hpp"
#include "council/synthetic.hpp"

namespace council {

using nlohmann::json;

namespace {

// Typed read of j[key] with the dotted path in every diagnostic.
template <typename T>
T read(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + path + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config key '" + (path.empty() ? std::string("<root>") : path) +
                                        "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError("unknown config key '" + path + key + "'");
    }
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "' " + what);
}

std::size_t read_count(const json& j, const std::string& key, const std::string& path, std::size_t fallback) {
  if (j.contains(key) && j.at(key).is_number_integer() && j.at(key).get<long long>() < 0) {
    throw ConfigError("config key '" + path + key + "' must be non-negative");
  }
  return read<std::size_t>(j, key, path, fallback);
}

double mean_of(std::span<const double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"seed", "environment", "synthetic", "tasks", "generate_tasks", "warmup_tasks", "council",
                  "backends", "prompts", "routing", "value", "budget", "success_threshold", "memory",
                  "workers", "output", "seeds"},
                 "");
  RunConfig c;
  require(j.contains("seed"), "seed", "is required");
  require(j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0),
          "seed", "must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  c.environment = read<std::string>(j, "environment", "", c.environment);
  require(c.environment == "game24" || c.environment == "synthetic", "environment",
          "must be 'game24' or 'synthetic'");
  if (j.contains("synthetic")) {
    c.environment_params = j.at("synthetic");
    try {
      SyntheticConfig::from_json(c.environment_params).validate();
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config key 'synthetic': ") + e.what());
    }
  }
  c.tasks_path = read<std::string>(j, "tasks", "", "");
  c.generate_tasks = read_count(j, "generate_tasks", "", 0);
  c.warmup_tasks = read_count(j, "warmup_tasks", "", 0);

  require(j.contains("council") && j.at("council").is_array() && !j.at("council").empty(), "council",
          "must be a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.at("council").size(); ++i) {
    const auto& e = j.at("council")[i];
    const auto path = "council[" + std::to_string(i) + "].";
    require(e.is_object() && e.contains("expert_id") && e.at("expert_id").is_string(),
            path + "expert_id", "is required");
    require(ids.insert(e.at("expert_id").get<std::string>()).second, path + "expert_id", "is duplicated");
    const auto kind = read<std::string>(e, "kind", path, "scripted");
    require(kind == "scripted" || kind == "llm", path + "kind", "must be 'scripted' or 'llm'");
    if (kind == "llm") require(e.contains("backend"), path + "backend", "is required for llm experts");
    c.council.push_back(e);
  }

  if (j.contains("backends")) {
    require(j.at("backends").is_array(), "backends", "must be an array");
    for (std::size_t i = 0; i < j.at("backends").size(); ++i) {
      const auto& b = j.at("backends")[i];
      const auto path = "backends[" + std::to_string(i) + "].";
      for (const char* key : {"backend_id", "endpoint", "model"}) {
        require(b.contains(key) && b.at(key).is_string(), path + key, "is required");
      }
      require(!b.contains("api_key") && !b.contains("credential"), path + "credential_env",
              "must name an environment variable; keys are never read from config files");
      try {
        c.backends.push_back(BackendConfig::from_json(b));
      } catch (const std::exception& e) {
        throw ConfigError("config key '" + path + "': " + e.what());
      }
    }
  }
  for (const auto& e : c.council) {
    if (read<std::string>(e, "kind", "", "scripted") != "llm") continue;
    const auto backend = e.at("backend").get<std::string>();
    require(std::any_of(c.backends.begin(), c.backends.end(),
                        [&](const auto& b) { return b.backend_id == backend; }),
            "backends", "has no entry for backend '" + backend + "'");
  }
  if (j.contains("prompts")) c.prompts = PromptTemplates::from_json(j.at("prompts"));

  if (j.contains("routing")) {
    const auto& r = j.at("routing");
    reject_unknown(r, {"strategy", "temperature", "aggregator"}, "routing.");
    try {
      c.strategy = parse_routing_strategy(read<std::string>(r, "strategy", "routing.", "task-aware"));
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config key 'routing.strategy': ") + e.what());
    }
    c.temperature = read<double>(r, "temperature", "routing.", c.temperature);
    require(c.temperature > 0.0, "routing.temperature", "must be positive");
    if (r.contains("aggregator")) {
      c.aggregator = read<std::string>(r, "aggregator", "routing.", "");
      require(ids.contains(*c.aggregator), "routing.aggregator", "must name a council member");
    }
  }
  if (j.contains("value")) {
    const auto& v = j.at("value");
    reject_unknown(v, {"mode"}, "value.");
    try {
      c.value_mode = parse_value_mode(read<std::string>(v, "mode", "value.", "full"));
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config key 'value.mode': ") + e.what());
    }
  }
  if (j.contains("budget")) {
    const auto& b = j.at("budget");
    reject_unknown(b, {"K", "expansion_width", "max_depth", "c"}, "budget.");
    c.budget.iterations = read_count(b, "K", "budget.", c.budget.iterations);
    c.budget.expansion_width = read_count(b, "expansion_width", "budget.", c.budget.expansion_width);
    c.budget.max_depth = read_count(b, "max_depth", "budget.", c.budget.max_depth);
    c.budget.exploration = read<double>(b, "c", "budget.", c.budget.exploration);
    require(c.budget.iterations > 0, "budget.K", "must be positive");
    require(c.budget.expansion_width > 0, "budget.expansion_width", "must be positive");
    require(c.budget.max_depth > 0, "budget.max_depth", "must be positive");
    require(c.budget.exploration >= 0.0, "budget.c", "must be non-negative");
  }
  if (j.contains("success_threshold")) {
    c.success_threshold = read<double>(j, "success_threshold", "", 1.0);
    require(*c.success_threshold > 0.0 && *c.success_threshold <= 1.0, "success_threshold", "must be in (0, 1]");
  }
  if (j.contains("memory")) {
    const auto& m = j.at("memory");
    reject_unknown(m, {"capacity", "cold_start_prior", "dim", "load", "save", "share"}, "memory.");
    c.memory.capacity = read_count(m, "capacity", "memory.", c.memory.capacity);
    c.memory.cold_start_prior = read<double>(m, "cold_start_prior", "memory.", c.memory.cold_start_prior);
    c.embedding_dim = read_count(m, "dim", "memory.", c.embedding_dim);
    c.memory_load = read<std::string>(m, "load", "memory.", "");
    c.memory_save = read<std::string>(m, "save", "memory.", "");
    c.share_memory = read<bool>(m, "share", "memory.", true);
    require(c.memory.capacity > 0, "memory.capacity", "must be positive");
    require(c.memory.cold_start_prior >= 0.0 && c.memory.cold_start_prior <= 1.0, "memory.cold_start_prior",
            "must be in [0, 1]");
    require(c.embedding_dim > 0, "memory.dim", "must be positive");
  }
  c.workers = read_count(j, "workers", "", 1);
  require(c.workers > 0, "workers", "must be positive");
  if (j.contains("output")) {
    const auto& o = j.at("output");
    reject_unknown(o, {"metrics", "trace"}, "output.");
    c.metrics_path = read<std::string>(o, "metrics", "output.", "");
    c.trace_path = read<std::string>(o, "trace", "output.", "");
  }
  c.seeds = read<std::vector<std::uint64_t>>(j, "seeds", "", {});
  return c;
}

json RunConfig::to_json() const {
  json j{{"seed", seed},
         {"environment", environment},
         {"council", council},
         {"routing", {{"strategy", to_string(strategy)}, {"temperature", temperature}}},
         {"value", {{"mode", to_string(value_mode)}}},
         {"budget",
          {{"K", budget.iterations},
           {"expansion_width", budget.expansion_width},
           {"max_depth", budget.max_depth},
           {"c", budget.exploration}}},
         {"memory",
          {{"capacity", memory.capacity},
           {"cold_start_prior", memory.cold_start_prior},
           {"dim", embedding_dim},
           {"share", share_memory}}},
         {"workers", workers}};
  if (!environment_params.empty()) j["synthetic"] = environment_params;
  if (!tasks_path.empty()) j["tasks"] = tasks_path;
  if (generate_tasks > 0) j["generate_tasks"] = generate_tasks;
  if (warmup_tasks > 0) j["warmup_tasks"] = warmup_tasks;
  if (aggregator) j["routing"]["aggregator"] = *aggregator;
  if (success_threshold) j["success_threshold"] = *success_threshold;
  if (!memory_load.empty()) j["memory"]["load"] = memory_load;
  if (!memory_save.empty()) j["memory"]["save"] = memory_save;
  if (!backends.empty()) {
    j["backends"] = json::array();
    for (const auto& b : backends) {
      j["backends"].push_back({{"backend_id", b.backend_id},
                               {"endpoint", b.endpoint},
                               {"model", b.model},
                               {"credential_env", b.credential_env},
                               {"request_cap", b.request_cap}});
    }
  }
  if (!metrics_path.empty()) j["output"]["metrics"] = metrics_path;
  if (!trace_path.empty()) j["output"]["trace"] = trace_path;
  if (!seeds.empty()) j["seeds"] = seeds;
  return j;
}

std::shared_ptr<const Expert> make_expert(const json& spec, const RunConfig& config,
                                          std::shared_ptr<LlmGateway>& gateway) {
  if (spec.value("kind", std::string("scripted")) != "llm") return make_scripted_expert(spec);
  const auto id = spec.at("expert_id").get<std::string>();
  const auto backend_id = spec.at("backend").get<std::string>();
  if (!gateway) gateway = std::make_shared<LlmGateway>();
  if (!gateway->has_backend(backend_id)) {
    auto it = std::find_if(config.backends.begin(), config.backends.end(),
                           [&](const auto& b) { return b.backend_id == backend_id; });
    if (it == config.backends.end()) throw ConfigError("no backend '" + backend_id + "' configured");
    gateway->add_backend(backend_id, make_http_backend(*it), it->request_cap);
  }
  LlmExpertOptions o;
  o.backend_id = backend_id;
  o.act_temperature = spec.value("act_temperature", o.act_temperature);
  o.evaluate_temperature = spec.value("evaluate_temperature", o.evaluate_temperature);
  o.max_tokens = spec.value("max_tokens", o.max_tokens);
  o.timeout = std::chrono::milliseconds(spec.value("timeout_ms", o.timeout.count()));
  o.templates = config.prompts;
  return std::make_shared<LlmExpert>(ExpertDescriptor{id, spec.value("display_name", id), ExpertKind::llm_backed},
                                     gateway, std::move(o));
}

RunContext build_context(const RunConfig& config) {
  RunContext ctx;
  ctx.environment = make_environment(config.environment, config.environment_params);
  std::vector<std::shared_ptr<const Expert>> members;
  for (std::size_t i = 0; i < config.council.size(); ++i) {
    try {
      members.push_back(make_expert(config.council[i], config, ctx.gateway));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config key 'council[" + std::to_string(i) + "]': " + e.what());
    }
  }
  ctx.council = std::make_unique<Council>(std::move(members),
                                          std::make_shared<TrigramEmbedder>(config.embedding_dim), config.memory);
  if (!config.memory_load.empty()) {
    load_memory_file(config.memory_load, ctx.council->profiles(), ctx.council->embedder(), config.memory);
  }
  return ctx;
}

std::vector<TaskSpec> load_tasks(const RunConfig& config, const Environment& env) {
  std::vector<TaskSpec> tasks;
  if (!config.tasks_path.empty()) {
    tasks = read_task_file(config.tasks_path);
  } else if (config.environment == "synthetic") {
    tasks = make_synthetic_tasks(SyntheticConfig::from_json(config.environment_params), config.generate_tasks,
                                 config.seed, "syn-");
  } else {
    tasks = game24_solvable_tasks(config.generate_tasks, config.seed);
  }
  for (const auto& t : tasks) {
    if (t.environment != env.name()) {
      throw ConfigError("task '" + t.task_id + "' targets environment '" + t.environment + "' but config key "
                        "'environment' is '" + env.name() + "'");
    }
    env.validate(t);
  }
  return tasks;
}

json RunSummary::to_json() const {
  json tok = json::object();
  for (const auto& [id, u] : tokens) {
    tok[id] = {{"requests", u.requests},
               {"failures", u.failures},
               {"prompt_tokens", u.prompt_tokens},
               {"completion_tokens", u.completion_tokens}};
  }
  return {{"summary", true},
          {"tasks", tasks},
          {"warmup_tasks", warmup},
          {"success_rate", optional_json(success_rate)},
          {"mean_reward", optional_json(mean_reward)},
          {"mean_steps", optional_json(mean_steps)},
          {"mean_nodes", optional_json(mean_nodes)},
          {"mean_nodes_success", optional_json(mean_nodes_success)},
          {"tokens", tok}};
}

RunSummary summarize(std::span<const PlanResult> rows) {
  RunSummary s;
  s.tasks = rows.size();
  if (rows.empty()) return s;
  std::vector<double> success, reward, nodes, steps, nodes_success;
  for (const auto& r : rows) {
    success.push_back(r.success ? 1.0 : 0.0);
    reward.push_back(r.reward);
    nodes.push_back(static_cast<double>(r.nodes_expanded));
    if (r.success) {
      steps.push_back(static_cast<double>(r.max_depth_reached));
      nodes_success.push_back(static_cast<double>(r.nodes_expanded));
    }
  }
  s.success_rate = mean_of(success);
  s.mean_reward = mean_of(reward);
  s.mean_nodes = mean_of(nodes);
  if (!steps.empty()) {
    s.mean_steps = mean_of(steps);
    s.mean_nodes_success = mean_of(nodes_success);
  }
  return s;
}

json row_to_json(const PlanResult& row, bool warmup) {
  return {{"task_id", row.task_id},
          {"episode_id", row.episode_id},
          {"warmup", warmup},
          {"success", row.success},
          {"reward", row.reward},
          {"iterations_used", row.iterations_used},
          {"nodes_expanded", row.nodes_expanded},
          {"max_depth_reached", row.max_depth_reached},
          {"trajectory", serialize_trajectory(row.best_trajectory)},
          {"experts", row.per_step_expert},
          {"diagnostics", row.diagnostics}};
}

namespace {

// Episode ids must not repeat across runs that share a memory file, or a new
// run would retrieve under an id whose outcome is already settled. Fresh
// memory keeps the plain "index:task" ids; loaded memory that already holds
// generation g (plain ids count as generation 1) gets the prefix "g<g+1>/".
std::string episode_prefix(const Council& council) {
  bool any = false;
  std::size_t generation = 0;
  for (const auto& [id, profile] : council.profiles()) {
    for (const auto& seg : profile.segments()) {
      for (const auto& e : seg.ledger) {
        any = true;
        std::size_t g = 1;
        const auto slash = e.episode_id.find('/');
        if (e.episode_id.size() > 1 && e.episode_id[0] == 'g' && slash != std::string::npos) {
          const auto digits = e.episode_id.substr(1, slash - 1);
          if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            g = std::stoul(digits);
          }
        }
        generation = std::max(generation, g);
      }
    }
  }
  return any ? "g" + std::to_string(generation + 1) + "/" : "";
}

}  // namespace

RunMetrics run_tasks(const RunConfig& config, const Environment& env, std::span<const TaskSpec> tasks,
                     Council& council, TraceSink* trace) {
  PlannerConfig pc;
  pc.budget = config.budget;
  pc.strategy = config.strategy;
  pc.temperature = config.temperature;
  pc.aggregator = config.aggregator;
  pc.value_mode = config.value_mode;
  pc.success_threshold = config.success_threshold;
  pc.seed = config.seed;

  const auto prefix = episode_prefix(council);
  auto episode_config = [&](std::size_t i) {
    auto c = pc;
    c.episode_id = prefix + std::to_string(i) + ":" + tasks[i].task_id;
    return c;
  };

  std::vector<PlanResult> results(tasks.size());
  if (config.share_memory) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      results[i] = search(env, tasks[i], council, episode_config(i), trace);
    }
  } else {
    // Independent episodes: each starts from the initial profiles and buffers
    // its trace so output order matches task order.
    const Council initial = council;
    std::vector<BufferedTrace> buffers(tasks.size());
    auto one = [&](std::size_t i) {
      Council local = initial;
      results[i] = search(env, tasks[i], local, episode_config(i), trace ? &buffers[i] : nullptr);
    };
    const std::size_t workers = std::max<std::size_t>(1, config.workers);
    for (std::size_t start = 0; start < tasks.size(); start += workers) {
      std::vector<std::future<void>> batch;
      for (std::size_t i = start; i < std::min(tasks.size(), start + workers); ++i) {
        batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, one, i));
      }
      for (auto& f : batch) f.get();
    }
    if (trace) {
      for (const auto& b : buffers) b.replay_into(*trace);
    }
  }

  RunMetrics m;
  const std::size_t warm = std::min(config.warmup_tasks, results.size());
  m.warmup_rows.assign(std::make_move_iterator(results.begin()),
                       std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>(warm)));
  m.rows.assign(std::make_move_iterator(results.begin() + static_cast<std::ptrdiff_t>(warm)),
                std::make_move_iterator(results.end()));
  m.summary = summarize(m.rows);
  m.summary.warmup = warm;
  return m;
}

void write_metrics(std::ostream& out, const RunMetrics& metrics) {
  std::vector<PlanResult> reread;
  for (const auto& r : metrics.warmup_rows) out << row_to_json(r, true).dump() << '\n';
  for (const auto& r : metrics.rows) {
    const auto row = row_to_json(r, false);
    out << row.dump() << '\n';
    PlanResult back;
    back.success = row.at("success").get<bool>();
    back.reward = row.at("reward").get<double>();
    back.nodes_expanded = row.at("nodes_expanded").get<std::size_t>();
    back.max_depth_reached = row.at("max_depth_reached").get<std::size_t>();
    reread.push_back(std::move(back));
  }
  auto check = summarize(reread);
  check.warmup = metrics.summary.warmup;
  check.tokens = metrics.summary.tokens;
  if (check.to_json() != metrics.summary.to_json()) {
    throw InvalidState("metrics summary does not match its rows");
  }
  out << metrics.summary.to_json().dump() << '\n';
}

RunMetrics run(const RunConfig& config) {
  auto ctx = build_context(config);
  const auto tasks = load_tasks(config, *ctx.environment);

  std::ofstream trace_file;
  std::unique_ptr<JsonlTraceWriter> trace;
  if (!config.trace_path.empty()) {
    trace_file.open(config.trace_path);
    if (!trace_file) throw ConfigError("config key 'output.trace': cannot write " + config.trace_path);
    trace = std::make_unique<JsonlTraceWriter>(trace_file);
  }
  auto metrics = run_tasks(config, *ctx.environment, tasks, *ctx.council, trace.get());
  if (ctx.gateway) metrics.summary.tokens = ctx.gateway->usage();

  if (!config.metrics_path.empty()) {
    std::ofstream out(config.metrics_path);
    if (!out) throw ConfigError("config key 'output.metrics': cannot write " + config.metrics_path);
    write_metrics(out, metrics);
  }
  if (!config.memory_save.empty()) save_memory_file(config.memory_save, ctx.council->profiles());
  return metrics;
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::routing: return "routing";
    case AblationAxis::value_signal: return "value-signal";
    case AblationAxis::council_size: return "council-size";
  }
  return "routing";
}

AblationAxis parse_ablation_axis(const std::string& name) {
  for (auto a : {AblationAxis::routing, AblationAxis::value_signal, AblationAxis::council_size}) {
    if (to_string(a) == name) return a;
  }
  throw InvalidInput("unknown ablation axis '" + name + "'");
}

std::vector<AblationVariant> ablation_variants(const RunConfig& base, AblationAxis axis) {
  std::vector<AblationVariant> out;
  switch (axis) {
    case AblationAxis::routing:
      for (auto s : {RoutingStrategy::task_aware, RoutingStrategy::random, RoutingStrategy::round_robin,
                     RoutingStrategy::voting, RoutingStrategy::collaborative}) {
        auto c = base;
        c.strategy = s;
        out.push_back({to_string(s), std::move(c)});
      }
      break;
    case AblationAxis::value_signal:
      for (auto m : {ValueMode::full, ValueMode::llm_only, ValueMode::sms_only, ValueMode::env_only}) {
        auto c = base;
        c.value_mode = m;
        out.push_back({to_string(m), std::move(c)});
      }
      break;
    case AblationAxis::council_size: {
      const std::size_t n = base.council.size();
      std::vector<std::vector<std::size_t>> subsets;
      for (std::size_t i = 0; i < n; ++i) subsets.push_back({i});
      if (n > 2) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = i + 1; k < n; ++k) subsets.push_back({i, k});
        }
      }
      std::vector<std::size_t> all(n);
      for (std::size_t i = 0; i < n; ++i) all[i] = i;
      if (n > 1) subsets.push_back(all);
      for (const auto& s : subsets) {
        auto c = base;
        c.council.clear();
        std::string label;
        for (std::size_t i : s) {
          c.council.push_back(base.council[i]);
          label += (label.empty() ? "" : "+") + base.council[i].at("expert_id").get<std::string>();
        }
        if (c.aggregator && std::none_of(c.council.begin(), c.council.end(), [&](const json& e) {
              return e.at("expert_id").get<std::string>() == *c.aggregator;
            })) {
          c.aggregator.reset();
        }
        out.push_back({label, std::move(c)});
      }
      break;
    }
  }
  return out;
}

std::vector<AblationRow> ablation(const RunConfig& base, AblationAxis axis) {
  const auto seeds = base.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : base.seeds;
  std::vector<AblationRow> rows;
  for (const auto& variant : ablation_variants(base, axis)) {
    AblationRow row;
    row.label = variant.label;
    row.seeds = seeds;
    std::vector<double> success, nodes, steps;
    for (auto seed : seeds) {
      auto c = variant.config;
      c.seed = seed;
      c.metrics_path.clear();
      c.trace_path.clear();
      c.memory_save.clear();
      auto ctx = build_context(c);
      const auto tasks = load_tasks(c, *ctx.environment);
      auto m = run_tasks(c, *ctx.environment, tasks, *ctx.council);
      if (ctx.gateway) m.summary.tokens = ctx.gateway->usage();
      success.push_back(m.summary.success_rate.value_or(0.0));
      if (m.summary.mean_nodes_success) nodes.push_back(*m.summary.mean_nodes_success);
      if (m.summary.mean_steps) steps.push_back(*m.summary.mean_steps);
      row.per_seed.push_back(m.summary);
    }
    row.mean_success = mean_of(success);
    if (!nodes.empty()) row.mean_nodes_success = mean_of(nodes);
    if (!steps.empty()) row.mean_steps = mean_of(steps);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_table(std::ostream& out, std::span<const AblationRow> rows) {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  out << std::left << std::setw(static_cast<int>(width)) << "variant";
  if (!rows.empty()) {
    for (auto s : rows.front().seeds) out << "  " << std::setw(8) << ("seed " + std::to_string(s));
  }
  out << "  " << std::setw(8) << "mean" << "  " << std::setw(12) << "nodes/solved" << "  " << "steps\n";
  auto fmt = [](std::optional<double> v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << *v;
    return s.str();
  };
  for (const auto& r : rows) {
    out << std::setw(static_cast<int>(width)) << r.label;
    for (const auto& s : r.per_seed) out << "  " << std::setw(8) << fmt(s.success_rate.value_or(0.0));
    out << "  " << std::setw(8) << fmt(r.mean_success) << "  " << std::setw(12) << fmt(r.mean_nodes_success)
        << "  " << fmt(r.mean_steps) << '\n';
  }
}

json ablation_to_json(std::span<const AblationRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json per_seed = json::array();
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
      auto s = r.per_seed[i].to_json();
      s.erase("summary");
      s["seed"] = r.seeds[i];
      per_seed.push_back(std::move(s));
    }
    out.push_back({{"variant", r.label},
                   {"mean_success", r.mean_success},
                   {"mean_nodes_success", optional_json(r.mean_nodes_success)},
                   {"mean_steps", optional_json(r.mean_steps)},
                   {"per_seed", per_seed}});
  }
  return out;
}

std::size_t save_memory_file(const std::string& path, const ProfileMap& profiles) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write memory file " + path);
  return save_profiles(out, profiles);
}

std::size_t load_memory_file(const std::string& path, ProfileMap& profiles, const Embedder& embedder,
                             const MemoryOptions& options) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read memory file " + path);
  return load_profiles(in, profiles, embedder, options.capacity, options.cold_start_prior);
}

}  // namespace council
