#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "council/embedding.hpp"
#include "council/environment.hpp"
#include "council/memory.hpp"
#include "council/trajectory.hpp"

namespace council {

enum class ExpertKind { scripted, llm_backed };

std::string to_string(ExpertKind kind);

struct ExpertDescriptor {
  ExpertId expert_id;
  std::string display_name;
  ExpertKind kind = ExpertKind::scripted;
};

struct ActionProposal {
  Action action;
  ExpertId proposer;
};

// Everything an expert may look at besides the prefix itself.
struct ExpertContext {
  const Environment& env;
  const TaskSpec& task;
  Observation current;     // observation reached after the prefix
  std::uint64_t seed = 0;  // episode seed; scripted experts mix in the prefix
};

// One council member. Implementations must tolerate concurrent calls.
class Expert {
 public:
  virtual ~Expert() = default;

  virtual const ExpertDescriptor& descriptor() const = 0;
  const ExpertId& id() const { return descriptor().expert_id; }

  // Raw candidate texts, possibly with duplicates. Backend failures throw
  // ExpertUnavailable.
  virtual std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix,
                                            const Trajectory* exemplar, std::size_t k) const = 0;

  // Raw plausibility of the prefix. May throw on backend or parse failure.
  virtual double score(const ExpertContext& ctx, const Trajectory& prefix) const = 0;

  // Aggregator role for collaborative routing: merge pooled proposals into at
  // most k candidates. The default interleaves proposers in council order.
  virtual std::vector<std::string> aggregate(const ExpertContext& ctx, const Trajectory& prefix,
                                             std::span<const ActionProposal> pooled,
                                             std::size_t k) const;
};

// Up to k distinct proposals (exact text duplicates and blank texts dropped).
std::vector<ActionProposal> propose_actions(const Expert& expert, const ExpertContext& ctx,
                                            const Trajectory& prefix, const Trajectory* exemplar,
                                            std::size_t k);

inline constexpr double kNeutralPlausibility = 0.5;

// Score in [0, 1]. A failed or unparseable evaluation is retried once, then
// falls back to 0.5. ConfigError is not swallowed.
double evaluate_plausibility(const Expert& expert, const ExpertContext& ctx, const Trajectory& prefix);

struct MemoryOptions {
  std::size_t capacity = kDefaultProfileCapacity;
  double cold_start_prior = kColdStartPrior;
};

// Ordered experts plus one success-memory profile per member.
class Council {
 public:
  Council(std::vector<std::shared_ptr<const Expert>> members, std::shared_ptr<const Embedder> embedder,
          MemoryOptions memory = {});

  std::size_t size() const noexcept { return members_.size(); }
  const std::vector<std::shared_ptr<const Expert>>& members() const noexcept { return members_; }
  const Expert& member(std::size_t index) const { return *members_.at(index); }
  const Expert& member(const ExpertId& id) const;
  std::size_t index_of(const ExpertId& id) const;
  bool any_llm_backed() const;

  ExpertProfile& profile(const ExpertId& id);
  const ExpertProfile& profile(const ExpertId& id) const;
  ProfileMap& profiles() noexcept { return profiles_; }
  const ProfileMap& profiles() const noexcept { return profiles_; }

  const Embedder& embedder() const noexcept { return *embedder_; }
  std::shared_ptr<const Embedder> shared_embedder() const noexcept { return embedder_; }
  const MemoryOptions& memory_options() const noexcept { return memory_; }

  // A council of the named members, carrying over their profiles.
  Council subset(std::span<const ExpertId> ids) const;

 private:
  std::vector<std::shared_ptr<const Expert>> members_;
  std::shared_ptr<const Embedder> embedder_;
  MemoryOptions memory_;
  ProfileMap profiles_;
};

}  // namespace council
