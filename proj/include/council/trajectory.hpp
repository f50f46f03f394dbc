#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace council {

using ExpertId = std::string;
using EpisodeId = std::string;
using SegmentId = std::uint64_t;

// Environment-rendered observation. Text is non-empty after trimming.
class Observation {
 public:
  explicit Observation(std::string text);
  const std::string& text() const noexcept { return text_; }
  friend bool operator==(const Observation&, const Observation&) = default;

 private:
  std::string text_;
};

// Agent-emitted action. Text is non-empty after trimming.
class Action {
 public:
  explicit Action(std::string text);
  const std::string& text() const noexcept { return text_; }
  friend bool operator==(const Action&, const Action&) = default;

 private:
  std::string text_;
};

struct Step {
  Observation observation;
  Action action;
  friend bool operator==(const Step&, const Step&) = default;
};

// Ordered (observation, action) pairs. Depth is the number of steps.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<Step> steps) : steps_(std::move(steps)) {}

  const std::vector<Step>& steps() const noexcept { return steps_; }
  std::size_t depth() const noexcept { return steps_.size(); }
  bool empty() const noexcept { return steps_.empty(); }

  // Copy with one more step appended.
  Trajectory extended(Step step) const;
  // First `n` steps.
  Trajectory prefix(std::size_t n) const;
  bool is_prefix_of(const Trajectory& other) const;

  std::vector<Action> actions() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<Step> steps_;
};

struct RetrievalRecord {
  ExpertId expert_id;
  SegmentId segment_id;
  std::size_t usage_count;
};

struct EpisodeRecord {
  EpisodeId episode_id;
  std::string task_id;
  Trajectory final_trajectory;
  double reward = 0.0;
  bool success = false;
  std::vector<ExpertId> per_step_expert;
  std::vector<RetrievalRecord> retrievals;
};

bool is_blank(std::string_view text);

// [tau_1, ..., tau_d]; tau_t holds the first t steps.
std::vector<Trajectory> decompose_prefixes(const Trajectory& traj);

// "OBS: <o>\nACT: <a>\n" per step. Backslashes and newlines in the texts are
// escaped so the encoding is injective.
std::string serialize_trajectory(const Trajectory& traj);

// Text used to embed a routing query: the serialized prefix, or for the
// step-0 decision point the initial observation alone.
std::string query_text(const Trajectory& prefix, const Observation& initial);

// Inverse of serialize_trajectory. Throws ParseFailure on malformed input.
Trajectory parse_trajectory(std::string_view text);

std::string escape_line(std::string_view text);
std::string unescape_line(std::string_view text);

}  // namespace council
