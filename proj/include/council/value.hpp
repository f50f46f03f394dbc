#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "council/expert.hpp"
#include "council/random.hpp"

namespace council {

enum class ValueMode { full, llm_only, sms_only, env_only };

std::string to_string(ValueMode mode);
ValueMode parse_value_mode(const std::string& name);

struct ValueSignals {
  double v_llm = kNeutralPlausibility;
  double v_sms = kColdStartPrior;
  ExpertId evaluator_expert;
  std::optional<SegmentId> matched_segment;
};

struct LlmValue {
  double score = kNeutralPlausibility;
  ExpertId evaluator;
};

// Plausibility from an evaluator drawn uniformly from the council.
LlmValue llm_value(const Council& council, const ExpertContext& ctx, const Trajectory& prefix, Rng& rng);

struct SmsValue {
  double score = kColdStartPrior;
  std::optional<SegmentId> segment;
  std::size_t usage_count = 0;  // ledger count for this episode after recording
};

// Utility of the best-matching segment in the routed expert's profile, with
// the lookup recorded against `episode_id`. Empty profile -> the profile's
// cold-start prior and no segment.
SmsValue sms_value(ExpertProfile& routed_profile, const Trajectory& prefix, const Embedder& embedder,
                   const EpisodeId& episode_id);

// Min-max over the list; a constant list maps to 0.5 everywhere.
std::vector<double> normalize(std::span<const double> values);
double population_stddev(std::span<const double> values);
// sigma_llm / (sigma_llm + sigma_sms), 0.5 when both are zero.
double fusion_weight(double sigma_llm, double sigma_sms);

// The children produced by one expansion and their fused values.
struct SiblingBatch {
  std::vector<ValueSignals> children;
  std::vector<double> llm_normalized;
  std::vector<double> sms_normalized;
  std::vector<double> q;
  double sigma_llm = 0.0;
  double sigma_sms = 0.0;
  double alpha = 0.5;
};

// Fills sigma, alpha, the normalized lists and q. llm-only and sms-only pin
// alpha to 1 and 0; env-only leaves every q at 0.5 because that mode values
// nodes by rollouts instead.
void fuse_batch(SiblingBatch& batch, ValueMode mode = ValueMode::full);

}  // namespace council
