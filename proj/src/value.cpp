#include "council/value.hpp"

#include <algorithm>
#include <cmath>

#include "council/errors.hpp"

namespace council {

std::string to_string(ValueMode mode) {
  switch (mode) {
    case ValueMode::full: return "full";
    case ValueMode::llm_only: return "llm-only";
    case ValueMode::sms_only: return "sms-only";
    case ValueMode::env_only: return "env-only";
  }
  return "full";
}

ValueMode parse_value_mode(const std::string& name) {
  for (auto m : {ValueMode::full, ValueMode::llm_only, ValueMode::sms_only, ValueMode::env_only}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidInput("unknown value mode '" + name + "'");
}

LlmValue llm_value(const Council& council, const ExpertContext& ctx, const Trajectory& prefix, Rng& rng) {
  if (council.size() == 0) throw InvalidInput("council is empty");
  const auto& evaluator = council.member(uniform_index(rng, council.size()));
  return {evaluate_plausibility(evaluator, ctx, prefix), evaluator.id()};
}

SmsValue sms_value(ExpertProfile& routed_profile, const Trajectory& prefix, const Embedder& embedder,
                   const EpisodeId& episode_id) {
  auto match = best_match(routed_profile, prefix, embedder);
  if (!match) return {routed_profile.cold_start_prior(), std::nullopt, 0};
  SmsValue out{match->utility, match->segment_id, 0};
  for (const auto& e : routed_profile.record_retrieval(match->segment_id, episode_id)) {
    if (e.episode_id == episode_id) out.usage_count = e.usage_count;
  }
  return out;
}

std::vector<double> normalize(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("cannot normalize an empty list");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(values.size());
  const double range = *hi - *lo;
  for (double v : values) out.push_back(range > 0.0 ? (v - *lo) / range : 0.5);
  return out;
}

double population_stddev(std::span<const double> values) {
  // Identical values must give exactly 0, which rounding in the mean can miss.
  if (values.empty() || std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    return 0.0;
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

double fusion_weight(double sigma_llm, double sigma_sms) {
  if (sigma_llm < 0.0 || sigma_sms < 0.0 || std::isnan(sigma_llm) || std::isnan(sigma_sms)) {
    throw InvalidInput("standard deviations must be non-negative");
  }
  const double total = sigma_llm + sigma_sms;
  return total > 0.0 ? sigma_llm / total : 0.5;
}

void fuse_batch(SiblingBatch& batch, ValueMode mode) {
  if (batch.children.empty()) throw InvalidInput("sibling batch is empty");
  std::vector<double> llm, sms;
  for (const auto& c : batch.children) {
    llm.push_back(c.v_llm);
    sms.push_back(c.v_sms);
  }
  batch.sigma_llm = population_stddev(llm);
  batch.sigma_sms = population_stddev(sms);
  batch.llm_normalized = normalize(llm);
  batch.sms_normalized = normalize(sms);
  switch (mode) {
    case ValueMode::full: batch.alpha = fusion_weight(batch.sigma_llm, batch.sigma_sms); break;
    case ValueMode::llm_only: batch.alpha = 1.0; break;
    case ValueMode::sms_only: batch.alpha = 0.0; break;
    case ValueMode::env_only: batch.alpha = 0.5; break;
  }
  batch.q.clear();
  for (std::size_t i = 0; i < batch.children.size(); ++i) {
    const double q = mode == ValueMode::env_only
                         ? 0.5
                         : batch.alpha * batch.llm_normalized[i] + (1.0 - batch.alpha) * batch.sms_normalized[i];
    batch.q.push_back(std::clamp(q, 0.0, 1.0));
  }
}

}  // namespace council
