#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "council/expert.hpp"

namespace council {

// Deterministic experts for offline runs. Every output is a pure function of
// (expert id, prefix, exemplar, k, context seed).

// Looks up scripted actions by serialized prefix, falling back to the current
// observation text. Unknown prefixes produce no proposals.
class TableExpert final : public Expert {
 public:
  struct Options {
    std::map<std::string, std::vector<std::string>> actions;
    std::map<std::string, double> scores;
    double default_score = kNeutralPlausibility;
  };
  TableExpert(ExpertId id, Options options);

  const ExpertDescriptor& descriptor() const override { return descriptor_; }
  std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix,
                                    const Trajectory* exemplar, std::size_t k) const override;
  double score(const ExpertContext& ctx, const Trajectory& prefix) const override;

 private:
  ExpertDescriptor descriptor_;
  Options options_;
};

// Specialist backed by the environment's oracle, restricted to one task
// family (empty = every family). Inside its family it proposes the oracle
// actions, optionally padded with distractors and shuffled, and scores a
// prefix by the environment's progress measure. Outside its family it guesses
// uniformly and scores `off_family_score`, unless `judge_any_family` is set,
// in which case it scores progress everywhere. Gaussian noise of `noise`
// standard deviation is added to every score.
class OracleExpert final : public Expert {
 public:
  struct Options {
    std::string family;
    bool pad_with_distractors = false;
    bool shuffle = false;
    double noise = 0.0;
    double off_family_score = kNeutralPlausibility;
    bool judge_any_family = false;
  };
  OracleExpert(ExpertId id, Options options);

  const ExpertDescriptor& descriptor() const override { return descriptor_; }
  std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix,
                                    const Trajectory* exemplar, std::size_t k) const override;
  double score(const ExpertContext& ctx, const Trajectory& prefix) const override;
  const Options& options() const noexcept { return options_; }

 private:
  bool in_family(const ExpertContext& ctx) const;

  ExpertDescriptor descriptor_;
  Options options_;
};

// Uniform guesses over the environment's valid actions; scores `score_value`
// plus optional noise.
class RandomExpert final : public Expert {
 public:
  RandomExpert(ExpertId id, double score_value = kNeutralPlausibility, double noise = 0.0);

  const ExpertDescriptor& descriptor() const override { return descriptor_; }
  std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix,
                                    const Trajectory* exemplar, std::size_t k) const override;
  double score(const ExpertContext& ctx, const Trajectory& prefix) const override;

 private:
  ExpertDescriptor descriptor_;
  double score_value_;
  double noise_;
};

// Proposes like RandomExpert, always scores `value`.
class ConstantEvaluatorExpert final : public Expert {
 public:
  ConstantEvaluatorExpert(ExpertId id, double value);

  const ExpertDescriptor& descriptor() const override { return descriptor_; }
  std::vector<std::string> generate(const ExpertContext& ctx, const Trajectory& prefix,
                                    const Trajectory* exemplar, std::size_t k) const override;
  double score(const ExpertContext&, const Trajectory&) const override { return value_; }

 private:
  ExpertDescriptor descriptor_;
  double value_;
};

// Builds a scripted expert from a council entry:
// {"expert_id", "kind": "scripted", "script": "table"|"oracle"|"random"|"constant", ...}
std::shared_ptr<const Expert> make_scripted_expert(const nlohmann::json& spec);

}  // namespace council
