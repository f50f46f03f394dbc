#include "council/scripted.hpp"

#include <algorithm>
#include <cmath>

#include "council/errors.hpp"
#include "council/random.hpp"

namespace council {

namespace {

std::uint64_t call_seed(const ExpertContext& ctx, const ExpertId& id, const Trajectory& prefix,
                        std::uint64_t salt) {
  std::uint64_t s = combine_seed(ctx.seed, hash_text(id));
  s = combine_seed(s, hash_text(ctx.task.task_id));
  s = combine_seed(s, hash_text(serialize_trajectory(prefix)));
  return combine_seed(s, salt);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

std::vector<std::string> sample_actions(const ExpertContext& ctx, const Trajectory& prefix,
                                        std::size_t k, Rng& rng,
                                        const std::vector<std::string>& exclude = {}) {
  const auto history = prefix.actions();
  std::vector<std::string> pool;
  for (const auto& a : ctx.env.candidate_actions(ctx.task, history)) {
    if (std::find(exclude.begin(), exclude.end(), a.text()) == exclude.end()) pool.push_back(a.text());
  }
  shuffle_in_place(pool, rng);
  if (pool.size() > k) pool.resize(k);
  return pool;
}

double noisy(double value, double sigma, Rng& rng) {
  if (sigma <= 0.0) return value;
  return value + sigma * standard_normal(rng);
}

constexpr std::uint64_t kProposeSalt = 0x70726f70;
constexpr std::uint64_t kScoreSalt = 0x73636f72;

}  // namespace

TableExpert::TableExpert(ExpertId id, Options options)
    : descriptor_{id, id, ExpertKind::scripted}, options_(std::move(options)) {}

std::vector<std::string> TableExpert::generate(const ExpertContext& ctx, const Trajectory& prefix,
                                               const Trajectory*, std::size_t k) const {
  auto it = options_.actions.find(serialize_trajectory(prefix));
  if (it == options_.actions.end()) it = options_.actions.find(ctx.current.text());
  if (it == options_.actions.end()) return {};
  std::vector<std::string> out = it->second;
  if (out.size() > k) out.resize(k);
  return out;
}

double TableExpert::score(const ExpertContext& ctx, const Trajectory& prefix) const {
  auto it = options_.scores.find(serialize_trajectory(prefix));
  if (it == options_.scores.end()) it = options_.scores.find(ctx.current.text());
  return it == options_.scores.end() ? options_.default_score : it->second;
}

OracleExpert::OracleExpert(ExpertId id, Options options)
    : descriptor_{id, id, ExpertKind::scripted}, options_(std::move(options)) {}

bool OracleExpert::in_family(const ExpertContext& ctx) const {
  return options_.family.empty() || ctx.env.family(ctx.task) == options_.family;
}

std::vector<std::string> OracleExpert::generate(const ExpertContext& ctx, const Trajectory& prefix,
                                                const Trajectory*, std::size_t k) const {
  Rng rng(call_seed(ctx, id(), prefix, kProposeSalt));
  if (!in_family(ctx)) return sample_actions(ctx, prefix, k, rng);
  std::vector<std::string> out;
  for (const auto& a : ctx.env.oracle_actions(ctx.task, prefix.actions())) out.push_back(a.text());
  if (out.size() > k) out.resize(k);
  if (options_.pad_with_distractors && out.size() < k) {
    for (auto& d : sample_actions(ctx, prefix, k - out.size(), rng, out)) out.push_back(std::move(d));
  }
  if (options_.shuffle) shuffle_in_place(out, rng);
  return out;
}

double OracleExpert::score(const ExpertContext& ctx, const Trajectory& prefix) const {
  Rng rng(call_seed(ctx, id(), prefix, kScoreSalt));
  const double base = in_family(ctx) || options_.judge_any_family
                           ? ctx.env.progress(ctx.task, prefix.actions())
                           : options_.off_family_score;
  return std::clamp(noisy(base, options_.noise, rng), 0.0, 1.0);
}

RandomExpert::RandomExpert(ExpertId id, double score_value, double noise)
    : descriptor_{id, id, ExpertKind::scripted}, score_value_(score_value), noise_(noise) {}

std::vector<std::string> RandomExpert::generate(const ExpertContext& ctx, const Trajectory& prefix,
                                                const Trajectory*, std::size_t k) const {
  Rng rng(call_seed(ctx, id(), prefix, kProposeSalt));
  return sample_actions(ctx, prefix, k, rng);
}

double RandomExpert::score(const ExpertContext& ctx, const Trajectory& prefix) const {
  Rng rng(call_seed(ctx, id(), prefix, kScoreSalt));
  return std::clamp(noisy(score_value_, noise_, rng), 0.0, 1.0);
}

ConstantEvaluatorExpert::ConstantEvaluatorExpert(ExpertId id, double value)
    : descriptor_{id, id, ExpertKind::scripted}, value_(value) {}

std::vector<std::string> ConstantEvaluatorExpert::generate(const ExpertContext& ctx,
                                                           const Trajectory& prefix, const Trajectory*,
                                                           std::size_t k) const {
  Rng rng(call_seed(ctx, id(), prefix, kProposeSalt));
  return sample_actions(ctx, prefix, k, rng);
}

std::shared_ptr<const Expert> make_scripted_expert(const nlohmann::json& spec) {
  const auto id = spec.at("expert_id").get<std::string>();
  const auto script = spec.value("script", std::string("oracle"));
  if (script == "oracle") {
    OracleExpert::Options o;
    o.family = spec.value("family", std::string());
    o.pad_with_distractors = spec.value("pad_with_distractors", false);
    o.shuffle = spec.value("shuffle", false);
    o.noise = spec.value("noise", 0.0);
    o.off_family_score = spec.value("off_family_score", kNeutralPlausibility);
    o.judge_any_family = spec.value("judge_any_family", false);
    if (o.noise < 0.0) throw InvalidInput("council." + id + ".noise must be non-negative");
    return std::make_shared<OracleExpert>(id, o);
  }
  if (script == "random") {
    return std::make_shared<RandomExpert>(id, spec.value("score", kNeutralPlausibility),
                                          spec.value("noise", 0.0));
  }
  if (script == "constant") {
    return std::make_shared<ConstantEvaluatorExpert>(id, spec.value("score", kNeutralPlausibility));
  }
  if (script == "table") {
    TableExpert::Options o;
    if (spec.contains("actions")) o.actions = spec.at("actions").get<std::map<std::string, std::vector<std::string>>>();
    if (spec.contains("scores")) o.scores = spec.at("scores").get<std::map<std::string, double>>();
    o.default_score = spec.value("score", kNeutralPlausibility);
    return std::make_shared<TableExpert>(id, std::move(o));
  }
  throw InvalidInput("council." + id + ".script: unknown script '" + script + "'");
}

}  // namespace council
