#include "council/expert.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "council/errors.hpp"

namespace council {

std::string to_string(ExpertKind kind) {
  return kind == ExpertKind::scripted ? "scripted" : "llm-backed";
}

std::vector<std::string> Expert::aggregate(const ExpertContext&, const Trajectory&,
                                           std::span<const ActionProposal> pooled,
                                           std::size_t k) const {
  // Round-robin over proposers, keeping each proposer's own order.
  std::vector<ExpertId> order;
  for (const auto& p : pooled) {
    if (std::find(order.begin(), order.end(), p.proposer) == order.end()) order.push_back(p.proposer);
  }
  std::vector<std::vector<std::string>> lists(order.size());
  for (const auto& p : pooled) {
    auto idx = std::find(order.begin(), order.end(), p.proposer) - order.begin();
    lists[static_cast<std::size_t>(idx)].push_back(p.action.text());
  }
  std::vector<std::string> out;
  for (std::size_t round = 0; out.size() < k; ++round) {
    bool any = false;
    for (const auto& list : lists) {
      if (round < list.size() && out.size() < k) {
        out.push_back(list[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

std::vector<ActionProposal> propose_actions(const Expert& expert, const ExpertContext& ctx,
                                            const Trajectory& prefix, const Trajectory* exemplar,
                                            std::size_t k) {
  if (k == 0) throw InvalidInput("proposal count k must be at least 1");
  std::vector<ActionProposal> out;
  std::set<std::string> seen;
  for (auto& text : expert.generate(ctx, prefix, exemplar, k)) {
    if (out.size() == k) break;
    if (is_blank(text) || !seen.insert(text).second) continue;
    out.push_back(ActionProposal{Action(std::move(text)), expert.id()});
  }
  return out;
}

double evaluate_plausibility(const Expert& expert, const ExpertContext& ctx, const Trajectory& prefix) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      const double v = expert.score(ctx, prefix);
      if (std::isnan(v)) continue;
      return std::clamp(v, 0.0, 1.0);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
    }
  }
  return kNeutralPlausibility;
}

Council::Council(std::vector<std::shared_ptr<const Expert>> members,
                 std::shared_ptr<const Embedder> embedder, MemoryOptions memory)
    : members_(std::move(members)), embedder_(std::move(embedder)), memory_(memory) {
  if (members_.empty()) throw InvalidInput("a council needs at least one member");
  if (!embedder_) throw InvalidInput("a council needs an embedder");
  for (const auto& m : members_) {
    if (!m) throw InvalidInput("null council member");
    if (!profiles_.emplace(m->id(), ExpertProfile(m->id(), memory_.capacity, memory_.cold_start_prior))
             .second) {
      throw InvalidInput("duplicate expert id '" + m->id() + "'");
    }
  }
}

const Expert& Council::member(const ExpertId& id) const { return *members_[index_of(id)]; }

std::size_t Council::index_of(const ExpertId& id) const {
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i]->id() == id) return i;
  }
  throw InvalidInput("no council member '" + id + "'");
}

bool Council::any_llm_backed() const {
  return std::any_of(members_.begin(), members_.end(), [](const auto& m) {
    return m->descriptor().kind == ExpertKind::llm_backed;
  });
}

ExpertProfile& Council::profile(const ExpertId& id) {
  auto it = profiles_.find(id);
  if (it == profiles_.end()) throw InvalidInput("no profile for expert '" + id + "'");
  return it->second;
}

const ExpertProfile& Council::profile(const ExpertId& id) const {
  auto it = profiles_.find(id);
  if (it == profiles_.end()) throw InvalidInput("no profile for expert '" + id + "'");
  return it->second;
}

Council Council::subset(std::span<const ExpertId> ids) const {
  std::vector<std::shared_ptr<const Expert>> chosen;
  for (const auto& id : ids) chosen.push_back(members_[index_of(id)]);
  Council out(std::move(chosen), embedder_, memory_);
  for (const auto& id : ids) out.profiles_.at(id) = profiles_.at(id);
  return out;
}

}  // namespace council
