#include "council/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "council/errors.hpp"

namespace council {

std::string to_string(RoutingStrategy strategy) {
  switch (strategy) {
    case RoutingStrategy::task_aware: return "task-aware";
    case RoutingStrategy::random: return "random";
    case RoutingStrategy::round_robin: return "round-robin";
    case RoutingStrategy::voting: return "voting";
    case RoutingStrategy::collaborative: return "collaborative";
  }
  return "task-aware";
}

RoutingStrategy parse_routing_strategy(const std::string& name) {
  for (auto s : {RoutingStrategy::task_aware, RoutingStrategy::random, RoutingStrategy::round_robin,
                 RoutingStrategy::voting, RoutingStrategy::collaborative}) {
    if (to_string(s) == name) return s;
  }
  throw InvalidInput("unknown routing strategy '" + name + "'");
}

namespace {

double lookup(const std::vector<ExpertId>& ids, const std::vector<double>& values, const ExpertId& id) {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw InvalidInput("expert '" + id + "' is not in the routing set");
  return values[static_cast<std::size_t>(it - ids.begin())];
}

std::size_t sample_index(std::span<const double> probability, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probability.size(); ++i) {
    acc += probability[i];
    if (u < acc) return i;
  }
  return probability.size() - 1;
}

RoutingDistribution uniform_over(std::vector<ExpertId> ids, double temperature) {
  RoutingDistribution d;
  d.probability.assign(ids.size(), 1.0 / static_cast<double>(ids.size()));
  d.experts = std::move(ids);
  d.temperature = temperature;
  return d;
}

// Looks up the exemplar for `expert` and records the retrieval.
void attach_exemplar(Council& council, const ExpertId& expert, const EmbeddingVector& query,
                     const EpisodeId& episode, RoutingDecision& decision,
                     std::vector<RetrievalRecord>& retrievals) {
  auto& profile = council.profile(expert);
  auto match = profile.best_match(query);
  if (!match) return;
  auto ledger = profile.record_retrieval(match->segment_id, episode);
  std::size_t usage = 0;
  for (const auto& e : ledger) {
    if (e.episode_id == episode) usage = e.usage_count;
  }
  retrievals.push_back({expert, match->segment_id, usage});
  decision.exemplar = std::move(match->prefix);
  decision.exemplar_segment_id = match->segment_id;
}

std::optional<Trajectory> exemplar_for(Council& council, const ExpertId& expert,
                                       const EmbeddingVector& query, const EpisodeId& episode,
                                       std::vector<RetrievalRecord>& retrievals) {
  RoutingDecision scratch;
  attach_exemplar(council, expert, query, episode, scratch, retrievals);
  return scratch.exemplar;
}

// Every eligible member proposes; unavailable members are skipped.
std::vector<ActionProposal> pool(Council& council, const std::vector<ExpertId>& eligible,
                                 const RouteRequest& req, const EmbeddingVector& query,
                                 std::vector<RetrievalRecord>& retrievals) {
  if (req.context == nullptr || req.width == 0) {
    throw InvalidInput(to_string(req.strategy) + " routing needs an expert context and a width");
  }
  std::vector<ActionProposal> pooled;
  for (const auto& id : eligible) {
    auto exemplar = exemplar_for(council, id, query, req.episode_id, retrievals);
    try {
      auto props = propose_actions(council.member(id), *req.context, req.prefix,
                                   exemplar ? &*exemplar : nullptr, req.width);
      for (auto& p : props) pooled.push_back(std::move(p));
    } catch (const ExpertUnavailable&) {
    }
  }
  return pooled;
}

}  // namespace

double RoutingScores::at(const ExpertId& id) const { return lookup(experts, mu, id); }
double RoutingDistribution::at(const ExpertId& id) const { return lookup(experts, probability, id); }

RoutingScores routing_scores(const Council& council, const EmbeddingVector& query) {
  if (council.size() == 0) throw InvalidInput("council is empty");
  RoutingScores s;
  for (const auto& m : council.members()) {
    auto match = council.profile(m->id()).best_match(query);
    s.experts.push_back(m->id());
    s.mu.push_back(match ? match->score : 0.0);
  }
  return s;
}

RoutingDistribution routing_distribution(const RoutingScores& scores, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidInput("routing temperature must be positive");
  }
  if (scores.mu.empty()) throw InvalidInput("no routing scores");
  double top = -std::numeric_limits<double>::infinity();
  for (double m : scores.mu) {
    if (!std::isfinite(m)) throw InvalidInput("routing score is not finite");
    top = std::max(top, m);
  }
  RoutingDistribution d;
  d.experts = scores.experts;
  d.temperature = temperature;
  double total = 0.0;
  for (double m : scores.mu) {
    d.probability.push_back(std::exp((m - top) / temperature));
    total += d.probability.back();
  }
  for (double& p : d.probability) p /= total;
  return d;
}

RoutingDecision route(Council& council, const RouteRequest& req, Rng& rng,
                      std::vector<RetrievalRecord>& retrievals) {
  if (council.size() == 0) throw InvalidInput("council is empty");
  std::vector<ExpertId> eligible;
  for (const auto& m : council.members()) {
    if (std::find(req.excluded.begin(), req.excluded.end(), m->id()) == req.excluded.end()) {
      eligible.push_back(m->id());
    }
  }
  if (eligible.empty()) throw ExpertUnavailable("no council member left to route to");

  const auto query = council.embedder().embed(req.query);
  RoutingDecision decision;
  decision.strategy = req.strategy;

  switch (req.strategy) {
    case RoutingStrategy::task_aware: {
      auto all = routing_scores(council, query);
      RoutingScores kept;
      for (std::size_t i = 0; i < all.experts.size(); ++i) {
        if (std::find(eligible.begin(), eligible.end(), all.experts[i]) != eligible.end()) {
          kept.experts.push_back(all.experts[i]);
          kept.mu.push_back(all.mu[i]);
        }
      }
      decision.distribution = routing_distribution(kept, req.temperature);
      decision.chosen = kept.experts[sample_index(decision.distribution.probability, rng)];
      break;
    }
    case RoutingStrategy::random:
      decision.distribution = uniform_over(eligible, req.temperature);
      decision.chosen = eligible[uniform_index(rng, eligible.size())];
      break;
    case RoutingStrategy::round_robin: {
      decision.distribution = uniform_over(eligible, req.temperature);
      const std::size_t n = council.size();
      for (std::size_t offset = 0; offset < n; ++offset) {
        const auto& id = council.member((req.step_index + offset) % n).id();
        if (std::find(eligible.begin(), eligible.end(), id) != eligible.end()) {
          decision.chosen = id;
          break;
        }
      }
      break;
    }
    case RoutingStrategy::voting: {
      decision.distribution = uniform_over(eligible, req.temperature);
      auto pooled = pool(council, eligible, req, query, retrievals);
      if (pooled.empty()) throw ExpertUnavailable("no council member produced a proposal");
      // Rank distinct actions by vote count, first appearance breaking ties.
      std::vector<std::string> order;
      std::map<std::string, std::size_t> votes;
      std::map<std::string, ExpertId> first_proposer;
      for (const auto& p : pooled) {
        if (votes[p.action.text()]++ == 0) {
          order.push_back(p.action.text());
          first_proposer.emplace(p.action.text(), p.proposer);
        }
      }
      std::stable_sort(order.begin(), order.end(),
                       [&](const auto& a, const auto& b) { return votes[a] > votes[b]; });
      decision.chosen = first_proposer.at(order.front());
      std::vector<ActionProposal> ranked;
      for (const auto& text : order) {
        if (ranked.size() == req.width) break;
        ranked.push_back({Action(text), first_proposer.at(text)});
      }
      decision.proposals = std::move(ranked);
      break;
    }
    case RoutingStrategy::collaborative: {
      decision.distribution = uniform_over(eligible, req.temperature);
      ExpertId aggregator = req.aggregator.value_or(council.member(0).id());
      if (std::find(eligible.begin(), eligible.end(), aggregator) == eligible.end()) {
        aggregator = eligible.front();
      }
      auto pooled = pool(council, eligible, req, query, retrievals);
      if (pooled.empty()) throw ExpertUnavailable("no council member produced a proposal");
      decision.chosen = aggregator;
      std::vector<ActionProposal> merged;
      for (auto& text : council.member(aggregator).aggregate(*req.context, req.prefix, pooled, req.width)) {
        if (is_blank(text) || merged.size() == req.width) continue;
        bool dup = std::any_of(merged.begin(), merged.end(),
                               [&](const auto& p) { return p.action.text() == text; });
        if (!dup) merged.push_back({Action(std::move(text)), aggregator});
      }
      decision.proposals = std::move(merged);
      break;
    }
  }

  if (!decision.proposals) {
    attach_exemplar(council, decision.chosen, query, req.episode_id, decision, retrievals);
  } else {
    // Pooling already recorded every member's lookup; only report it here.
    if (auto m = council.profile(decision.chosen).best_match(query)) {
      decision.exemplar = std::move(m->prefix);
      decision.exemplar_segment_id = m->segment_id;
    }
  }
  return decision;
}

}  // namespace council
