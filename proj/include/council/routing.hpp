#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "council/expert.hpp"
#include "council/random.hpp"

namespace council {

enum class RoutingStrategy { task_aware, random, round_robin, voting, collaborative };

std::string to_string(RoutingStrategy strategy);
RoutingStrategy parse_routing_strategy(const std::string& name);
inline constexpr double kDefaultRoutingTemperature = 0.5;

// mu_j per council member, in council order.
struct RoutingScores {
  std::vector<ExpertId> experts;
  std::vector<double> mu;

  double at(const ExpertId& id) const;
};

struct RoutingDistribution {
  std::vector<ExpertId> experts;
  std::vector<double> probability;
  double temperature = kDefaultRoutingTemperature;

  double at(const ExpertId& id) const;
};

struct RoutingDecision {
  RoutingStrategy strategy = RoutingStrategy::task_aware;
  ExpertId chosen;
  std::optional<Trajectory> exemplar;
  std::optional<SegmentId> exemplar_segment_id;
  RoutingDistribution distribution;
  // Voting and collaborative routing produce the candidate actions themselves.
  std::optional<std::vector<ActionProposal>> proposals;
};

// Max cosine similarity of `query` against each profile; 0 for empty ones.
RoutingScores routing_scores(const Council& council, const EmbeddingVector& query);

// Softmax of mu / T with max subtraction. Throws InvalidInput for T <= 0 or
// non-finite scores.
RoutingDistribution routing_distribution(const RoutingScores& scores, double temperature);

struct RouteRequest {
  Trajectory prefix;
  std::string query;  // text that gets embedded, see query_text()
  EpisodeId episode_id;
  std::size_t step_index = 0;
  RoutingStrategy strategy = RoutingStrategy::task_aware;
  double temperature = kDefaultRoutingTemperature;
  std::optional<ExpertId> aggregator;  // collaborative; defaults to the first member
  std::vector<ExpertId> excluded;      // members that already failed this expansion
  // Needed by voting and collaborative routing, which query every member.
  const ExpertContext* context = nullptr;
  std::size_t width = 0;
};

// Chooses the acting expert and its exemplar. Every exemplar lookup is
// recorded in the consulted profile's retrieval ledger and appended to
// `retrievals`. Throws ExpertUnavailable when every eligible member is
// excluded or fails to propose.
RoutingDecision route(Council& council, const RouteRequest& request, Rng& rng,
                      std::vector<RetrievalRecord>& retrievals);

}  // namespace council
