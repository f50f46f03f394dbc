#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "council/embedding.hpp"
#include "council/trajectory.hpp"

namespace council {

inline constexpr double kColdStartPrior = 0.5;
inline constexpr std::size_t kDefaultProfileCapacity = 512;

struct LedgerEntry {
  EpisodeId episode_id;
  std::size_t usage_count = 1;
  std::optional<bool> outcome;  // unset until the episode is finalized
  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

// One stored success-trajectory prefix.
struct SmSegment {
  SegmentId segment_id = 0;
  Trajectory prefix;
  EmbeddingVector embedding;
  double embedding_norm = 0.0;
  std::vector<LedgerEntry> ledger;
  std::uint64_t created_at = 0;
};

// sum(y_i * u_i) / sum(u_i) over resolved entries; `cold_start_prior` when
// nothing is resolved yet.
double sms_utility(std::span<const LedgerEntry> ledger, double cold_start_prior = kColdStartPrior);
inline double sms_utility(const SmSegment& segment, double cold_start_prior = kColdStartPrior) {
  return sms_utility(segment.ledger, cold_start_prior);
}

struct SegmentMatch {
  SegmentId segment_id = 0;
  double score = 0.0;
  double utility = 0.0;
  std::uint64_t created_at = 0;
  Trajectory prefix;
};

// Capacity-bounded success memory for one council member. Reads take a shared
// lock and mutations an exclusive one, so a profile can be queried from
// several threads while a single writer updates it.
class ExpertProfile {
 public:
  explicit ExpertProfile(ExpertId expert_id, std::size_t capacity = kDefaultProfileCapacity,
                         double cold_start_prior = kColdStartPrior);
  ExpertProfile(const ExpertProfile& other);
  ExpertProfile(ExpertProfile&& other) noexcept;
  ExpertProfile& operator=(ExpertProfile other) noexcept;
  ~ExpertProfile() = default;

  const ExpertId& expert_id() const noexcept { return expert_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  double cold_start_prior() const noexcept { return cold_start_prior_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  // Highest-similarity segment. Exact score ties go to the higher utility,
  // then the older segment. Empty profile -> nullopt.
  std::optional<SegmentMatch> best_match(const EmbeddingVector& query) const;

  // Adds `prefix`; if a segment with the same serialization exists, that
  // segment's id is returned and nothing is added.
  SegmentId insert(const Trajectory& prefix, EmbeddingVector embedding);
  SegmentId insert(const Trajectory& prefix, const Embedder& embedder);

  // Restores a persisted segment verbatim (ids and counters included).
  void restore(SmSegment segment);

  // Folds a segment from another profile in. A known prefix gains the ledger
  // entries it lacks (shared episodes keep the larger usage count); a new one
  // is appended with a fresh id, so it counts as younger than everything here.
  void merge(const SmSegment& segment);

  // Increments u for (segment, episode), creating the entry at 1.
  std::vector<LedgerEntry> record_retrieval(SegmentId segment_id, const EpisodeId& episode_id);

  // Sets the outcome on every entry for `episode_id`. Returns how many were set.
  std::size_t resolve_episode(const EpisodeId& episode_id, bool success);

  // Evicts lowest-utility segments (oldest first on ties) until size <= capacity.
  std::vector<SegmentId> prune();

  bool contains(SegmentId segment_id) const;
  std::optional<SmSegment> segment(SegmentId segment_id) const;
  std::vector<SmSegment> segments() const;
  double utility(SegmentId segment_id) const;

 private:
  std::size_t index_of(SegmentId segment_id) const;  // requires lock
  void reindex();                                    // requires exclusive lock

  ExpertId expert_id_;
  std::size_t capacity_;
  double cold_start_prior_;
  std::vector<SmSegment> segments_;
  std::unordered_map<std::string, std::size_t> by_text_;
  std::unordered_map<SegmentId, std::size_t> by_id_;
  std::uint64_t next_counter_ = 0;
  mutable std::unique_ptr<std::shared_mutex> mutex_;
};

using ProfileMap = std::map<ExpertId, ExpertProfile>;

std::optional<SegmentMatch> best_match(const ExpertProfile& profile, const Trajectory& query,
                                       const Embedder& embedder);

struct FinalizeReport {
  std::size_t resolved_entries = 0;
  std::size_t inserted_segments = 0;  // new rows; merged duplicates are not counted
  std::map<ExpertId, std::vector<SegmentId>> evicted;
};

// Resolves ledger outcomes for the episode and, on success, stores every
// prefix of the final trajectory in the profile of the expert that chose the
// prefix's last action. Profiles over capacity are pruned.
FinalizeReport finalize_episode(ProfileMap& profiles, const EpisodeRecord& record,
                                const Embedder& embedder);

// merge() for every segment of every profile in `from`; profiles missing from
// `into` are created with the given capacity and prior.
void merge_profiles(ProfileMap& into, const ProfileMap& from, std::size_t capacity = kDefaultProfileCapacity,
                    double cold_start_prior = kColdStartPrior);

// One JSON object per line:
// {expert_id, segment_id, prefix_steps, created_at, ledger:[{episode_id, usage_count, outcome}]}
std::size_t save_profiles(std::ostream& out, const ProfileMap& profiles);

// Rebuilds segments from `in`, recomputing embeddings. Experts not present in
// `profiles` are created with the given capacity and prior. Parse errors name
// the 1-based line number.
std::size_t load_profiles(std::istream& in, ProfileMap& profiles, const Embedder& embedder,
                          std::size_t capacity = kDefaultProfileCapacity,
                          double cold_start_prior = kColdStartPrior);

}  // namespace council
