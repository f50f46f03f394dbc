#include "council/memory.hpp"

#include <algorithm>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "council/errors.hpp"

namespace council {

using json = nlohmann::json;

double sms_utility(std::span<const LedgerEntry> ledger, double cold_start_prior) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& entry : ledger) {
    if (!entry.outcome) continue;
    const auto u = static_cast<double>(entry.usage_count);
    total += u;
    if (*entry.outcome) weighted += u;
  }
  if (total == 0.0) return cold_start_prior;
  return weighted / total;
}

ExpertProfile::ExpertProfile(ExpertId expert_id, std::size_t capacity, double cold_start_prior)
    : expert_id_(std::move(expert_id)),
      capacity_(capacity),
      cold_start_prior_(cold_start_prior),
      mutex_(std::make_unique<std::shared_mutex>()) {
  if (capacity_ == 0) throw InvalidInput("profile capacity must be positive");
  if (!(cold_start_prior_ >= 0.0 && cold_start_prior_ <= 1.0)) {
    throw InvalidInput("cold-start prior must lie in [0, 1]");
  }
}

ExpertProfile::ExpertProfile(const ExpertProfile& other)
    : mutex_(std::make_unique<std::shared_mutex>()) {
  std::shared_lock lock(*other.mutex_);
  expert_id_ = other.expert_id_;
  capacity_ = other.capacity_;
  cold_start_prior_ = other.cold_start_prior_;
  segments_ = other.segments_;
  by_text_ = other.by_text_;
  by_id_ = other.by_id_;
  next_counter_ = other.next_counter_;
}

ExpertProfile::ExpertProfile(ExpertProfile&& other) noexcept
    : expert_id_(std::move(other.expert_id_)),
      capacity_(other.capacity_),
      cold_start_prior_(other.cold_start_prior_),
      segments_(std::move(other.segments_)),
      by_text_(std::move(other.by_text_)),
      by_id_(std::move(other.by_id_)),
      next_counter_(other.next_counter_),
      mutex_(std::move(other.mutex_)) {
  other.mutex_ = std::make_unique<std::shared_mutex>();
}

ExpertProfile& ExpertProfile::operator=(ExpertProfile other) noexcept {
  std::swap(expert_id_, other.expert_id_);
  std::swap(capacity_, other.capacity_);
  std::swap(cold_start_prior_, other.cold_start_prior_);
  std::swap(segments_, other.segments_);
  std::swap(by_text_, other.by_text_);
  std::swap(by_id_, other.by_id_);
  std::swap(next_counter_, other.next_counter_);
  std::swap(mutex_, other.mutex_);
  return *this;
}

std::size_t ExpertProfile::size() const {
  std::shared_lock lock(*mutex_);
  return segments_.size();
}

std::size_t ExpertProfile::index_of(SegmentId segment_id) const {
  auto it = by_id_.find(segment_id);
  if (it == by_id_.end()) {
    throw InvalidInput("profile '" + expert_id_ + "' has no segment " + std::to_string(segment_id));
  }
  return it->second;
}

void ExpertProfile::reindex() {
  by_text_.clear();
  by_id_.clear();
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    by_text_.emplace(serialize_trajectory(segments_[i].prefix), i);
    by_id_.emplace(segments_[i].segment_id, i);
  }
}

std::optional<SegmentMatch> ExpertProfile::best_match(const EmbeddingVector& query) const {
  std::shared_lock lock(*mutex_);
  if (segments_.empty()) return std::nullopt;
  const double query_norm = query.norm();
  const SmSegment* best = nullptr;
  double best_score = 0.0;
  double best_utility = 0.0;
  for (const auto& seg : segments_) {
    const double score = similarity(query.values, query_norm, seg.embedding.values, seg.embedding_norm);
    if (best == nullptr || score > best_score) {
      best = &seg;
      best_score = score;
      best_utility = -1.0;  // computed lazily on a tie
      continue;
    }
    if (score < best_score) continue;
    if (best_utility < 0.0) best_utility = sms_utility(*best, cold_start_prior_);
    const double utility = sms_utility(seg, cold_start_prior_);
    if (utility > best_utility || (utility == best_utility && seg.created_at < best->created_at)) {
      best = &seg;
      best_utility = utility;
    }
  }
  return SegmentMatch{best->segment_id, best_score, sms_utility(*best, cold_start_prior_),
                      best->created_at, best->prefix};
}

SegmentId ExpertProfile::insert(const Trajectory& prefix, EmbeddingVector embedding) {
  auto text = serialize_trajectory(prefix);
  std::unique_lock lock(*mutex_);
  if (auto it = by_text_.find(text); it != by_text_.end()) return segments_[it->second].segment_id;
  SmSegment seg;
  seg.segment_id = next_counter_;
  seg.created_at = next_counter_;
  ++next_counter_;
  seg.prefix = prefix;
  seg.embedding_norm = embedding.norm();
  seg.embedding = std::move(embedding);
  by_text_.emplace(std::move(text), segments_.size());
  by_id_.emplace(seg.segment_id, segments_.size());
  segments_.push_back(std::move(seg));
  return segments_.back().segment_id;
}

SegmentId ExpertProfile::insert(const Trajectory& prefix, const Embedder& embedder) {
  return insert(prefix, embedder.embed(serialize_trajectory(prefix)));
}

void ExpertProfile::restore(SmSegment segment) {
  auto text = serialize_trajectory(segment.prefix);
  std::unique_lock lock(*mutex_);
  if (by_text_.contains(text)) {
    throw InvalidInput("duplicate prefix in profile '" + expert_id_ + "'");
  }
  if (by_id_.contains(segment.segment_id)) {
    throw InvalidInput("duplicate segment id " + std::to_string(segment.segment_id));
  }
  segment.embedding_norm = segment.embedding.norm();
  next_counter_ = std::max({next_counter_, segment.created_at + 1, segment.segment_id + 1});
  by_text_.emplace(std::move(text), segments_.size());
  by_id_.emplace(segment.segment_id, segments_.size());
  segments_.push_back(std::move(segment));
}

void ExpertProfile::merge(const SmSegment& segment) {
  auto text = serialize_trajectory(segment.prefix);
  std::unique_lock lock(*mutex_);
  if (auto it = by_text_.find(text); it != by_text_.end()) {
    auto& ledger = segments_[it->second].ledger;
    for (const auto& e : segment.ledger) {
      auto same = std::find_if(ledger.begin(), ledger.end(),
                               [&](const LedgerEntry& x) { return x.episode_id == e.episode_id; });
      if (same == ledger.end()) {
        ledger.push_back(e);
        continue;
      }
      same->usage_count = std::max(same->usage_count, e.usage_count);
      if (!same->outcome) same->outcome = e.outcome;
    }
    return;
  }
  SmSegment copy = segment;
  copy.segment_id = next_counter_;
  copy.created_at = next_counter_;
  ++next_counter_;
  copy.embedding_norm = copy.embedding.norm();
  by_text_.emplace(std::move(text), segments_.size());
  by_id_.emplace(copy.segment_id, segments_.size());
  segments_.push_back(std::move(copy));
}

std::vector<LedgerEntry> ExpertProfile::record_retrieval(SegmentId segment_id,
                                                         const EpisodeId& episode_id) {
  std::unique_lock lock(*mutex_);
  auto& ledger = segments_[index_of(segment_id)].ledger;
  auto it = std::find_if(ledger.begin(), ledger.end(),
                         [&](const LedgerEntry& e) { return e.episode_id == episode_id; });
  if (it == ledger.end()) {
    ledger.push_back(LedgerEntry{episode_id, 1, std::nullopt});
  } else {
    if (it->outcome) {
      throw InvalidState("episode '" + episode_id + "' was already finalized");
    }
    ++it->usage_count;
  }
  return ledger;
}

std::size_t ExpertProfile::resolve_episode(const EpisodeId& episode_id, bool success) {
  std::unique_lock lock(*mutex_);
  std::size_t resolved = 0;
  for (auto& seg : segments_) {
    for (auto& entry : seg.ledger) {
      if (entry.episode_id != episode_id) continue;
      if (entry.outcome) {
        throw InvalidState("outcome for episode '" + episode_id + "' already set");
      }
      entry.outcome = success;
      ++resolved;
    }
  }
  return resolved;
}

std::vector<SegmentId> ExpertProfile::prune() {
  std::unique_lock lock(*mutex_);
  if (segments_.size() <= capacity_) return {};
  std::vector<std::size_t> order(segments_.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> utilities(segments_.size());
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    utilities[i] = sms_utility(segments_[i], cold_start_prior_);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (utilities[a] != utilities[b]) return utilities[a] < utilities[b];
    return segments_[a].created_at < segments_[b].created_at;
  });
  const std::size_t excess = segments_.size() - capacity_;
  std::vector<bool> evict(segments_.size(), false);
  std::vector<SegmentId> evicted;
  for (std::size_t i = 0; i < excess; ++i) {
    evict[order[i]] = true;
    evicted.push_back(segments_[order[i]].segment_id);
  }
  std::vector<SmSegment> kept;
  kept.reserve(capacity_);
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (!evict[i]) kept.push_back(std::move(segments_[i]));
  }
  segments_ = std::move(kept);
  reindex();
  return evicted;
}

bool ExpertProfile::contains(SegmentId segment_id) const {
  std::shared_lock lock(*mutex_);
  return by_id_.contains(segment_id);
}

std::optional<SmSegment> ExpertProfile::segment(SegmentId segment_id) const {
  std::shared_lock lock(*mutex_);
  auto it = by_id_.find(segment_id);
  if (it == by_id_.end()) return std::nullopt;
  return segments_[it->second];
}

std::vector<SmSegment> ExpertProfile::segments() const {
  std::shared_lock lock(*mutex_);
  return segments_;
}

double ExpertProfile::utility(SegmentId segment_id) const {
  std::shared_lock lock(*mutex_);
  return sms_utility(segments_[index_of(segment_id)], cold_start_prior_);
}

std::optional<SegmentMatch> best_match(const ExpertProfile& profile, const Trajectory& query,
                                       const Embedder& embedder) {
  if (profile.empty()) return std::nullopt;
  return profile.best_match(embedder.embed(serialize_trajectory(query)));
}

FinalizeReport finalize_episode(ProfileMap& profiles, const EpisodeRecord& record,
                                const Embedder& embedder) {
  if (record.per_step_expert.size() != record.final_trajectory.depth()) {
    throw InvalidInput("per-step expert attribution does not match trajectory depth");
  }
  for (const auto& r : record.retrievals) {
    auto it = profiles.find(r.expert_id);
    if (it == profiles.end() || !it->second.contains(r.segment_id)) {
      throw InvalidState("episode '" + record.episode_id + "' references missing segment " +
                         std::to_string(r.segment_id) + " of expert '" + r.expert_id + "'");
    }
  }
  if (record.success) {
    for (const auto& expert : record.per_step_expert) {
      if (!profiles.contains(expert)) {
        throw InvalidInput("attributed expert '" + expert + "' has no profile");
      }
    }
  }

  FinalizeReport report;
  for (auto& [id, profile] : profiles) {
    report.resolved_entries += profile.resolve_episode(record.episode_id, record.success);
  }
  if (!record.success) return report;

  const auto prefixes = decompose_prefixes(record.final_trajectory);
  for (std::size_t t = 0; t < prefixes.size(); ++t) {
    auto& profile = profiles.at(record.per_step_expert[t]);
    const auto before = profile.size();
    profile.insert(prefixes[t], embedder);
    if (profile.size() > before) ++report.inserted_segments;
  }
  for (auto& [id, profile] : profiles) {
    auto evicted = profile.prune();
    if (!evicted.empty()) report.evicted.emplace(id, std::move(evicted));
  }
  return report;
}

std::size_t save_profiles(std::ostream& out, const ProfileMap& profiles) {
  std::size_t count = 0;
  for (const auto& [id, profile] : profiles) {
    for (const auto& seg : profile.segments()) {
      json steps = json::array();
      for (const auto& step : seg.prefix.steps()) {
        steps.push_back({{"observation", step.observation.text()}, {"action", step.action.text()}});
      }
      json ledger = json::array();
      for (const auto& e : seg.ledger) {
        ledger.push_back({{"episode_id", e.episode_id},
                          {"usage_count", e.usage_count},
                          {"outcome", e.outcome ? json(*e.outcome) : json(nullptr)}});
      }
      json line = {{"expert_id", id},
                   {"segment_id", seg.segment_id},
                   {"prefix_steps", std::move(steps)},
                   {"created_at", seg.created_at},
                   {"ledger", std::move(ledger)}};
      out << line.dump() << '\n';
      ++count;
    }
  }
  return count;
}

void merge_profiles(ProfileMap& into, const ProfileMap& from, std::size_t capacity, double cold_start_prior) {
  for (const auto& [id, profile] : from) {
    auto it = into.find(id);
    if (it == into.end()) it = into.emplace(id, ExpertProfile(id, capacity, cold_start_prior)).first;
    auto segs = profile.segments();
    std::sort(segs.begin(), segs.end(),
              [](const SmSegment& a, const SmSegment& b) { return a.created_at < b.created_at; });
    for (const auto& seg : segs) it->second.merge(seg);
  }
}

std::size_t load_profiles(std::istream& in, ProfileMap& profiles, const Embedder& embedder,
                          std::size_t capacity, double cold_start_prior) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const auto obj = json::parse(line);
      SmSegment seg;
      const auto expert_id = obj.at("expert_id").get<std::string>();
      seg.segment_id = obj.at("segment_id").get<SegmentId>();
      seg.created_at = obj.at("created_at").get<std::uint64_t>();
      std::vector<Step> steps;
      for (const auto& s : obj.at("prefix_steps")) {
        steps.push_back(Step{Observation(s.at("observation").get<std::string>()),
                             Action(s.at("action").get<std::string>())});
      }
      seg.prefix = Trajectory(std::move(steps));
      for (const auto& e : obj.at("ledger")) {
        LedgerEntry entry{e.at("episode_id").get<std::string>(), e.at("usage_count").get<std::size_t>(),
                          std::nullopt};
        if (entry.usage_count == 0) throw InvalidInput("usage_count must be >= 1");
        if (!e.at("outcome").is_null()) entry.outcome = e.at("outcome").get<bool>();
        seg.ledger.push_back(std::move(entry));
      }
      seg.embedding = embedder.embed(serialize_trajectory(seg.prefix));
      auto it = profiles.find(expert_id);
      if (it == profiles.end()) {
        it = profiles.emplace(expert_id, ExpertProfile(expert_id, capacity, cold_start_prior)).first;
      }
      it->second.restore(std::move(seg));
      ++count;
    } catch (const std::exception& e) {
      throw ParseFailure("memory file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return count;
}

}  // namespace council
