#include "cachelab/cache.hpp"

#include <stdexcept>

#include "json.hpp"

namespace cachelab {

int CacheSetState::find_line(uint64_t line) const {
  for (size_t w = 0; w < ways.size(); ++w) {
    if (ways[w].line == line) return static_cast<int>(w);
  }
  return -1;
}

std::string HitStats::to_json() const {
  nlohmann::json j{{"policy", policy},
                   {"hits", hits},
                   {"misses", misses},
                   {"hit_rate", hit_rate()}};
  return j.dump();
}

Cache::Cache(const CacheGeometry& geometry) : geometry_(geometry) {
  geometry_.validate();
  sets_.resize(geometry_.num_sets());
}

AccessOutcome Cache::step(const MemoryAccess& access, uint64_t trace_index,
                          std::span<const MemoryAccess> history,
                          ReplacementPolicy& policy,
                          StateSnapshot* snapshot_out) {
  const uint64_t set_id = geometry_.set_index(access.address);
  const uint64_t line = geometry_.line_id(access.address);
  CacheSetState& set = sets_[set_id];
  const ReplacementState state{set, access, set_id, trace_index, history};

  policy.observe(state);

  AccessOutcome outcome;
  const int way = set.find_line(line);
  if (way >= 0) {
    outcome.kind = OutcomeKind::kHit;
    outcome.reward = 1;
    outcome.way = static_cast<uint32_t>(way);
    set.ways[way].last_tick = trace_index;
    set.ways[way].last_access_index = trace_index;
  } else if (!set.full(geometry_.associativity)) {
    outcome.kind = OutcomeKind::kMissColdInsert;
    outcome.way = static_cast<uint32_t>(set.ways.size());
    set.ways.push_back({line, trace_index, trace_index, trace_index});
  } else {
    if (snapshot_out) {
      snapshot_out->trace_index = trace_index;
      snapshot_out->set_id = set_id;
      snapshot_out->lines = set.ways;
    }
    const uint32_t victim = policy.choose_victim(state);
    if (victim >= geometry_.associativity) {
      throw std::out_of_range("policy '" + policy.name() +
                              "' returned way out of range");
    }
    outcome.kind = OutcomeKind::kMissWithEviction;
    outcome.way = victim;
    outcome.evicted_line = set.ways[victim].line;
    set.ways[victim] = {line, trace_index, trace_index, trace_index};
  }
  policy.on_access(state, outcome);
  return outcome;
}

RolloutResult rollout(const AccessTrace& trace, const CacheGeometry& geometry,
                      ReplacementPolicy& policy, const RolloutOptions& options) {
  Cache cache(geometry);
  policy.reset();
  RolloutResult result;
  result.stats.policy = policy.name();
  std::vector<MemoryAccess> history;
  history.reserve(trace.size());
  StateSnapshot snapshot;
  for (uint64_t t = 0; t < trace.size(); ++t) {
    const MemoryAccess& access = trace.accesses[t];
    const AccessOutcome outcome =
        cache.step(access, t, history, policy,
                   options.record_miss_states ? &snapshot : nullptr);
    if (outcome.reward) {
      ++result.stats.hits;
    } else {
      ++result.stats.misses;
    }
    if (options.record_outcomes) result.outcomes.push_back(outcome);
    if (options.record_miss_states &&
        outcome.kind == OutcomeKind::kMissWithEviction) {
      result.miss_states.push_back(snapshot);
    }
    history.push_back(access);  // strictly past accesses only
  }
  return result;
}

}  // namespace cachelab
