#ifndef CACHELAB_CACHE_HPP_
#define CACHELAB_CACHE_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cachelab/trace.hpp"

namespace cachelab {

// One occupied way. Ticks are global trace indices; last_access_index feeds
// reuse-distance lookups.
struct CacheWay {
  uint64_t line = 0;
  uint64_t insert_tick = 0;
  uint64_t last_tick = 0;
  uint64_t last_access_index = 0;
};

// Contents of one cache set. Way index is the position; cold inserts fill
// the lowest empty way and an inserted line keeps the evicted line's way.
struct CacheSetState {
  std::vector<CacheWay> ways;

  bool full(uint32_t associativity) const { return ways.size() >= associativity; }
  int find_line(uint64_t line) const;
};

// What a replacement policy may see: the accessed set, the current access,
// and the past accesses (current access excluded). No forward view exists.
struct ReplacementState {
  const CacheSetState& cache_set;
  MemoryAccess access;
  uint64_t set_id = 0;
  uint64_t trace_index = 0;
  std::span<const MemoryAccess> full_history;

  // Last `h` past accesses, oldest first.
  std::span<const MemoryAccess> history_tail(size_t h) const {
    const size_t n = std::min(h, full_history.size());
    return full_history.subspan(full_history.size() - n, n);
  }
};

enum class OutcomeKind { kHit, kMissWithEviction, kMissColdInsert };

struct AccessOutcome {
  OutcomeKind kind = OutcomeKind::kHit;
  int reward = 0;  // 1 iff hit
  uint32_t way = 0;
  uint64_t evicted_line = 0;
};

class ReplacementPolicy {
 public:
  virtual ~ReplacementPolicy() = default;

  // Called once per access, before the hit/miss is resolved. Policies that
  // model the access stream (learned ones) consume the access here.
  virtual void observe(const ReplacementState&) {}

  // Called only on a miss in a full set. Returns the way to evict, in
  // [0, W). Must not be called on hits.
  virtual uint32_t choose_victim(const ReplacementState& state) = 0;

  // Bookkeeping hook, called after the access resolves.
  virtual void on_access(const ReplacementState&, const AccessOutcome&) {}

  // Eviction probabilities behind the most recent choose_victim, for
  // policies that have them. Metrics fall back to one-hot otherwise.
  virtual std::optional<std::vector<double>> last_decision_probs() const {
    return std::nullopt;
  }

  virtual void reset() {}
  virtual std::string name() const = 0;
};

// Snapshot of a miss-with-eviction state, storable for training.
struct StateSnapshot {
  uint64_t trace_index = 0;
  uint64_t set_id = 0;
  std::vector<CacheWay> lines;  // pre-eviction contents
};

struct HitStats {
  uint64_t hits = 0;
  uint64_t misses = 0;
  std::string policy;

  uint64_t total() const { return hits + misses; }
  double hit_rate() const {
    return total() == 0 ? 0.0 : static_cast<double>(hits) / total();
  }
  std::string to_json() const;
};

class Cache {
 public:
  explicit Cache(const CacheGeometry& geometry);

  // One MDP transition. `trace_index` is the access's position in the trace;
  // the caller appends the access to `history` after this returns.
  AccessOutcome step(const MemoryAccess& access, uint64_t trace_index,
                     std::span<const MemoryAccess> history,
                     ReplacementPolicy& policy,
                     StateSnapshot* snapshot_out = nullptr);

  const CacheGeometry& geometry() const { return geometry_; }
  const CacheSetState& set_state(uint64_t set_id) const { return sets_[set_id]; }

 private:
  CacheGeometry geometry_;
  std::vector<CacheSetState> sets_;
};

struct RolloutOptions {
  bool record_outcomes = false;
  bool record_miss_states = false;
};

struct RolloutResult {
  HitStats stats;
  std::vector<AccessOutcome> outcomes;      // if record_outcomes
  std::vector<StateSnapshot> miss_states;   // if record_miss_states
};

RolloutResult rollout(const AccessTrace& trace, const CacheGeometry& geometry,
                      ReplacementPolicy& policy, const RolloutOptions& options = {});

}  // namespace cachelab

#endif  // CACHELAB_CACHE_HPP_
