#include "cachelab/baselines.hpp"

#include <algorithm>

namespace cachelab {

uint32_t LruPolicy::choose_victim(const ReplacementState& state) {
  const auto& ways = state.cache_set.ways;
  uint32_t victim = 0;
  for (uint32_t w = 1; w < ways.size(); ++w) {
    if (ways[w].last_tick < ways[victim].last_tick) victim = w;
  }
  return victim;
}

uint32_t RandomPolicy::choose_victim(const ReplacementState& state) {
  std::uniform_int_distribution<uint32_t> pick(
      0, static_cast<uint32_t>(state.cache_set.ways.size()) - 1);
  return pick(rng_);
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t mix_access(const MemoryAccess& a) {
  return splitmix64(splitmix64(a.pc) ^ (a.address * 0x9e3779b97f4a7c15ULL));
}

uint64_t suffix_key(uint64_t hash, size_t k) {
  return splitmix64(hash ^ (static_cast<uint64_t>(k) * 0xd6e8feb86659fd93ULL));
}

}  // namespace

NnBeladyIndex::NnBeladyIndex(const AccessTrace& train,
                             const CacheGeometry& geometry, size_t max_suffix)
    : train_(train.accesses), max_suffix_(max_suffix) {
  if (train.empty()) return;
  ReuseDistanceTable table(train, geometry);
  BeladyPolicy oracle(table);
  RolloutOptions options;
  options.record_outcomes = true;
  const RolloutResult result = rollout(train, geometry, oracle, options);
  for (uint64_t p = 0; p < result.outcomes.size(); ++p) {
    const AccessOutcome& outcome = result.outcomes[p];
    if (outcome.kind != OutcomeKind::kMissWithEviction) continue;
    decisions_[p] = outcome.evicted_line;
    // Index every suffix length ending at p, newest access first.
    uint64_t hash = 0;
    const size_t limit = std::min<uint64_t>(max_suffix_, p + 1);
    for (size_t k = 1; k <= limit; ++k) {
      hash = hash * 0x100000001b3ULL + mix_access(train_[p + 1 - k]);
      by_suffix_.try_emplace(suffix_key(hash, k), p);  // earliest pos wins ties
    }
  }
}

bool NnBeladyIndex::suffix_matches(uint64_t position,
                                   std::span<const MemoryAccess> history,
                                   const MemoryAccess& current, size_t k) const {
  // Query suffix, newest first: current, then history back-to-front.
  if (position + 1 < k) return false;
  for (size_t i = 0; i < k; ++i) {
    const MemoryAccess& train_access = train_[position - i];
    const MemoryAccess& query_access =
        i == 0 ? current : history[history.size() - i];
    if (!(train_access == query_access)) return false;
  }
  return true;
}

int64_t NnBeladyIndex::lookup(std::span<const MemoryAccess> history,
                              const MemoryAccess& current,
                              size_t* matched_len) const {
  const size_t limit = std::min(max_suffix_, history.size() + 1);
  // Hash prefixes of the newest-first query sequence, then probe from the
  // longest suffix down.
  std::vector<uint64_t> hashes(limit);
  uint64_t hash = 0;
  for (size_t k = 1; k <= limit; ++k) {
    const MemoryAccess& a = k == 1 ? current : history[history.size() - (k - 1)];
    hash = hash * 0x100000001b3ULL + mix_access(a);
    hashes[k - 1] = hash;
  }
  for (size_t k = limit; k >= 1; --k) {
    const auto it = by_suffix_.find(suffix_key(hashes[k - 1], k));
    if (it == by_suffix_.end()) continue;
    if (!suffix_matches(it->second, history, current, k)) continue;
    if (matched_len) *matched_len = k;
    return static_cast<int64_t>(it->second);
  }
  if (matched_len) *matched_len = 0;
  return -1;
}

uint64_t NnBeladyIndex::decision_at(uint64_t position) const {
  const auto it = decisions_.find(position);
  return it == decisions_.end() ? 0 : it->second;
}

uint32_t NnBeladyPolicy::choose_victim(const ReplacementState& state) {
  const int64_t pos = index_->lookup(
      state.history_tail(index_->max_suffix() - 1), state.access);
  if (pos >= 0) {
    const uint64_t memorized_victim = index_->decision_at(pos);
    const int way = state.cache_set.find_line(memorized_victim);
    if (way >= 0) return static_cast<uint32_t>(way);
  }
  return lru_.choose_victim(state);
}

}  // namespace cachelab
