#ifndef CACHELAB_BASELINES_HPP_
#define CACHELAB_BASELINES_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachelab/cache.hpp"
#include "cachelab/oracle.hpp"
#include "cachelab/trace.hpp"

namespace cachelab {

class LruPolicy : public ReplacementPolicy {
 public:
  uint32_t choose_victim(const ReplacementState& state) override;
  std::string name() const override { return "lru"; }
};

class RandomPolicy : public ReplacementPolicy {
 public:
  explicit RandomPolicy(uint64_t seed) : seed_(seed), rng_(seed) {}
  uint32_t choose_victim(const ReplacementState& state) override;
  void reset() override { rng_.seed(seed_); }
  std::string name() const override { return "random"; }

 private:
  uint64_t seed_;
  std::mt19937_64 rng_;
};

// Memorization baseline: finds the training position whose preceding
// (pc, address) sequence has the longest exact common suffix with the
// current history (current access included) and replays the oracle's
// eviction there. Falls back to LRU when no match applies.
class NnBeladyIndex {
 public:
  // Builds from the training split: a Belady rollout records, at every
  // miss-with-eviction position, the evicted line address.
  NnBeladyIndex(const AccessTrace& train, const CacheGeometry& geometry,
                size_t max_suffix = 80);

  // Training trace position with the longest exact suffix match against
  // `history` + `current`, or -1; matched length via out-param.
  int64_t lookup(std::span<const MemoryAccess> history,
                 const MemoryAccess& current, size_t* matched_len = nullptr) const;

  // Evicted line address recorded at a matched miss position, or 0.
  uint64_t decision_at(uint64_t position) const;

  bool empty() const { return by_suffix_.empty(); }
  size_t max_suffix() const { return max_suffix_; }

 private:
  bool suffix_matches(uint64_t position, std::span<const MemoryAccess> history,
                      const MemoryAccess& current, size_t k) const;

  std::vector<MemoryAccess> train_;
  std::unordered_map<uint64_t, uint64_t> by_suffix_;  // (k,hash) -> earliest pos
  std::unordered_map<uint64_t, uint64_t> decisions_;  // miss pos -> evicted line
  size_t max_suffix_;
};

class NnBeladyPolicy : public ReplacementPolicy {
 public:
  explicit NnBeladyPolicy(const NnBeladyIndex& index) : index_(&index) {}
  uint32_t choose_victim(const ReplacementState& state) override;
  std::string name() const override { return "nn_belady"; }

 private:
  const NnBeladyIndex* index_;
  LruPolicy lru_;
};

}  // namespace cachelab

#endif  // CACHELAB_BASELINES_HPP_
