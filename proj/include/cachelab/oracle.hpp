#ifndef CACHELAB_ORACLE_HPP_
#define CACHELAB_ORACLE_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cachelab/cache.hpp"
#include "cachelab/trace.hpp"

namespace cachelab {

// Sentinel for "never accessed again". Kept distinct from any finite
// distance; capped to a finite surrogate only where a number is required.
inline constexpr uint64_t kInfiniteReuse = std::numeric_limits<uint64_t>::max();

// Per-position next-occurrence table over a trace. For a line whose most
// recent access was at index t', its reuse distance at time t is
// next_occurrence(t') - t (the next access itself counts as distance 1).
class ReuseDistanceTable {
 public:
  ReuseDistanceTable() = default;
  ReuseDistanceTable(const AccessTrace& trace, const CacheGeometry& geometry);

  // Trace index of the next access to the same line, or kInfiniteReuse.
  uint64_t next_occurrence(uint64_t index) const { return next_[index]; }

  // Reuse distance at time `now` of the line last accessed at
  // `last_access_index` (requires last_access_index <= now).
  uint64_t distance(uint64_t last_access_index, uint64_t now) const {
    const uint64_t next = next_[last_access_index];
    return next == kInfiniteReuse ? kInfiniteReuse : next - now;
  }

  // Finite surrogate for INFINITE: remaining trace length + 1.
  uint64_t cap(uint64_t now) const { return size_ - now + 1; }
  uint64_t capped_distance(uint64_t last_access_index, uint64_t now) const {
    const uint64_t d = distance(last_access_index, now);
    return d == kInfiniteReuse ? cap(now) : d;
  }

  size_t size() const { return size_; }
  std::string to_json() const;

 private:
  std::vector<uint64_t> next_;
  size_t size_ = 0;
};

ReuseDistanceTable build_reuse_table(const AccessTrace& trace,
                                     const CacheGeometry& geometry);

struct OracleDecision {
  uint32_t way = 0;
  std::vector<uint64_t> distances;     // exact, kInfiniteReuse for never
  std::vector<uint32_t> optimal_set;   // all ways tied at the maximum
};

enum class TieBreak { kLowestWay, kRandom };

// One eviction decision from exact reuse distances. With a window, exact
// distances greater than the window are treated as INFINITE first.
OracleDecision belady_decide(const CacheSetState& set, uint64_t now,
                             const ReuseDistanceTable& table,
                             std::optional<uint64_t> window, TieBreak tie_break,
                             std::mt19937_64* tie_rng);

// Softmax over (capped) reuse distances / temperature.
std::vector<double> smoothed_oracle_distribution(
    const std::vector<uint64_t>& capped_distances, double temperature);

// Belady's as a ReplacementPolicy. Labeling configuration (no window,
// lowest-way ties) is the default; windowed variants break ties randomly
// from the given seed.
class BeladyPolicy : public ReplacementPolicy {
 public:
  explicit BeladyPolicy(const ReuseDistanceTable& table,
                        std::optional<uint64_t> window = std::nullopt,
                        TieBreak tie_break = TieBreak::kLowestWay,
                        uint64_t tie_seed = 0)
      : table_(&table), window_(window), tie_break_(tie_break),
        tie_seed_(tie_seed), tie_rng_(tie_seed) {}

  uint32_t choose_victim(const ReplacementState& state) override;
  void reset() override { tie_rng_.seed(tie_seed_); }
  std::string name() const override;

 private:
  const ReuseDistanceTable* table_;
  std::optional<uint64_t> window_;
  TieBreak tie_break_;
  uint64_t tie_seed_;
  std::mt19937_64 tie_rng_;
};

}  // namespace cachelab

#endif  // CACHELAB_ORACLE_HPP_
