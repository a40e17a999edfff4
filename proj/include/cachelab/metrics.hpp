#ifndef CACHELAB_METRICS_HPP_
#define CACHELAB_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cachelab/cache.hpp"
#include "cachelab/oracle.hpp"
#include "cachelab/trace.hpp"

namespace cachelab {

// (r - r_lru) / (r_opt - r_lru); nullopt when the gap is zero.
std::optional<double> normalized_hit_rate(double r, double r_lru, double r_opt);

// One eviction decision with everything the miss-state metrics need.
struct MissDecision {
  std::vector<double> probs;  // one-hot for deterministic baselines
  uint32_t chosen = 0;
  uint32_t oracle_way = 0;
  double chosen_capped_distance = 0;
  double oracle_capped_distance = 0;
};

// Fraction of miss states where the oracle's way is among the K
// highest-probability ways (ties by lowest way).
double topk_accuracy(const std::vector<MissDecision>& decisions, size_t k);

// Mean of d(oracle line) - d(chosen line) over miss states, capped.
double reuse_distance_gap(const std::vector<MissDecision>& decisions);

// Rolls the policy over the trace recording a MissDecision at every
// miss-with-eviction, with oracle labels from the reuse table.
struct DecisionTrace {
  HitStats stats;
  std::vector<MissDecision> decisions;
};
DecisionTrace collect_decisions(ReplacementPolicy& policy,
                                const AccessTrace& trace,
                                const CacheGeometry& geometry,
                                const ReuseDistanceTable& table);

struct PolicyReport {
  std::string name;
  uint64_t hits = 0;
  uint64_t misses = 0;
  double hit_rate = 0;
  std::optional<double> normalized_hit_rate;
  double top1 = 0;
  double top5 = 0;
  double reuse_gap = 0;
};

struct Report {
  std::string trace_id;
  CacheGeometry geometry;
  std::vector<PolicyReport> policies;

  std::string to_json() const;
  static Report from_json(const std::string& json_text);
};

// Combined CSV over reports: one row per (trace, policy).
std::string reports_to_csv(const std::vector<Report>& reports);

struct CurvePoint {
  double x = 0;
  double value = 0;
  double stderr_ = 0;
};

// Header "x,value,stderr".
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

// Normalized hit rate of windowed Belady's vs. window size, averaged over
// tie seeds.
std::vector<CurvePoint> sweep_window(const AccessTrace& trace,
                                     const CacheGeometry& geometry,
                                     const std::vector<uint64_t>& windows,
                                     const std::vector<uint64_t>& tie_seeds);

// Hit rate over a trace skipping the first `skip` accesses (cold fill).
HitStats hit_stats_skipping(const std::vector<AccessOutcome>& outcomes,
                            size_t skip, const std::string& policy_name);

}  // namespace cachelab

#endif  // CACHELAB_METRICS_HPP_
