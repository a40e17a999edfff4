#include "cachelab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace cachelab {

ReuseDistanceTable::ReuseDistanceTable(const AccessTrace& trace,
                                       const CacheGeometry& geometry) {
  size_ = trace.size();
  next_.assign(size_, kInfiniteReuse);
  // Single backward pass: remember the latest index seen per line.
  std::unordered_map<uint64_t, uint64_t> latest;
  latest.reserve(size_ / 4 + 1);
  for (size_t t = size_; t-- > 0;) {
    const uint64_t line = geometry.line_id(trace.accesses[t].address);
    const auto it = latest.find(line);
    if (it != latest.end()) next_[t] = it->second;
    latest[line] = t;
  }
}

std::string ReuseDistanceTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (uint64_t v : next_) {
    if (v == kInfiniteReuse) {
      arr.push_back(nullptr);
    } else {
      arr.push_back(v);
    }
  }
  return arr.dump();
}

ReuseDistanceTable build_reuse_table(const AccessTrace& trace,
                                     const CacheGeometry& geometry) {
  return ReuseDistanceTable(trace, geometry);
}

OracleDecision belady_decide(const CacheSetState& set, uint64_t now,
                             const ReuseDistanceTable& table,
                             std::optional<uint64_t> window, TieBreak tie_break,
                             std::mt19937_64* tie_rng) {
  OracleDecision decision;
  decision.distances.reserve(set.ways.size());
  for (const CacheWay& way : set.ways) {
    uint64_t d = table.distance(way.last_access_index, now);
    if (window && d != kInfiniteReuse && d > *window) d = kInfiniteReuse;
    decision.distances.push_back(d);
  }
  const uint64_t best =
      *std::max_element(decision.distances.begin(), decision.distances.end());
  for (uint32_t w = 0; w < decision.distances.size(); ++w) {
    if (decision.distances[w] == best) decision.optimal_set.push_back(w);
  }
  if (tie_break == TieBreak::kRandom && decision.optimal_set.size() > 1) {
    if (!tie_rng) throw std::invalid_argument("random tie-breaking needs an RNG");
    std::uniform_int_distribution<size_t> pick(0, decision.optimal_set.size() - 1);
    decision.way = decision.optimal_set[pick(*tie_rng)];
  } else {
    decision.way = decision.optimal_set.front();
  }
  return decision;
}

std::vector<double> smoothed_oracle_distribution(
    const std::vector<uint64_t>& capped_distances, double temperature) {
  if (temperature <= 0) throw std::invalid_argument("temperature must be positive");
  std::vector<double> probs(capped_distances.size());
  double max_z = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < probs.size(); ++i) {
    probs[i] = static_cast<double>(capped_distances[i]) / temperature;
    max_z = std::max(max_z, probs[i]);
  }
  double sum = 0;
  for (double& p : probs) {
    p = std::exp(p - max_z);
    sum += p;
  }
  for (double& p : probs) p /= sum;
  return probs;
}

uint32_t BeladyPolicy::choose_victim(const ReplacementState& state) {
  return belady_decide(state.cache_set, state.trace_index, *table_, window_,
                       tie_break_, &tie_rng_)
      .way;
}

std::string BeladyPolicy::name() const {
  if (!window_) return "belady";
  return "belady_w" + std::to_string(*window_);
}

}  // namespace cachelab
