#include "cachelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cachelab/baselines.hpp"
#include "json.hpp"

namespace cachelab {

std::optional<double> normalized_hit_rate(double r, double r_lru, double r_opt) {
  if (r_opt < r_lru) throw std::invalid_argument("r_opt must be >= r_lru");
  if (r_opt == r_lru) return std::nullopt;
  return (r - r_lru) / (r_opt - r_lru);
}

double topk_accuracy(const std::vector<MissDecision>& decisions, size_t k) {
  if (decisions.empty()) return 0.0;
  size_t hits = 0;
  for (const MissDecision& d : decisions) {
    if (k > d.probs.size()) {
      throw std::invalid_argument("topk_accuracy: K exceeds associativity");
    }
    // Rank ways by probability, ties by lowest way.
    std::vector<uint32_t> order(d.probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
      return d.probs[a] > d.probs[b];
    });
    for (size_t i = 0; i < k; ++i) {
      if (order[i] == d.oracle_way) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / decisions.size();
}

double reuse_distance_gap(const std::vector<MissDecision>& decisions) {
  if (decisions.empty()) return 0.0;
  double sum = 0;
  for (const MissDecision& d : decisions) {
    sum += d.oracle_capped_distance - d.chosen_capped_distance;
  }
  return sum / decisions.size();
}

namespace {

// Rollout shim that captures a MissDecision at each eviction.
class Recorder : public ReplacementPolicy {
 public:
  Recorder(ReplacementPolicy& inner, const ReuseDistanceTable& table)
      : inner_(&inner), table_(&table) {}

  void observe(const ReplacementState& state) override { inner_->observe(state); }
  void on_access(const ReplacementState& state, const AccessOutcome& outcome) override {
    inner_->on_access(state, outcome);
  }
  void reset() override { inner_->reset(); }
  std::string name() const override { return inner_->name(); }

  uint32_t choose_victim(const ReplacementState& state) override {
    const uint32_t chosen = inner_->choose_victim(state);
    MissDecision decision;
    decision.chosen = chosen;
    if (auto probs = inner_->last_decision_probs()) {
      decision.probs = std::move(*probs);
    } else {
      decision.probs.assign(state.cache_set.ways.size(), 0.0);
      decision.probs[chosen] = 1.0;
    }
    const OracleDecision oracle =
        belady_decide(state.cache_set, state.trace_index, *table_, std::nullopt,
                      TieBreak::kLowestWay, nullptr);
    decision.oracle_way = oracle.way;
    const uint64_t cap = table_->cap(state.trace_index);
    const auto capped = [&](uint64_t d) {
      return static_cast<double>(d == kInfiniteReuse ? cap : d);
    };
    decision.oracle_capped_distance = capped(oracle.distances[oracle.way]);
    decision.chosen_capped_distance = capped(oracle.distances[chosen]);
    decisions.push_back(std::move(decision));
    return chosen;
  }

  std::vector<MissDecision> decisions;

 private:
  ReplacementPolicy* inner_;
  const ReuseDistanceTable* table_;
};

}  // namespace

DecisionTrace collect_decisions(ReplacementPolicy& policy,
                                const AccessTrace& trace,
                                const CacheGeometry& geometry,
                                const ReuseDistanceTable& table) {
  Recorder recorder(policy, table);
  DecisionTrace out;
  out.stats = rollout(trace, geometry, recorder).stats;
  out.stats.policy = policy.name();
  out.decisions = std::move(recorder.decisions);
  return out;
}

std::string Report::to_json() const {
  nlohmann::json policies_json = nlohmann::json::array();
  for (const PolicyReport& p : policies) {
    nlohmann::json j{{"name", p.name},
                     {"hits", p.hits},
                     {"misses", p.misses},
                     {"hit_rate", p.hit_rate},
                     {"top1", p.top1},
                     {"top5", p.top5},
                     {"reuse_gap", p.reuse_gap}};
    if (p.normalized_hit_rate) {
      j["normalized_hit_rate"] = *p.normalized_hit_rate;
    } else {
      j["normalized_hit_rate"] = nullptr;
    }
    policies_json.push_back(std::move(j));
  }
  nlohmann::json j{{"trace_id", trace_id},
                   {"geometry", nlohmann::json::parse(geometry_to_json(geometry))},
                   {"policies", policies_json}};
  return j.dump(2);
}

Report Report::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Report report;
  report.trace_id = j.at("trace_id").get<std::string>();
  report.geometry = geometry_from_json(j.at("geometry").dump());
  for (const auto& pj : j.at("policies")) {
    PolicyReport p;
    p.name = pj.at("name").get<std::string>();
    p.hits = pj.at("hits").get<uint64_t>();
    p.misses = pj.at("misses").get<uint64_t>();
    p.hit_rate = pj.at("hit_rate").get<double>();
    if (!pj.at("normalized_hit_rate").is_null()) {
      p.normalized_hit_rate = pj.at("normalized_hit_rate").get<double>();
    }
    p.top1 = pj.value("top1", 0.0);
    p.top5 = pj.value("top5", 0.0);
    p.reuse_gap = pj.value("reuse_gap", 0.0);
    report.policies.push_back(std::move(p));
  }
  return report;
}

std::string reports_to_csv(const std::vector<Report>& reports) {
  std::ostringstream out;
  out << "trace_id,policy,hits,misses,hit_rate,normalized_hit_rate,top1,top5,"
         "reuse_gap\n";
  for (const Report& report : reports) {
    for (const PolicyReport& p : report.policies) {
      out << report.trace_id << ',' << p.name << ',' << p.hits << ','
          << p.misses << ',' << p.hit_rate << ',';
      if (p.normalized_hit_rate) out << *p.normalized_hit_rate;
      out << ',' << p.top1 << ',' << p.top5 << ',' << p.reuse_gap << '\n';
    }
  }
  return out.str();
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << "x,value,stderr\n";
  for (const CurvePoint& p : curve) {
    out << p.x << ',' << p.value << ',' << p.stderr_ << '\n';
  }
  return out.str();
}

std::vector<CurvePoint> sweep_window(const AccessTrace& trace,
                                     const CacheGeometry& geometry,
                                     const std::vector<uint64_t>& windows,
                                     const std::vector<uint64_t>& tie_seeds) {
  if (tie_seeds.empty()) throw std::invalid_argument("sweep_window needs tie seeds");
  const ReuseDistanceTable table(trace, geometry);
  double r_lru, r_opt;
  {
    LruPolicy lru;
    r_lru = rollout(trace, geometry, lru).stats.hit_rate();
    BeladyPolicy opt(table);
    r_opt = rollout(trace, geometry, opt).stats.hit_rate();
  }

  std::vector<CurvePoint> curve;
  for (uint64_t x : windows) {
    std::vector<double> values;
    for (uint64_t seed : tie_seeds) {
      BeladyPolicy windowed(table, x, TieBreak::kRandom, seed);
      const double r = rollout(trace, geometry, windowed).stats.hit_rate();
      const auto norm = normalized_hit_rate(r, r_lru, r_opt);
      values.push_back(norm.value_or(0.0));
    }
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double stderr_ =
        values.size() > 1 ? std::sqrt(var / (values.size() - 1)) /
                                std::sqrt(static_cast<double>(values.size()))
                          : 0.0;
    curve.push_back({static_cast<double>(x), mean, stderr_});
  }
  return curve;
}

HitStats hit_stats_skipping(const std::vector<AccessOutcome>& outcomes,
                            size_t skip, const std::string& policy_name) {
  HitStats stats;
  stats.policy = policy_name;
  for (size_t i = skip; i < outcomes.size(); ++i) {
    if (outcomes[i].reward) {
      ++stats.hits;
    } else {
      ++stats.misses;
    }
  }
  return stats;
}

}  // namespace cachelab
