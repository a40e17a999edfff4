#ifndef CACHELAB_TRAINING_HPP_
#define CACHELAB_TRAINING_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachelab/cache.hpp"
#include "cachelab/losses.hpp"
#include "cachelab/model.hpp"
#include "cachelab/oracle.hpp"
#include "cachelab/trace.hpp"

namespace cachelab {

// One visited miss-with-eviction state with its oracle labels.
struct BufferEntry {
  uint64_t trace_index = 0;
  uint64_t set_id = 0;
  std::vector<CacheWay> lines;              // pre-eviction set contents
  std::vector<uint64_t> exact_distances;    // kInfiniteReuse possible
  std::vector<double> capped_distances;     // finite surrogate applied
  uint32_t oracle_way = 0;                  // lowest-way tie rule
};

struct StateBuffer {
  std::vector<BufferEntry> entries;
  std::unordered_map<uint64_t, size_t> by_trace_index;

  size_t size() const { return entries.size(); }
  const BufferEntry* find(uint64_t trace_index) const;
};

// Rolls the given policy over the trace and records every miss state with
// oracle labels from the reuse table.
StateBuffer collect_states(ReplacementPolicy& policy, const AccessTrace& trace,
                           const CacheGeometry& geometry,
                           const ReuseDistanceTable& table);

enum class EvalPolicyMode { kPolicyHead, kDirectReuse };

struct TrainConfig;

// Forward + backward over one truncated window anchored at a miss state:
// H gradient-free warm-up steps, then H steps whose buffered decisions are
// scored against their labels. Returns the summed loss; gradients are
// accumulated into the model parameters, scaled by grad_scale. Exposed for
// gradient-checking the full model loss.
double train_window(Model& model, const AccessTrace& trace,
                    const CacheGeometry& geometry, const StateBuffer& buffer,
                    uint64_t anchor, const TrainConfig& config,
                    double grad_scale);

struct TrainConfig {
  uint64_t total_steps = 10000;       // K
  size_t batch_size = 32;
  size_t history_len = 80;            // H: warm-up length and loss window
  uint64_t recollect_period = 5000;
  LossKind loss = LossKind::kRankingReuse;
  bool dagger = true;                 // off => always collect under the oracle
  EvalPolicyMode eval_policy = EvalPolicyMode::kPolicyHead;
  double alpha = 10.0;
  double learning_rate = 0.001;
  double clip_norm = 0.0;
  uint64_t seed = 0;
  size_t early_stop_patience = 0;     // validation events; 0 disables

  std::string to_json() const;
  static TrainConfig from_json(const std::string& json_text);
};

struct TrainLogRecord {
  uint64_t step = 0;
  double train_loss = 0.0;
  double valid_hit_rate = 0.0;
  size_t collected_buffer_size = 0;
  double wall_time_s = 0.0;
  std::string event;  // "recollect" or "final"
  std::string collection_policy;  // "oracle" (off-policy) or "learned"

  std::string to_json() const;
};

struct TrainResult {
  std::vector<TrainLogRecord> log;
  double best_valid_hit_rate = 0.0;
  uint64_t steps_run = 0;
};

// Alg-style imitation training with truncated backpropagation. The model is
// left holding the best-validation parameters. When log_path is set, log
// records stream to it as JSON lines.
TrainResult train(const AccessTrace& train_trace, const AccessTrace& valid_trace,
                  const CacheGeometry& geometry, Model& model,
                  const TrainConfig& config,
                  const std::string& log_path = std::string());

}  // namespace cachelab

#endif  // CACHELAB_TRAINING_HPP_
