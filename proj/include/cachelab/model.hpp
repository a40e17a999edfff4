#ifndef CACHELAB_MODEL_HPP_
#define CACHELAB_MODEL_HPP_

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachelab/cache.hpp"
#include "cachelab/ops.hpp"
#include "cachelab/tensor.hpp"
#include "cachelab/trace.hpp"

namespace cachelab {

enum class EmbedderKind { kVocab, kByte };

struct ModelConfig {
  size_t d_m = 64;       // address embedding dim
  size_t d_p = 64;       // pc embedding dim
  size_t n_p = 5000;     // pc vocab cap
  size_t n_m = 0;        // address vocab size, set from training data
  size_t d_pos = 128;    // positional embedding dim
  size_t d_lstm = 128;   // hidden size
  size_t history_len = 80;
  EmbedderKind embedder_kind = EmbedderKind::kVocab;
  size_t d_byte = 16;    // per-byte embedding dim (byte variant)

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);

  // Small preset used by desk-scale training runs.
  static ModelConfig desk_scale(size_t dims, size_t history);
};

// First-appearance-order id maps built from the training split. Ids are
// row indices into the embedding matrices; unseen keys map to the last
// row (UNK).
class Vocab {
 public:
  Vocab() = default;

  // Address vocab over line ids; pc vocab capped at n_p with the least
  // frequent collapsed to UNK.
  static Vocab build(const AccessTrace& train, const CacheGeometry& geometry,
                     size_t pc_cap);

  uint32_t address_id(uint64_t line) const;  // UNK row when unseen
  uint32_t pc_id(uint64_t pc) const;
  size_t address_rows() const { return addr_count_ + 1; }  // + UNK
  size_t pc_rows() const { return pc_count_ + 1; }
  size_t address_count() const { return addr_count_; }

  std::string to_json() const;
  static Vocab from_json(const std::string& json_text);

 private:
  std::unordered_map<uint64_t, uint32_t> addr_ids_;
  std::unordered_map<uint64_t, uint32_t> pc_ids_;
  size_t addr_count_ = 0;
  size_t pc_count_ = 0;
};

// Sinusoidal positional embedding for a (non-positive) position.
ops::Vec positional_embedding(int64_t pos, size_t d_pos);

struct PolicyOutput {
  ops::Vec evict_probs;        // length W, sums to 1
  ops::Vec pred_log_reuse;     // length W
  std::vector<ops::Vec> line_contexts;  // g_w, kept for loss backward
};

// Argmax of evict_probs, ties to the lowest way.
uint32_t act(const PolicyOutput& output);

struct HistoryState {
  ops::Vec h, c;
  std::deque<ops::Vec> buffer;  // last H hidden states, oldest first
};

struct EmbedCache {
  // Byte-embedder intermediate (concatenated byte rows); empty in vocab mode.
  ops::Vec byte_concat;
};

// Caches for one scored decision, consumed by backward.
struct ScoreCache {
  std::vector<uint64_t> line_ids;
  std::vector<ops::Vec> queries;       // q_w = e(l_w)
  std::vector<ops::Vec> keys;          // k_j = [h_j; e(pos_j)]
  std::vector<ops::Vec> projected;     // u_j = W_e k_j
  std::vector<ops::Vec> alphas;        // per-way attention weights
  std::vector<EmbedCache> query_caches;
  PolicyOutput output;
  ops::Vec logits;
  size_t buffer_len = 0;
};

class Model {
 public:
  Model(const ModelConfig& config, Vocab vocab, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  ops::Vec embed_line(uint64_t line_id, EmbedCache* cache = nullptr) const;
  void embed_line_backward(uint64_t line_id, const EmbedCache& cache,
                           std::span<const double> dvec);
  ops::Vec embed_pc(uint64_t pc, EmbedCache* cache = nullptr) const;
  void embed_pc_backward(uint64_t pc, const EmbedCache& cache,
                         std::span<const double> dvec);

  // [e(m); e(pc)] for one access (line granularity for the address half).
  ops::Vec embed_access(const MemoryAccess& access,
                        const CacheGeometry& geometry) const;

  HistoryState fresh_history() const;
  // One LSTM step; pushes the new hidden state into the ring buffer. The
  // cache, when requested, enables backpropagation through the step.
  void advance_history(HistoryState& history, std::span<const double> access_embedding,
                       ops::LstmCache* cache = nullptr) const;

  // Scores the resident lines against the current buffer. Inference path
  // when cache is null.
  PolicyOutput score_lines(const HistoryState& history,
                           const CacheSetState& cache_set,
                           ScoreCache* cache = nullptr) const;

  // Backward through one scored decision. dlogits/dreuse are upstream
  // gradients; per-buffer-slot hidden-state gradients are accumulated into
  // dbuffer (sized buffer_len x d_lstm by the caller).
  void score_lines_backward(const ScoreCache& cache,
                            std::span<const double> dlogits,
                            std::span<const double> dreuse,
                            std::vector<ops::Vec>& dbuffer);

  void save_checkpoint(const std::string& path) const;
  static Model load_checkpoint(const std::string& path);

 private:
  void init_params(uint64_t seed);

  ModelConfig config_;
  Vocab vocab_;
  ParameterStore params_;
  std::vector<ops::Vec> pos_table_;  // e(pos) for pos = -H+1 .. 0
};

// Learned replacement policy: greedy argmax over model scores. Owns one
// HistoryState per rollout.
class LearnedPolicy : public ReplacementPolicy {
 public:
  LearnedPolicy(Model& model, const CacheGeometry& geometry)
      : model_(&model), geometry_(geometry), history_(model.fresh_history()) {}

  void observe(const ReplacementState& state) override;
  uint32_t choose_victim(const ReplacementState& state) override;
  void reset() override { history_ = model_->fresh_history(); }
  std::optional<std::vector<double>> last_decision_probs() const override {
    return last_probs_;
  }
  std::string name() const override { return "learned"; }

 private:
  Model* model_;
  CacheGeometry geometry_;
  HistoryState history_;
  std::optional<std::vector<double>> last_probs_;
};

// Ablation policy: evicts the line with the highest predicted reuse
// distance, ignoring the policy head.
class DirectReusePolicy : public ReplacementPolicy {
 public:
  DirectReusePolicy(Model& model, const CacheGeometry& geometry)
      : model_(&model), geometry_(geometry), history_(model.fresh_history()) {}

  void observe(const ReplacementState& state) override;
  uint32_t choose_victim(const ReplacementState& state) override;
  void reset() override { history_ = model_->fresh_history(); }
  std::string name() const override { return "learned_direct_reuse"; }

 private:
  Model* model_;
  CacheGeometry geometry_;
  HistoryState history_;
};

}  // namespace cachelab

#endif  // CACHELAB_MODEL_HPP_
