#include "cachelab/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "cachelab/kernels.hpp"
#include "json.hpp"

namespace cachelab {

const BufferEntry* StateBuffer::find(uint64_t trace_index) const {
  const auto it = by_trace_index.find(trace_index);
  return it == by_trace_index.end() ? nullptr : &entries[it->second];
}

StateBuffer collect_states(ReplacementPolicy& policy, const AccessTrace& trace,
                           const CacheGeometry& geometry,
                           const ReuseDistanceTable& table) {
  RolloutOptions options;
  options.record_miss_states = true;
  const RolloutResult result = rollout(trace, geometry, policy, options);

  StateBuffer buffer;
  buffer.entries.reserve(result.miss_states.size());
  for (const StateSnapshot& snapshot : result.miss_states) {
    BufferEntry entry;
    entry.trace_index = snapshot.trace_index;
    entry.set_id = snapshot.set_id;
    entry.lines = snapshot.lines;
    const CacheSetState set{snapshot.lines};
    const OracleDecision decision = belady_decide(
        set, snapshot.trace_index, table, std::nullopt, TieBreak::kLowestWay,
        nullptr);
    entry.exact_distances = decision.distances;
    entry.capped_distances.reserve(decision.distances.size());
    const uint64_t cap = table.cap(snapshot.trace_index);
    for (uint64_t d : decision.distances) {
      entry.capped_distances.push_back(
          static_cast<double>(d == kInfiniteReuse ? cap : d));
    }
    entry.oracle_way = decision.way;
    buffer.by_trace_index.emplace(entry.trace_index, buffer.entries.size());
    buffer.entries.push_back(std::move(entry));
  }
  return buffer;
}

std::string TrainConfig::to_json() const {
  nlohmann::json j{{"total_steps", total_steps},
                   {"batch_size", batch_size},
                   {"history_len", history_len},
                   {"recollect_period", recollect_period},
                   {"loss", loss_kind_name(loss)},
                   {"dagger", dagger},
                   {"eval_policy", eval_policy == EvalPolicyMode::kPolicyHead
                                       ? "policy_head"
                                       : "direct_reuse"},
                   {"alpha", alpha},
                   {"learning_rate", learning_rate},
                   {"clip_norm", clip_norm},
                   {"seed", seed},
                   {"early_stop_patience", early_stop_patience}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  TrainConfig c;
  c.total_steps = j.value("total_steps", c.total_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.history_len = j.value("history_len", c.history_len);
  c.recollect_period = j.value("recollect_period", c.recollect_period);
  c.loss = loss_kind_from_name(j.value("loss", std::string("ranking+reuse")));
  c.dagger = j.value("dagger", c.dagger);
  const std::string mode = j.value("eval_policy", std::string("policy_head"));
  if (mode == "policy_head") {
    c.eval_policy = EvalPolicyMode::kPolicyHead;
  } else if (mode == "direct_reuse") {
    c.eval_policy = EvalPolicyMode::kDirectReuse;
  } else {
    throw std::invalid_argument("unknown eval_policy: " + mode);
  }
  c.alpha = j.value("alpha", c.alpha);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  return c;
}

std::string TrainLogRecord::to_json() const {
  nlohmann::json j{{"step", step},
                   {"train_loss", train_loss},
                   {"valid_hit_rate", valid_hit_rate},
                   {"collected_buffer_size", collected_buffer_size},
                   {"wall_time", wall_time_s},
                   {"event", event},
                   {"collection_policy", collection_policy}};
  return j.dump();
}

namespace {

bool uses_ranking(LossKind kind) {
  return kind == LossKind::kRankingReuse || kind == LossKind::kRankingOnly;
}

bool uses_reuse(LossKind kind) {
  return kind == LossKind::kRankingReuse || kind == LossKind::kLlReuse;
}

}  // namespace

double train_window(Model& model, const AccessTrace& trace,
                    const CacheGeometry& geometry, const StateBuffer& buffer,
                    uint64_t anchor, const TrainConfig& config,
                    double grad_scale) {
  const size_t h = config.history_len;
  const uint64_t start = anchor > h ? anchor - h : 0;
  const uint64_t stop = std::min<uint64_t>(anchor + h, trace.size());

  HistoryState history = model.fresh_history();
  for (uint64_t t = start; t < anchor; ++t) {
    const ops::Vec x = model.embed_access(trace.accesses[t], geometry);
    model.advance_history(history, x);
  }

  struct StepCache {
    ops::LstmCache lstm;
    EmbedCache line_cache, pc_cache;
    uint64_t line = 0, pc = 0;
  };
  std::vector<StepCache> steps;
  steps.reserve(stop - anchor);
  // Attention gradients per absolute time in [start, stop).
  std::vector<ops::Vec> attention_dh(stop - start,
                                     ops::Vec(model.config().d_lstm, 0.0));

  double window_loss = 0;
  for (uint64_t t = anchor; t < stop; ++t) {
    StepCache step;
    step.line = geometry.line_id(trace.accesses[t].address);
    step.pc = trace.accesses[t].pc;
    const ops::Vec x = ops::concat(model.embed_line(step.line, &step.line_cache),
                                   model.embed_pc(step.pc, &step.pc_cache));
    model.advance_history(history, x, &step.lstm);
    steps.push_back(std::move(step));

    const BufferEntry* entry = buffer.find(t);
    if (!entry) continue;

    const CacheSetState set{entry->lines};
    ScoreCache score;
    const PolicyOutput output = model.score_lines(history, set, &score);
    const size_t w_count = output.evict_probs.size();

    LossResult policy_part;
    if (uses_ranking(config.loss)) {
      policy_part =
          ranking_loss(output.evict_probs, entry->capped_distances, config.alpha);
    } else {
      policy_part = ll_loss(output.evict_probs, entry->oracle_way);
    }
    ops::Vec dreuse(w_count, 0.0);
    if (uses_reuse(config.loss)) {
      const LossResult reuse_part =
          reuse_loss(output.pred_log_reuse, entry->capped_distances);
      window_loss += reuse_part.loss;
      for (size_t w = 0; w < w_count; ++w) {
        dreuse[w] = reuse_part.grad[w] * grad_scale;
      }
    }
    window_loss += policy_part.loss;

    ops::Vec dprobs(w_count);
    for (size_t w = 0; w < w_count; ++w) {
      dprobs[w] = policy_part.grad[w] * grad_scale;
    }
    const ops::Vec dlogits = ops::softmax_backward(output.evict_probs, dprobs);

    const size_t n = score.buffer_len;
    std::vector<ops::Vec> dbuffer(n, ops::Vec(model.config().d_lstm, 0.0));
    model.score_lines_backward(score, dlogits, dreuse, dbuffer);
    // Buffer slot j holds the hidden state of absolute time t - n + 1 + j;
    // contributions to warm-up times are dropped.
    for (size_t j = 0; j < n; ++j) {
      const uint64_t time = t - n + 1 + j;
      if (time < anchor) continue;
      kernels::axpy(1.0, dbuffer[j].data(), attention_dh[time - start].data(),
                    model.config().d_lstm);
    }
  }

  // Truncated backpropagation through the window's LSTM steps.
  const size_t d = model.config().d_lstm;
  ops::Vec dh_next(d, 0.0), dc_next(d, 0.0);
  Tensor& dwx = model.params().at("lstm.wx").grad;
  Tensor& dwh = model.params().at("lstm.wh").grad;
  Tensor& db = model.params().at("lstm.b").grad;
  const Tensor& wx = model.params().at("lstm.wx").value;
  const Tensor& wh = model.params().at("lstm.wh").value;
  for (size_t i = steps.size(); i-- > 0;) {
    const uint64_t t = anchor + i;
    ops::Vec dh = dh_next;
    kernels::axpy(1.0, attention_dh[t - start].data(), dh.data(), d);
    const ops::LstmGrads grads =
        ops::lstm_cell_backward(wx, wh, steps[i].lstm, dh, dc_next, dwx, dwh, db);
    const size_t d_m = model.config().d_m;
    model.embed_line_backward(steps[i].line, steps[i].line_cache,
                              {grads.dx.data(), d_m});
    model.embed_pc_backward(steps[i].pc, steps[i].pc_cache,
                            {grads.dx.data() + d_m, grads.dx.size() - d_m});
    dh_next = grads.dh_prev;
    dc_next = grads.dc_prev;
  }
  return window_loss;
}

namespace {

double evaluate_hit_rate(Model& model, const AccessTrace& trace,
                         const CacheGeometry& geometry, EvalPolicyMode mode) {
  if (trace.empty()) return 0.0;
  if (mode == EvalPolicyMode::kDirectReuse) {
    DirectReusePolicy policy(model, geometry);
    return rollout(trace, geometry, policy).stats.hit_rate();
  }
  LearnedPolicy policy(model, geometry);
  return rollout(trace, geometry, policy).stats.hit_rate();
}

std::map<std::string, Tensor> snapshot_params(const ParameterStore& store) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, p] : store) out.emplace(name, p.value);
  return out;
}

void restore_params(ParameterStore& store,
                    const std::map<std::string, Tensor>& snapshot) {
  for (auto& [name, p] : store) p.value = snapshot.at(name);
}

}  // namespace

TrainResult train(const AccessTrace& train_trace, const AccessTrace& valid_trace,
                  const CacheGeometry& geometry, Model& model,
                  const TrainConfig& config, const std::string& log_path) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ofstream log_out;
  if (!log_path.empty()) {
    log_out.open(log_path);
    if (!log_out) throw std::runtime_error("cannot open training log: " + log_path);
  }
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  TrainResult result;
  const auto emit = [&](TrainLogRecord record) {
    if (log_out.is_open()) log_out << record.to_json() << "\n" << std::flush;
    result.log.push_back(std::move(record));
  };

  const ReuseDistanceTable table(train_trace, geometry);
  AdamConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  adam_config.clip_norm = config.clip_norm;
  AdamState adam(model.params(), adam_config);
  std::mt19937_64 rng(config.seed);

  StateBuffer buffer;
  std::string collection_policy = "none";
  auto best = snapshot_params(model.params());
  result.best_valid_hit_rate = -1.0;
  size_t events_since_best = 0;
  double loss_accumulator = 0;
  uint64_t windows_since_event = 0;
  bool stop_early = false;

  const auto validate_and_log = [&](uint64_t step, const std::string& event) {
    TrainLogRecord record;
    record.step = step;
    record.event = event;
    record.collection_policy = collection_policy;
    record.collected_buffer_size = buffer.size();
    record.train_loss =
        windows_since_event == 0 ? 0.0 : loss_accumulator / windows_since_event;
    record.valid_hit_rate =
        evaluate_hit_rate(model, valid_trace, geometry, config.eval_policy);
    record.wall_time_s = elapsed();
    loss_accumulator = 0;
    windows_since_event = 0;
    if (record.valid_hit_rate > result.best_valid_hit_rate) {
      result.best_valid_hit_rate = record.valid_hit_rate;
      best = snapshot_params(model.params());
      events_since_best = 0;
    } else {
      ++events_since_best;
      if (config.early_stop_patience > 0 &&
          events_since_best >= config.early_stop_patience) {
        stop_early = true;
      }
    }
    emit(std::move(record));
  };

  for (uint64_t step = 0; step < config.total_steps && !stop_early; ++step) {
    if (step % config.recollect_period == 0) {
      if (step == 0 || !config.dagger) {
        // First collection (and every collection when DAgger is off)
        // follows the oracle.
        BeladyPolicy oracle(table);
        buffer = collect_states(oracle, train_trace, geometry, table);
        collection_policy = "oracle";
      } else {
        LearnedPolicy learned(model, geometry);
        buffer = collect_states(learned, train_trace, geometry, table);
        collection_policy = "learned";
      }
      if (buffer.size() == 0) {
        throw std::runtime_error("training trace has no full-set miss states");
      }
      validate_and_log(step, "recollect");
    }

    std::uniform_int_distribution<size_t> pick(0, buffer.size() - 1);
    const double grad_scale = 1.0 / static_cast<double>(config.batch_size);
    double batch_loss = 0;
    for (size_t b = 0; b < config.batch_size; ++b) {
      const BufferEntry& entry = buffer.entries[pick(rng)];
      batch_loss += train_window(model, train_trace, geometry, buffer,
                                 entry.trace_index, config, grad_scale);
    }
    adam.step(model.params());
    loss_accumulator += batch_loss / config.batch_size;
    ++windows_since_event;
  }

  validate_and_log(adam.step_count(), "final");
  result.steps_run = adam.step_count();

  // Leave the model holding the best-validation parameters.
  restore_params(model.params(), best);
  return result;
}

}  // namespace cachelab
