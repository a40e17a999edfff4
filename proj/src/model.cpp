#include "cachelab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cachelab/kernels.hpp"
#include "json.hpp"

namespace cachelab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace {

std::string kind_name(EmbedderKind k) {
  return k == EmbedderKind::kVocab ? "vocab" : "byte";
}

EmbedderKind kind_from_name(const std::string& s) {
  if (s == "vocab") return EmbedderKind::kVocab;
  if (s == "byte") return EmbedderKind::kByte;
  throw std::invalid_argument("unknown embedder kind: " + s);
}

std::string to_hex(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t from_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

std::string ModelConfig::to_json() const {
  nlohmann::json j{{"d_m", d_m},     {"d_p", d_p},
                   {"n_p", n_p},     {"n_m", n_m},
                   {"d_pos", d_pos}, {"d_lstm", d_lstm},
                   {"history_len", history_len},
                   {"embedder_kind", kind_name(embedder_kind)},
                   {"d_byte", d_byte}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  ModelConfig c;
  c.d_m = j.value("d_m", c.d_m);
  c.d_p = j.value("d_p", c.d_p);
  c.n_p = j.value("n_p", c.n_p);
  c.n_m = j.value("n_m", c.n_m);
  c.d_pos = j.value("d_pos", c.d_pos);
  c.d_lstm = j.value("d_lstm", c.d_lstm);
  c.history_len = j.value("history_len", c.history_len);
  c.embedder_kind = kind_from_name(j.value("embedder_kind", std::string("vocab")));
  c.d_byte = j.value("d_byte", c.d_byte);
  return c;
}

ModelConfig ModelConfig::desk_scale(size_t dims, size_t history) {
  ModelConfig c;
  c.d_m = c.d_p = c.d_pos = c.d_lstm = dims;
  c.history_len = history;
  c.d_byte = std::max<size_t>(4, dims / 4);
  return c;
}

Vocab Vocab::build(const AccessTrace& train, const CacheGeometry& geometry,
                   size_t pc_cap) {
  Vocab v;
  // Addresses (line granularity): first-appearance order.
  for (const MemoryAccess& a : train.accesses) {
    const uint64_t line = geometry.line_id(a.address);
    v.addr_ids_.try_emplace(line, static_cast<uint32_t>(v.addr_ids_.size()));
  }
  v.addr_count_ = v.addr_ids_.size();

  // PCs: keep the pc_cap most frequent, earliest first appearance on ties.
  struct PcInfo {
    uint64_t count = 0;
    uint64_t first_seen = 0;
  };
  std::unordered_map<uint64_t, PcInfo> info;
  std::vector<uint64_t> order;
  for (uint64_t t = 0; t < train.size(); ++t) {
    const uint64_t pc = train.accesses[t].pc;
    auto [it, inserted] = info.try_emplace(pc, PcInfo{0, t});
    if (inserted) order.push_back(pc);
    ++it->second.count;
  }
  std::vector<uint64_t> kept = order;
  if (kept.size() > pc_cap) {
    std::sort(kept.begin(), kept.end(), [&](uint64_t a, uint64_t b) {
      const PcInfo& ia = info.at(a);
      const PcInfo& ib = info.at(b);
      if (ia.count != ib.count) return ia.count > ib.count;
      return ia.first_seen < ib.first_seen;
    });
    kept.resize(pc_cap);
    // Ids still assigned in first-appearance order among the kept pcs.
    std::sort(kept.begin(), kept.end(), [&](uint64_t a, uint64_t b) {
      return info.at(a).first_seen < info.at(b).first_seen;
    });
  }
  for (uint64_t pc : kept) {
    v.pc_ids_.emplace(pc, static_cast<uint32_t>(v.pc_ids_.size()));
  }
  v.pc_count_ = v.pc_ids_.size();
  return v;
}

uint32_t Vocab::address_id(uint64_t line) const {
  const auto it = addr_ids_.find(line);
  return it == addr_ids_.end() ? static_cast<uint32_t>(addr_count_) : it->second;
}

uint32_t Vocab::pc_id(uint64_t pc) const {
  const auto it = pc_ids_.find(pc);
  return it == pc_ids_.end() ? static_cast<uint32_t>(pc_count_) : it->second;
}

std::string Vocab::to_json() const {
  std::vector<std::string> addrs(addr_count_), pcs(pc_count_);
  for (const auto& [line, id] : addr_ids_) addrs[id] = to_hex(line);
  for (const auto& [pc, id] : pc_ids_) pcs[id] = to_hex(pc);
  nlohmann::json j{{"addr", addrs}, {"pc", pcs}};
  return j.dump();
}

Vocab Vocab::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Vocab v;
  uint32_t id = 0;
  for (const auto& s : j.at("addr")) {
    v.addr_ids_.emplace(from_hex(s.get<std::string>()), id++);
  }
  v.addr_count_ = v.addr_ids_.size();
  id = 0;
  for (const auto& s : j.at("pc")) {
    v.pc_ids_.emplace(from_hex(s.get<std::string>()), id++);
  }
  v.pc_count_ = v.pc_ids_.size();
  return v;
}

ops::Vec positional_embedding(int64_t pos, size_t d_pos) {
  ops::Vec e(d_pos);
  for (size_t i = 0; 2 * i < d_pos; ++i) {
    const double freq =
        std::pow(10000.0, -(2.0 * static_cast<double>(i)) / static_cast<double>(d_pos));
    const double angle = static_cast<double>(pos) * freq;
    e[2 * i] = std::sin(angle);
    if (2 * i + 1 < d_pos) e[2 * i + 1] = std::cos(angle);
  }
  return e;
}

uint32_t act(const PolicyOutput& output) {
  uint32_t best = 0;
  for (uint32_t w = 1; w < output.evict_probs.size(); ++w) {
    if (output.evict_probs[w] > output.evict_probs[best]) best = w;
  }
  return best;
}

Model::Model(const ModelConfig& config, Vocab vocab, uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  init_params(seed);
  pos_table_.reserve(config_.history_len);
  for (size_t j = 0; j < config_.history_len; ++j) {
    const int64_t pos = -static_cast<int64_t>(config_.history_len - 1) +
                        static_cast<int64_t>(j);
    pos_table_.push_back(positional_embedding(pos, config_.d_pos));
  }
}

void Model::init_params(uint64_t seed) {
  std::mt19937_64 rng(seed);
  if (config_.embedder_kind == EmbedderKind::kVocab) {
    config_.n_m = vocab_.address_count();
    params_.add("embed.addr", {vocab_.address_rows(), config_.d_m});
    params_.add("embed.pc", {vocab_.pc_rows(), config_.d_p});
  } else {
    params_.add("embed.addr_bytes", {8 * 256, config_.d_byte});
    params_.add("embed.addr_proj_w", {config_.d_m, 8 * config_.d_byte});
    params_.add("embed.addr_proj_b", {config_.d_m});
    params_.add("embed.pc_bytes", {8 * 256, config_.d_byte});
    params_.add("embed.pc_proj_w", {config_.d_p, 8 * config_.d_byte});
    params_.add("embed.pc_proj_b", {config_.d_p});
  }
  params_.add("lstm.wx", {4 * config_.d_lstm, config_.d_m + config_.d_p});
  params_.add("lstm.wh", {4 * config_.d_lstm, config_.d_lstm});
  params_.add("lstm.b", {4 * config_.d_lstm});
  params_.add("attn.we", {config_.d_m, config_.d_lstm + config_.d_pos});
  params_.add("head.policy_w", {1, config_.d_lstm});
  params_.add("head.policy_b", {1});
  params_.add("head.reuse_w", {1, config_.d_lstm});
  params_.add("head.reuse_b", {1});

  for (auto& [name, p] : params_) {
    if (p.value.shape.size() == 2) glorot_uniform(p.value, rng);
  }
  // Forget-gate bias +1.
  Tensor& lstm_b = params_.at("lstm.b").value;
  for (size_t j = 0; j < config_.d_lstm; ++j) {
    lstm_b.values[config_.d_lstm + j] = 1.0;
  }
}

namespace {

void embed_bytes(uint64_t value, const Tensor& table, const Tensor& proj_w,
                 const Tensor& proj_b, size_t d_byte, ops::Vec& out,
                 ops::Vec* concat_out) {
  ops::Vec concat(8 * d_byte);
  for (size_t pos = 0; pos < 8; ++pos) {
    const size_t byte = (value >> (8 * pos)) & 0xff;
    const double* row = table.row(pos * 256 + byte);
    std::copy(row, row + d_byte, concat.begin() + pos * d_byte);
  }
  out = ops::linear(proj_w, concat, &proj_b);
  if (concat_out) *concat_out = std::move(concat);
}

void embed_bytes_backward(uint64_t value, const Tensor& proj_w,
                          const ops::Vec& concat, std::span<const double> dvec,
                          Tensor& dtable, Tensor& dproj_w, Tensor& dproj_b,
                          size_t d_byte) {
  const ops::Vec dconcat =
      ops::linear_backward(proj_w, concat, dvec, dproj_w, &dproj_b);
  for (size_t pos = 0; pos < 8; ++pos) {
    const size_t byte = (value >> (8 * pos)) & 0xff;
    double* grad_row = dtable.row(pos * 256 + byte);
    for (size_t i = 0; i < d_byte; ++i) grad_row[i] += dconcat[pos * d_byte + i];
  }
}

}  // namespace

ops::Vec Model::embed_line(uint64_t line_id, EmbedCache* cache) const {
  if (config_.embedder_kind == EmbedderKind::kVocab) {
    const Tensor& table = params_.at("embed.addr").value;
    const double* row = table.row(vocab_.address_id(line_id));
    return ops::Vec(row, row + config_.d_m);
  }
  ops::Vec out;
  embed_bytes(line_id, params_.at("embed.addr_bytes").value,
              params_.at("embed.addr_proj_w").value,
              params_.at("embed.addr_proj_b").value, config_.d_byte, out,
              cache ? &cache->byte_concat : nullptr);
  return out;
}

void Model::embed_line_backward(uint64_t line_id, const EmbedCache& cache,
                                std::span<const double> dvec) {
  if (config_.embedder_kind == EmbedderKind::kVocab) {
    Tensor& grad = params_.at("embed.addr").grad;
    double* row = grad.row(vocab_.address_id(line_id));
    for (size_t i = 0; i < config_.d_m; ++i) row[i] += dvec[i];
    return;
  }
  embed_bytes_backward(line_id, params_.at("embed.addr_proj_w").value,
                       cache.byte_concat, dvec,
                       params_.at("embed.addr_bytes").grad,
                       params_.at("embed.addr_proj_w").grad,
                       params_.at("embed.addr_proj_b").grad, config_.d_byte);
}

ops::Vec Model::embed_pc(uint64_t pc, EmbedCache* cache) const {
  if (config_.embedder_kind == EmbedderKind::kVocab) {
    const Tensor& table = params_.at("embed.pc").value;
    const double* row = table.row(vocab_.pc_id(pc));
    return ops::Vec(row, row + config_.d_p);
  }
  ops::Vec out;
  embed_bytes(pc, params_.at("embed.pc_bytes").value,
              params_.at("embed.pc_proj_w").value,
              params_.at("embed.pc_proj_b").value, config_.d_byte, out,
              cache ? &cache->byte_concat : nullptr);
  return out;
}

void Model::embed_pc_backward(uint64_t pc, const EmbedCache& cache,
                              std::span<const double> dvec) {
  if (config_.embedder_kind == EmbedderKind::kVocab) {
    Tensor& grad = params_.at("embed.pc").grad;
    double* row = grad.row(vocab_.pc_id(pc));
    for (size_t i = 0; i < config_.d_p; ++i) row[i] += dvec[i];
    return;
  }
  embed_bytes_backward(pc, params_.at("embed.pc_proj_w").value,
                       cache.byte_concat, dvec,
                       params_.at("embed.pc_bytes").grad,
                       params_.at("embed.pc_proj_w").grad,
                       params_.at("embed.pc_proj_b").grad, config_.d_byte);
}

ops::Vec Model::embed_access(const MemoryAccess& access,
                             const CacheGeometry& geometry) const {
  return ops::concat(embed_line(geometry.line_id(access.address)),
                     embed_pc(access.pc));
}

HistoryState Model::fresh_history() const {
  HistoryState state;
  state.h.assign(config_.d_lstm, 0.0);
  state.c.assign(config_.d_lstm, 0.0);
  return state;
}

void Model::advance_history(HistoryState& history,
                            std::span<const double> access_embedding,
                            ops::LstmCache* cache) const {
  ops::LstmCache local = ops::lstm_cell(
      params_.at("lstm.wx").value, params_.at("lstm.wh").value,
      params_.at("lstm.b").value, access_embedding, history.h, history.c);
  history.h = local.h;
  history.c = local.c;
  history.buffer.push_back(local.h);
  if (history.buffer.size() > config_.history_len) history.buffer.pop_front();
  if (cache) *cache = std::move(local);
}

PolicyOutput Model::score_lines(const HistoryState& history,
                                const CacheSetState& cache_set,
                                ScoreCache* cache) const {
  const size_t n = history.buffer.size();
  if (n == 0) throw std::runtime_error("score_lines: empty history buffer");
  const size_t w_count = cache_set.ways.size();
  const Tensor& we = params_.at("attn.we").value;
  const Tensor& policy_w = params_.at("head.policy_w").value;
  const Tensor& reuse_w = params_.at("head.reuse_w").value;
  const double policy_b = params_.at("head.policy_b").value.values[0];
  const double reuse_b = params_.at("head.reuse_b").value.values[0];

  // Shared across ways: projected keys u_j = W_e [h_j; e(pos_j)].
  std::vector<ops::Vec> keys(n), projected(n);
  for (size_t j = 0; j < n; ++j) {
    // Newest entry sits at position 0, older ones at negative positions.
    const size_t pos_index = config_.history_len - n + j;
    keys[j] = ops::concat(history.buffer[j], pos_table_[pos_index]);
    projected[j] = ops::linear(we, keys[j], nullptr);
  }

  PolicyOutput output;
  output.pred_log_reuse.resize(w_count);
  output.line_contexts.resize(w_count);
  ops::Vec logits(w_count);
  std::vector<ops::Vec> queries(w_count), alphas(w_count);
  std::vector<EmbedCache> query_caches(w_count);

  std::vector<std::span<const double>> hidden_views;
  hidden_views.reserve(n);
  for (size_t j = 0; j < n; ++j) hidden_views.emplace_back(history.buffer[j]);

  for (size_t w = 0; w < w_count; ++w) {
    const uint64_t line = cache_set.ways[w].line;
    queries[w] = embed_line(line, cache ? &query_caches[w] : nullptr);
    ops::Vec scores(n);
    for (size_t j = 0; j < n; ++j) {
      scores[j] = kernels::dot(queries[w].data(), projected[j].data(),
                               queries[w].size());
    }
    alphas[w] = ops::softmax(scores);
    output.line_contexts[w] = ops::weighted_sum(alphas[w], hidden_views);
    logits[w] = kernels::dot(policy_w.data(), output.line_contexts[w].data(),
                             config_.d_lstm) +
                policy_b;
    output.pred_log_reuse[w] =
        kernels::dot(reuse_w.data(), output.line_contexts[w].data(),
                     config_.d_lstm) +
        reuse_b;
  }
  output.evict_probs = ops::softmax(logits);

  if (cache) {
    cache->line_ids.resize(w_count);
    for (size_t w = 0; w < w_count; ++w) cache->line_ids[w] = cache_set.ways[w].line;
    cache->queries = std::move(queries);
    cache->keys = std::move(keys);
    cache->projected = std::move(projected);
    cache->alphas = std::move(alphas);
    cache->logits = logits;
    cache->buffer_len = n;
    cache->output = output;
    // query caches only matter in byte mode
    cache->query_caches = std::move(query_caches);
  }
  return output;
}

void Model::score_lines_backward(const ScoreCache& cache,
                                 std::span<const double> dlogits,
                                 std::span<const double> dreuse,
                                 std::vector<ops::Vec>& dbuffer) {
  const size_t n = cache.buffer_len;
  const size_t w_count = cache.line_ids.size();
  const Tensor& we = params_.at("attn.we").value;
  const Tensor& policy_w = params_.at("head.policy_w").value;
  const Tensor& reuse_w = params_.at("head.reuse_w").value;
  Tensor& dwe = params_.at("attn.we").grad;
  Tensor& dpolicy_w = params_.at("head.policy_w").grad;
  Tensor& dpolicy_b = params_.at("head.policy_b").grad;
  Tensor& dreuse_w = params_.at("head.reuse_w").grad;
  Tensor& dreuse_b = params_.at("head.reuse_b").grad;

  std::vector<ops::Vec> du(n, ops::Vec(config_.d_m, 0.0));

  for (size_t w = 0; w < w_count; ++w) {
    const ops::Vec& g = cache.output.line_contexts[w];
    // Heads.
    ops::Vec dg(config_.d_lstm, 0.0);
    kernels::axpy(dlogits[w], policy_w.data(), dg.data(), config_.d_lstm);
    kernels::axpy(dreuse[w], reuse_w.data(), dg.data(), config_.d_lstm);
    kernels::axpy(dlogits[w], g.data(), dpolicy_w.data(), config_.d_lstm);
    kernels::axpy(dreuse[w], g.data(), dreuse_w.data(), config_.d_lstm);
    dpolicy_b.values[0] += dlogits[w];
    dreuse_b.values[0] += dreuse[w];

    // g_w = sum_j alpha_j h_j (values are the raw hidden states).
    ops::Vec dalpha(n);
    for (size_t j = 0; j < n; ++j) {
      // Hidden state view: first d_lstm entries of the key.
      dalpha[j] = kernels::dot(cache.keys[j].data(), dg.data(), config_.d_lstm);
      kernels::axpy(cache.alphas[w][j], dg.data(), dbuffer[j].data(),
                    config_.d_lstm);
    }
    const ops::Vec dscores = ops::softmax_backward(cache.alphas[w], dalpha);

    // scores_j = q_w . u_j
    ops::Vec dq(config_.d_m, 0.0);
    for (size_t j = 0; j < n; ++j) {
      kernels::axpy(dscores[j], cache.projected[j].data(), dq.data(), config_.d_m);
      kernels::axpy(dscores[j], cache.queries[w].data(), du[j].data(), config_.d_m);
    }
    embed_line_backward(cache.line_ids[w], cache.query_caches[w], dq);
  }

  // u_j = W_e k_j; the hidden-state slice of dk_j flows back to the buffer.
  for (size_t j = 0; j < n; ++j) {
    const ops::Vec dk =
        ops::linear_backward(we, cache.keys[j], du[j], dwe, nullptr);
    for (size_t i = 0; i < config_.d_lstm; ++i) dbuffer[j][i] += dk[i];
  }
}

namespace {
constexpr char kCheckpointMagic[8] = {'C', 'L', 'A', 'B', 'C', 'K', 'P', '1'};
}

void Model::save_checkpoint(const std::string& path) const {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, p] : params_) {
    manifest.push_back({{"name", name}, {"shape", p.value.shape}});
  }
  nlohmann::json header{{"version", 1},
                        {"config", nlohmann::json::parse(config_.to_json())},
                        {"vocab", nlohmann::json::parse(vocab_.to_json())},
                        {"manifest", manifest}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_len));
  for (const auto& [name, p] : params_) {
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Model Model::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  const auto header = nlohmann::json::parse(header_text);
  if (header.at("version").get<int>() != 1) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  const ModelConfig config = ModelConfig::from_json(header.at("config").dump());
  Vocab vocab = Vocab::from_json(header.at("vocab").dump());

  Model model(config, std::move(vocab), /*seed=*/0);
  for (const auto& entry : header.at("manifest")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<size_t> shape = entry.at("shape").get<std::vector<size_t>>();
    if (!model.params_.contains(name)) {
      throw std::runtime_error("checkpoint parameter mismatch: " + name);
    }
    Parameter& p = model.params_.at(name);
    if (p.value.shape != shape) {
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
  }
  return model;
}

void LearnedPolicy::observe(const ReplacementState& state) {
  const ops::Vec embedding = model_->embed_access(state.access, geometry_);
  model_->advance_history(history_, embedding);
}

uint32_t LearnedPolicy::choose_victim(const ReplacementState& state) {
  const PolicyOutput output = model_->score_lines(history_, state.cache_set);
  last_probs_ = output.evict_probs;
  return act(output);
}

void DirectReusePolicy::observe(const ReplacementState& state) {
  const ops::Vec embedding = model_->embed_access(state.access, geometry_);
  model_->advance_history(history_, embedding);
}

uint32_t DirectReusePolicy::choose_victim(const ReplacementState& state) {
  const PolicyOutput output = model_->score_lines(history_, state.cache_set);
  uint32_t best = 0;
  for (uint32_t w = 1; w < output.pred_log_reuse.size(); ++w) {
    if (output.pred_log_reuse[w] > output.pred_log_reuse[best]) best = w;
  }
  return best;
}

}  // namespace cachelab
