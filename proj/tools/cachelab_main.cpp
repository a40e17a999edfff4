// cachelab: trace-driven cache replacement lab.
//
// Subcommands cover trace generation and filtering, policy simulation,
// imitation training, evaluation reports, and the window/history sweeps.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cachelab/baselines.hpp"
#include "cachelab/cache.hpp"
#include "cachelab/metrics.hpp"
#include "cachelab/model.hpp"
#include "cachelab/oracle.hpp"
#include "cachelab/trace.hpp"
#include "cachelab/training.hpp"

namespace {

using namespace cachelab;

CacheGeometry load_geometry(const std::string& path) {
  if (path.empty()) return CacheGeometry::llc_default();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open geometry file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return geometry_from_json(ss.str());
}

std::vector<uint64_t> parse_id_list(const std::string& csv) {
  std::vector<uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

// Phase spec strings: "cyclic:<n_lines>:<length>" or
// "zipf:<n_lines>:<exponent>:<length>".
PhasedSubSpec parse_phase(const std::string& text) {
  std::stringstream ss(text);
  std::string kind;
  std::getline(ss, kind, ':');
  PhasedSubSpec sub;
  if (kind == "cyclic") {
    std::string n, len;
    std::getline(ss, n, ':');
    std::getline(ss, len, ':');
    sub.pattern = CyclicSpec{std::stoull(n)};
    sub.length = std::stoull(len);
  } else if (kind == "zipf") {
    std::string n, exp, len;
    std::getline(ss, n, ':');
    std::getline(ss, exp, ':');
    std::getline(ss, len, ':');
    sub.pattern = ZipfSpec{std::stoull(n), std::stod(exp)};
    sub.length = std::stoull(len);
  } else {
    throw std::runtime_error("unknown phase kind: " + kind);
  }
  return sub;
}

std::unique_ptr<ReplacementPolicy> make_policy(
    const std::string& name, const CacheGeometry& geometry,
    const ReuseDistanceTable& table, uint64_t seed,
    std::optional<uint64_t> window, Model* model,
    const NnBeladyIndex* nn_index) {
  if (name == "lru") return std::make_unique<LruPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>(seed);
  if (name == "belady") {
    return std::make_unique<BeladyPolicy>(table, window,
                                          window ? TieBreak::kRandom
                                                 : TieBreak::kLowestWay,
                                          seed);
  }
  if (name == "nn") {
    if (!nn_index) throw std::runtime_error("nn policy requires --nn-train");
    return std::make_unique<NnBeladyPolicy>(*nn_index);
  }
  if (name == "learned") {
    if (!model) throw std::runtime_error("learned policy requires --model");
    return std::make_unique<LearnedPolicy>(*model, geometry);
  }
  if (name == "learned-direct-reuse") {
    if (!model) throw std::runtime_error("learned policy requires --model");
    return std::make_unique<DirectReusePolicy>(*model, geometry);
  }
  throw std::runtime_error("unknown policy: " + name);
}

int run(int argc, char** argv) {
  CLI::App app{"cachelab: trace-driven cache replacement lab"};
  app.require_subcommand(1);

  // ---- gen-trace ----
  auto* gen = app.add_subcommand("gen-trace", "Generate a synthetic trace");
  std::string gen_kind = "cyclic", gen_geometry, gen_sets, gen_out;
  uint64_t gen_n_lines = 17, gen_length = 10000, gen_seed = 0, gen_set_count = 0;
  double gen_exponent = 1.0;
  std::vector<std::string> gen_phases;
  gen->add_option("--kind", gen_kind, "Pattern kind: cyclic, zipf, or phased");
  gen->add_option("--n-lines", gen_n_lines, "Distinct lines in the pattern");
  gen->add_option("--exponent", gen_exponent, "Zipf exponent");
  gen->add_option("--phase", gen_phases,
                  "Phase spec (repeatable): cyclic:<n>:<len> or zipf:<n>:<exp>:<len>");
  gen->add_option("--length", gen_length, "Total accesses to generate");
  gen->add_option("--geometry", gen_geometry, "Geometry JSON file (default LLC)");
  gen->add_option("--sets", gen_sets, "Comma-separated target set ids");
  gen->add_option("--set-count", gen_set_count, "Sample this many target sets");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output trace path")->required();

  // ---- filter-llc ----
  auto* filt = app.add_subcommand("filter-llc", "Filter a raw trace through L1+L2");
  std::string filt_trace, filt_l1, filt_l2, filt_out;
  filt->add_option("--trace", filt_trace, "Raw trace file")->required();
  filt->add_option("--l1", filt_l1, "L1 geometry JSON (default 4-way 32KB)");
  filt->add_option("--l2", filt_l2, "L2 geometry JSON (default 8-way 256KB)");
  filt->add_option("--out", filt_out, "Output trace path")->required();

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Roll a policy over a trace");
  std::string sim_trace, sim_policy = "lru", sim_geometry, sim_model, sim_nn_train,
              sim_out;
  uint64_t sim_seed = 0, sim_skip = 0;
  int64_t sim_window = -1;
  sim->add_option("--trace", sim_trace, "Trace file")->required();
  sim->add_option("--policy", sim_policy,
                  "lru, random, belady, nn, learned, or learned-direct-reuse");
  sim->add_option("--geometry", sim_geometry, "Geometry JSON file (default LLC)");
  sim->add_option("--window", sim_window, "Future window for belady (-1 = none)");
  sim->add_option("--model", sim_model, "Checkpoint for learned policies");
  sim->add_option("--nn-train", sim_nn_train, "Training trace for the nn policy");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--skip", sim_skip, "Skip this many leading accesses in stats");
  sim->add_option("--out", sim_out, "Write HitStats JSON here instead of stdout");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train the learned policy");
  std::string tr_trace, tr_geometry, tr_config, tr_out, tr_log;
  uint64_t tr_seed = 0, tr_dims = 0, tr_history = 0;
  std::string tr_embedder = "vocab";
  tr->add_option("--trace", tr_trace, "Trace file (split 80/10/10)")->required();
  tr->add_option("--geometry", tr_geometry, "Geometry JSON file (default LLC)");
  tr->add_option("--config", tr_config, "Training config JSON file");
  tr->add_option("--dims", tr_dims, "Override all model dims (desk-scale preset)");
  tr->add_option("--history", tr_history, "Override history length H");
  tr->add_option("--embedder", tr_embedder, "Embedder kind: vocab or byte");
  tr->add_option("--seed", tr_seed, "RNG seed (overrides config)");
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--log", tr_log, "Training log (JSON lines)");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Evaluate policies and emit a report");
  std::string ev_trace, ev_geometry, ev_model, ev_nn_train, ev_out,
      ev_policies = "lru,random,belady";
  std::string ev_trace_id;
  uint64_t ev_seed = 0;
  ev->add_option("--trace", ev_trace, "Trace file to evaluate on")->required();
  ev->add_option("--geometry", ev_geometry, "Geometry JSON file (default LLC)");
  ev->add_option("--policies", ev_policies, "Comma-separated policy names");
  ev->add_option("--model", ev_model, "Checkpoint for learned policies");
  ev->add_option("--nn-train", ev_nn_train, "Training trace for the nn policy");
  ev->add_option("--trace-id", ev_trace_id, "Trace id in the report");
  ev->add_option("--seed", ev_seed, "RNG seed");
  ev->add_option("--out", ev_out, "Report JSON output path");

  // ---- sweep-window ----
  auto* sw = app.add_subcommand("sweep-window", "Windowed-Belady sweep");
  std::string sw_trace, sw_geometry, sw_windows = "1,10,100,1000,10000", sw_out;
  uint64_t sw_tie_seeds = 5, sw_seed = 0;
  sw->add_option("--trace", sw_trace, "Trace file")->required();
  sw->add_option("--geometry", sw_geometry, "Geometry JSON file (default LLC)");
  sw->add_option("--windows", sw_windows, "Comma-separated window sizes");
  sw->add_option("--tie-seeds", sw_tie_seeds, "Tie-breaking seeds to average");
  sw->add_option("--seed", sw_seed, "Base RNG seed");
  sw->add_option("--out", sw_out, "Curve CSV output path")->required();

  // ---- sweep-history ----
  auto* sh = app.add_subcommand("sweep-history", "History-length training sweep");
  std::string sh_trace, sh_geometry, sh_config, sh_out,
      sh_history = "20,40,60,80,100,120,140";
  uint64_t sh_seeds = 1, sh_seed = 0, sh_dims = 32;
  sh->add_option("--trace", sh_trace, "Trace file (split 80/10/10)")->required();
  sh->add_option("--geometry", sh_geometry, "Geometry JSON file (default LLC)");
  sh->add_option("--config", sh_config, "Training config JSON file");
  sh->add_option("--history-list", sh_history, "Comma-separated H values");
  sh->add_option("--dims", sh_dims, "Model dims (desk-scale preset)");
  sh->add_option("--seeds", sh_seeds, "Seeds per point");
  sh->add_option("--seed", sh_seed, "Base RNG seed");
  sh->add_option("--out", sh_out, "Curve CSV output path")->required();

  // ---- report ----
  auto* rp = app.add_subcommand("report", "Merge eval reports into one CSV");
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  rp->add_option("--inputs", rp_inputs, "Report JSON files")->required();
  rp->add_option("--out", rp_out, "Combined CSV output path")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const CacheGeometry geometry = load_geometry(gen_geometry);
    std::vector<uint64_t> sets;
    if (!gen_sets.empty()) {
      sets = parse_id_list(gen_sets);
    } else if (gen_set_count > 0) {
      std::vector<uint64_t> all(geometry.num_sets());
      std::iota(all.begin(), all.end(), 0);
      std::mt19937_64 rng(gen_seed);
      std::shuffle(all.begin(), all.end(), rng);
      all.resize(gen_set_count);
      sets = all;
    } else {
      sets = {0};
    }
    SyntheticKind kind;
    if (gen_kind == "cyclic") {
      kind = CyclicSpec{gen_n_lines};
    } else if (gen_kind == "zipf") {
      kind = ZipfSpec{gen_n_lines, gen_exponent};
    } else if (gen_kind == "phased") {
      PhasedSpec spec;
      for (const std::string& p : gen_phases) spec.phases.push_back(parse_phase(p));
      kind = spec;
    } else {
      throw std::runtime_error("unknown kind: " + gen_kind);
    }
    save_trace(generate_synthetic(kind, gen_length, geometry, sets, gen_seed),
               gen_out);
    return 0;
  }

  if (filt->parsed()) {
    const CacheGeometry l1 =
        filt_l1.empty() ? CacheGeometry::l1_default() : load_geometry(filt_l1);
    const CacheGeometry l2 =
        filt_l2.empty() ? CacheGeometry::l2_default() : load_geometry(filt_l2);
    save_trace(filter_to_llc(load_trace(filt_trace), l1, l2), filt_out);
    return 0;
  }

  if (sim->parsed()) {
    const CacheGeometry geometry = load_geometry(sim_geometry);
    const AccessTrace trace = load_trace(sim_trace);
    const ReuseDistanceTable table(trace, geometry);
    std::optional<Model> model;
    if (!sim_model.empty()) model = Model::load_checkpoint(sim_model);
    std::optional<NnBeladyIndex> nn_index;
    if (!sim_nn_train.empty()) {
      nn_index.emplace(load_trace(sim_nn_train), geometry);
    }
    const std::optional<uint64_t> window =
        sim_window >= 0 ? std::optional<uint64_t>(sim_window) : std::nullopt;
    auto policy = make_policy(sim_policy, geometry, table, sim_seed, window,
                              model ? &*model : nullptr,
                              nn_index ? &*nn_index : nullptr);
    RolloutOptions options;
    options.record_outcomes = sim_skip > 0;
    const RolloutResult result = rollout(trace, geometry, *policy, options);
    const HitStats stats =
        sim_skip > 0 ? hit_stats_skipping(result.outcomes, sim_skip, policy->name())
                     : result.stats;
    if (sim_out.empty()) {
      std::cout << stats.to_json() << "\n";
    } else {
      write_file(sim_out, stats.to_json() + "\n");
    }
    return 0;
  }

  if (tr->parsed()) {
    const CacheGeometry geometry = load_geometry(tr_geometry);
    const AccessTrace trace = load_trace(tr_trace);
    const TraceSplits splits = split(trace, SplitSpec{});
    TrainConfig config;
    if (!tr_config.empty()) {
      std::ifstream in(tr_config);
      if (!in) throw std::runtime_error("cannot open config: " + tr_config);
      std::stringstream ss;
      ss << in.rdbuf();
      config = TrainConfig::from_json(ss.str());
    }
    if (tr->count("--seed")) config.seed = tr_seed;
    if (tr_history > 0) config.history_len = tr_history;

    ModelConfig model_config =
        tr_dims > 0 ? ModelConfig::desk_scale(tr_dims, config.history_len)
                    : ModelConfig{};
    model_config.history_len = config.history_len;
    model_config.embedder_kind =
        tr_embedder == "byte" ? EmbedderKind::kByte : EmbedderKind::kVocab;
    const Vocab vocab = Vocab::build(splits.train, geometry, model_config.n_p);
    Model model(model_config, vocab, config.seed);
    train(splits.train, splits.valid, geometry, model, config, tr_log);
    model.save_checkpoint(tr_out);
    return 0;
  }

  if (ev->parsed()) {
    const CacheGeometry geometry = load_geometry(ev_geometry);
    const AccessTrace trace = load_trace(ev_trace);
    const ReuseDistanceTable table(trace, geometry);
    std::optional<Model> model;
    if (!ev_model.empty()) model = Model::load_checkpoint(ev_model);
    std::optional<NnBeladyIndex> nn_index;
    if (!ev_nn_train.empty()) nn_index.emplace(load_trace(ev_nn_train), geometry);

    // LRU and Belady's anchor the normalized rate whether requested or not.
    LruPolicy lru;
    const double r_lru = rollout(trace, geometry, lru).stats.hit_rate();
    BeladyPolicy opt(table);
    const double r_opt = rollout(trace, geometry, opt).stats.hit_rate();

    Report report;
    report.trace_id = ev_trace_id.empty() ? ev_trace : ev_trace_id;
    report.geometry = geometry;
    std::stringstream names(ev_policies);
    std::string name;
    while (std::getline(names, name, ',')) {
      auto policy = make_policy(name, geometry, table, ev_seed, std::nullopt,
                                model ? &*model : nullptr,
                                nn_index ? &*nn_index : nullptr);
      const DecisionTrace decisions =
          collect_decisions(*policy, trace, geometry, table);
      PolicyReport pr;
      pr.name = name;
      pr.hits = decisions.stats.hits;
      pr.misses = decisions.stats.misses;
      pr.hit_rate = decisions.stats.hit_rate();
      pr.normalized_hit_rate = normalized_hit_rate(pr.hit_rate, r_lru, r_opt);
      pr.top1 = topk_accuracy(decisions.decisions, 1);
      pr.top5 = topk_accuracy(decisions.decisions,
                              std::min<size_t>(5, geometry.associativity));
      pr.reuse_gap = reuse_distance_gap(decisions.decisions);
      report.policies.push_back(std::move(pr));
    }
    if (ev_out.empty()) {
      std::cout << report.to_json() << "\n";
    } else {
      write_file(ev_out, report.to_json() + "\n");
    }
    return 0;
  }

  if (sw->parsed()) {
    const CacheGeometry geometry = load_geometry(sw_geometry);
    const AccessTrace trace = load_trace(sw_trace);
    std::vector<uint64_t> tie_seeds(sw_tie_seeds);
    std::iota(tie_seeds.begin(), tie_seeds.end(), sw_seed);
    const auto curve =
        sweep_window(trace, geometry, parse_id_list(sw_windows), tie_seeds);
    write_file(sw_out, curve_to_csv(curve));
    return 0;
  }

  if (sh->parsed()) {
    const CacheGeometry geometry = load_geometry(sh_geometry);
    const AccessTrace trace = load_trace(sh_trace);
    const TraceSplits splits = split(trace, SplitSpec{});
    TrainConfig base_config;
    if (!sh_config.empty()) {
      std::ifstream in(sh_config);
      if (!in) throw std::runtime_error("cannot open config: " + sh_config);
      std::stringstream ss;
      ss << in.rdbuf();
      base_config = TrainConfig::from_json(ss.str());
    }
    const ReuseDistanceTable test_table(splits.test, geometry);
    LruPolicy lru;
    const double r_lru = rollout(splits.test, geometry, lru).stats.hit_rate();
    BeladyPolicy opt(test_table);
    const double r_opt = rollout(splits.test, geometry, opt).stats.hit_rate();

    std::vector<CurvePoint> curve;
    for (uint64_t h : parse_id_list(sh_history)) {
      std::vector<double> values;
      for (uint64_t s = 0; s < sh_seeds; ++s) {
        TrainConfig config = base_config;
        config.history_len = h;
        config.seed = sh_seed + s;
        ModelConfig model_config = ModelConfig::desk_scale(sh_dims, h);
        const Vocab vocab = Vocab::build(splits.train, geometry, model_config.n_p);
        Model model(model_config, vocab, config.seed);
        train(splits.train, splits.valid, geometry, model, config);
        LearnedPolicy policy(model, geometry);
        const double r = rollout(splits.test, geometry, policy).stats.hit_rate();
        values.push_back(normalized_hit_rate(r, r_lru, r_opt).value_or(0.0));
      }
      const double mean =
          std::accumulate(values.begin(), values.end(), 0.0) / values.size();
      double var = 0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double stderr_ =
          values.size() > 1 ? std::sqrt(var / (values.size() - 1)) /
                                  std::sqrt(static_cast<double>(values.size()))
                            : 0.0;
      curve.push_back({static_cast<double>(h), mean, stderr_});
    }
    write_file(sh_out, curve_to_csv(curve));
    return 0;
  }

  if (rp->parsed()) {
    std::vector<Report> reports;
    for (const std::string& path : rp_inputs) {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("cannot open report: " + path);
      std::stringstream ss;
      ss << in.rdbuf();
      reports.push_back(Report::from_json(ss.str()));
    }
    write_file(rp_out, reports_to_csv(reports));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
