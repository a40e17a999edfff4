#include "cachelab/trace.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace cachelab {

namespace {

uint32_t log2_exact(uint64_t v, const char* what) {
  if (v == 0 || !std::has_single_bit(v)) {
    throw std::invalid_argument(std::string(what) + " must be a power of two");
  }
  return static_cast<uint32_t>(std::countr_zero(v));
}

}  // namespace

uint64_t CacheGeometry::num_sets() const {
  const uint64_t denom = uint64_t{associativity} * line_size_bytes;
  return denom == 0 ? 0 : capacity_bytes / denom;
}

uint32_t CacheGeometry::line_offset_bits() const {
  return log2_exact(line_size_bytes, "line_size_bytes");
}

uint32_t CacheGeometry::set_bits() const {
  return log2_exact(num_sets(), "num_sets");
}

uint64_t CacheGeometry::line_id(uint64_t address) const {
  return address >> line_offset_bits();
}

uint64_t CacheGeometry::set_index(uint64_t address) const {
  return line_id(address) & (num_sets() - 1);
}

void CacheGeometry::validate() const {
  if (associativity == 0) throw std::invalid_argument("associativity must be positive");
  log2_exact(line_size_bytes, "line_size_bytes");
  const uint64_t sets = num_sets();
  if (sets == 0 || !std::has_single_bit(sets)) {
    throw std::invalid_argument("num_sets must be a positive power of two");
  }
  if (capacity_bytes != sets * associativity * line_size_bytes) {
    throw std::invalid_argument("capacity must equal ways * line_size * num_sets");
  }
}

CacheGeometry CacheGeometry::l1_default() { return {32 * 1024, 4, 64}; }
CacheGeometry CacheGeometry::l2_default() { return {256 * 1024, 8, 64}; }
CacheGeometry CacheGeometry::llc_default() { return {2 * 1024 * 1024, 16, 64}; }

CacheGeometry geometry_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  CacheGeometry g;
  g.capacity_bytes = j.at("capacity_bytes").get<uint64_t>();
  g.associativity = j.at("associativity").get<uint32_t>();
  g.line_size_bytes = j.value("line_size_bytes", 64u);
  g.validate();
  return g;
}

std::string geometry_to_json(const CacheGeometry& g) {
  nlohmann::json j{{"capacity_bytes", g.capacity_bytes},
                   {"associativity", g.associativity},
                   {"line_size_bytes", g.line_size_bytes}};
  return j.dump();
}

void SplitSpec::validate() const {
  if (train_fraction < 0 || valid_fraction < 0 || test_fraction < 0) {
    throw std::invalid_argument("split fractions must be nonnegative");
  }
  const double sum = train_fraction + valid_fraction + test_fraction;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
}

namespace {

uint64_t parse_hex_field(std::string_view field, size_t line_no) {
  if (field.starts_with("0x") || field.starts_with("0X")) field.remove_prefix(2);
  uint64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value, 16);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw std::runtime_error("trace syntax error at line " + std::to_string(line_no));
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

AccessTrace parse_trace(std::istream& in) {
  AccessTrace trace;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const size_t comma = body.find(',');
    if (comma == std::string_view::npos) {
      throw std::runtime_error("trace syntax error at line " + std::to_string(line_no));
    }
    MemoryAccess access;
    access.pc = parse_hex_field(trim(body.substr(0, comma)), line_no);
    access.address = parse_hex_field(trim(body.substr(comma + 1)), line_no);
    trace.accesses.push_back(access);
  }
  if (trace.empty()) throw std::runtime_error("empty trace");
  return trace;
}

AccessTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  return parse_trace(in);
}

void write_trace(const AccessTrace& trace, std::ostream& out) {
  char buf[64];
  for (const MemoryAccess& a : trace.accesses) {
    const int n = std::snprintf(buf, sizeof(buf), "0x%llx,0x%llx\n",
                                static_cast<unsigned long long>(a.pc),
                                static_cast<unsigned long long>(a.address));
    out.write(buf, n);
  }
}

void save_trace(const AccessTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  write_trace(trace, out);
}

namespace {

// Builds a line address that maps to the given set: distinct lines get
// distinct high bits above the set index.
uint64_t synth_address(uint64_t line_ordinal, uint64_t set_id,
                       const CacheGeometry& geometry) {
  const uint32_t off = geometry.line_offset_bits();
  const uint32_t sbits = geometry.set_bits();
  return ((line_ordinal + 1) << (off + sbits)) | (set_id << off);
}

struct SynthContext {
  const CacheGeometry& geometry;
  const std::vector<uint64_t>& target_sets;
  std::mt19937_64& rng;
  uint64_t line_base = 0;  // keeps line ids distinct across phases
};

void generate_pattern(const std::variant<CyclicSpec, ZipfSpec>& pattern,
                      uint64_t length, SynthContext& ctx,
                      std::vector<MemoryAccess>& out) {
  if (std::holds_alternative<CyclicSpec>(pattern)) {
    const CyclicSpec& spec = std::get<CyclicSpec>(pattern);
    if (spec.n_lines < 1) throw std::invalid_argument("cyclic n_lines must be >= 1");
    for (uint64_t i = 0; i < length; ++i) {
      const uint64_t line = i % spec.n_lines;
      const uint64_t set = ctx.target_sets[line % ctx.target_sets.size()];
      MemoryAccess a;
      a.address = synth_address(ctx.line_base + line, set, ctx.geometry);
      a.pc = 0x1000 + ctx.line_base + line;  // one distinct pc per line
      out.push_back(a);
    }
    ctx.line_base += spec.n_lines;
  } else {
    const ZipfSpec& spec = std::get<ZipfSpec>(pattern);
    if (spec.n_lines < 1) throw std::invalid_argument("zipf n_lines must be >= 1");
    // Inverse-CDF sampling over rank weights 1/k^exponent.
    std::vector<double> cdf(spec.n_lines);
    double acc = 0;
    for (uint64_t k = 0; k < spec.n_lines; ++k) {
      acc += 1.0 / std::pow(static_cast<double>(k + 1), spec.exponent);
      cdf[k] = acc;
    }
    std::uniform_real_distribution<double> uni(0.0, acc);
    for (uint64_t i = 0; i < length; ++i) {
      const double u = uni(ctx.rng);
      const uint64_t line = static_cast<uint64_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const uint64_t set = ctx.target_sets[line % ctx.target_sets.size()];
      MemoryAccess a;
      a.address = synth_address(ctx.line_base + line, set, ctx.geometry);
      a.pc = 0x2000 + ctx.rng() % spec.pc_pool;
      out.push_back(a);
    }
    ctx.line_base += spec.n_lines;
  }
}

}  // namespace

AccessTrace generate_synthetic(const SyntheticKind& kind, uint64_t length,
                               const CacheGeometry& geometry,
                               const std::vector<uint64_t>& target_sets,
                               uint64_t seed) {
  geometry.validate();
  if (length == 0) throw std::invalid_argument("length must be positive");
  if (target_sets.empty()) throw std::invalid_argument("target_sets must be non-empty");
  for (uint64_t s : target_sets) {
    if (s >= geometry.num_sets()) {
      throw std::invalid_argument("unsatisfiable set constraint: set id out of range");
    }
  }
  std::mt19937_64 rng(seed);
  SynthContext ctx{geometry, target_sets, rng};
  AccessTrace trace;
  trace.origin = TraceOrigin::kSynthetic;
  trace.accesses.reserve(length);

  if (std::holds_alternative<PhasedSpec>(kind)) {
    const PhasedSpec& spec = std::get<PhasedSpec>(kind);
    if (spec.phases.empty()) throw std::invalid_argument("phased spec needs phases");
    // Assign stable line ranges per phase so a phase reuses its own lines
    // each time it comes around.
    std::vector<uint64_t> bases(spec.phases.size());
    uint64_t base = 0;
    for (size_t p = 0; p < spec.phases.size(); ++p) {
      bases[p] = base;
      base += std::visit([](const auto& s) { return s.n_lines; },
                         spec.phases[p].pattern);
    }
    size_t phase = 0;
    while (trace.accesses.size() < length) {
      const PhasedSubSpec& sub = spec.phases[phase % spec.phases.size()];
      if (sub.length == 0) throw std::invalid_argument("phase length must be positive");
      const uint64_t remaining = length - trace.accesses.size();
      ctx.line_base = bases[phase % spec.phases.size()];
      generate_pattern(sub.pattern, std::min(sub.length, remaining), ctx,
                       trace.accesses);
      ++phase;
    }
  } else if (std::holds_alternative<CyclicSpec>(kind)) {
    generate_pattern(std::get<CyclicSpec>(kind), length, ctx, trace.accesses);
  } else {
    generate_pattern(std::get<ZipfSpec>(kind), length, ctx, trace.accesses);
  }
  return trace;
}

namespace {

// Minimal LRU cache used only for LLC filtering.
class LruCache {
 public:
  explicit LruCache(const CacheGeometry& g)
      : geometry_(g), sets_(g.num_sets()) {}

  // Returns true on hit; always installs the line.
  bool access(uint64_t address, uint64_t tick) {
    auto& set = sets_[geometry_.set_index(address)];
    const uint64_t line = geometry_.line_id(address);
    for (auto& way : set) {
      if (way.line == line) {
        way.last_tick = tick;
        return true;
      }
    }
    if (set.size() < geometry_.associativity) {
      set.push_back({line, tick});
    } else {
      auto victim = std::min_element(
          set.begin(), set.end(),
          [](const Way& a, const Way& b) { return a.last_tick < b.last_tick; });
      *victim = {line, tick};
    }
    return false;
  }

 private:
  struct Way {
    uint64_t line;
    uint64_t last_tick;
  };
  CacheGeometry geometry_;
  std::vector<std::vector<Way>> sets_;
};

}  // namespace

AccessTrace filter_to_llc(const AccessTrace& raw, const CacheGeometry& l1,
                          const CacheGeometry& l2) {
  l1.validate();
  l2.validate();
  LruCache c1(l1), c2(l2);
  AccessTrace out;
  out.origin = TraceOrigin::kLlcFiltered;
  uint64_t tick = 0;
  for (const MemoryAccess& a : raw.accesses) {
    ++tick;
    if (c1.access(a.address, tick)) continue;
    if (c2.access(a.address, tick)) continue;
    out.accesses.push_back(a);
  }
  return out;
}

AccessTrace sample_sets(const AccessTrace& trace, const CacheGeometry& geometry,
                        const std::vector<uint64_t>& set_ids) {
  geometry.validate();
  std::vector<bool> keep(geometry.num_sets(), false);
  for (uint64_t s : set_ids) {
    if (s >= geometry.num_sets()) throw std::invalid_argument("set id out of range");
    keep[s] = true;
  }
  AccessTrace out;
  out.origin = trace.origin;
  for (const MemoryAccess& a : trace.accesses) {
    if (keep[geometry.set_index(a.address)]) out.accesses.push_back(a);
  }
  return out;
}

AccessTrace sample_sets(const AccessTrace& trace, const CacheGeometry& geometry,
                        uint64_t count, uint64_t seed) {
  geometry.validate();
  if (count > geometry.num_sets()) throw std::invalid_argument("set count out of range");
  std::vector<uint64_t> all(geometry.num_sets());
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return sample_sets(trace, geometry, all);
}

const std::vector<uint64_t>& preset_llc_64_sets() {
  static const std::vector<uint64_t> sets = {
      6,    35,   38,   53,   67,   70,   113,  143,  157,  196,  287,
      324,  332,  348,  362,  398,  406,  456,  458,  488,  497,  499,
      558,  611,  718,  725,  754,  775,  793,  822,  862,  895,  928,
      1062, 1086, 1101, 1102, 1137, 1144, 1175, 1210, 1211, 1223, 1237,
      1268, 1308, 1342, 1348, 1353, 1424, 1437, 1456, 1574, 1599, 1604,
      1662, 1683, 1782, 1789, 1812, 1905, 1940, 1967, 1973};
  return sets;
}

TraceSplits split(const AccessTrace& trace, const SplitSpec& spec) {
  spec.validate();
  const size_t n = trace.size();
  if (n < 10) throw std::invalid_argument("trace too short to split");
  const size_t n_train = static_cast<size_t>(n * spec.train_fraction);
  const size_t n_valid = static_cast<size_t>(n * spec.valid_fraction);
  TraceSplits out;
  out.train.origin = out.valid.origin = out.test.origin = trace.origin;
  const auto& a = trace.accesses;
  out.train.accesses.assign(a.begin(), a.begin() + n_train);
  out.valid.accesses.assign(a.begin() + n_train, a.begin() + n_train + n_valid);
  out.test.accesses.assign(a.begin() + n_train + n_valid, a.end());
  return out;
}

}  // namespace cachelab
