#ifndef CACHELAB_TRACE_HPP_
#define CACHELAB_TRACE_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cachelab {

// One (program counter, address) pair; the atom of every trace.
struct MemoryAccess {
  uint64_t pc = 0;
  uint64_t address = 0;

  friend bool operator==(const MemoryAccess&, const MemoryAccess&) = default;
};

enum class TraceOrigin { kRaw, kLlcFiltered, kSynthetic };

struct AccessTrace {
  std::vector<MemoryAccess> accesses;
  TraceOrigin origin = TraceOrigin::kRaw;

  size_t size() const { return accesses.size(); }
  bool empty() const { return accesses.empty(); }
};

// Set-associative cache geometry. capacity = ways * line_size * num_sets
// exactly; num_sets must come out a power of two.
struct CacheGeometry {
  uint64_t capacity_bytes = 0;
  uint32_t associativity = 0;
  uint32_t line_size_bytes = 64;

  uint64_t num_sets() const;
  uint32_t line_offset_bits() const;
  uint32_t set_bits() const;
  uint64_t line_id(uint64_t address) const;
  uint64_t set_index(uint64_t address) const;
  void validate() const;  // throws std::invalid_argument

  static CacheGeometry l1_default();   // 4-way 32KB
  static CacheGeometry l2_default();   // 8-way 256KB
  static CacheGeometry llc_default();  // 16-way 2MB
};

CacheGeometry geometry_from_json(const std::string& json_text);
std::string geometry_to_json(const CacheGeometry& g);

struct SplitSpec {
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  double test_fraction = 0.1;

  void validate() const;  // fractions nonnegative, sum to 1 within 1e-9
};

// Text trace format: one access per line, "0x<pc>,0x<address>", '#' comments.
AccessTrace parse_trace(std::istream& in);
AccessTrace load_trace(const std::string& path);
void write_trace(const AccessTrace& trace, std::ostream& out);
void save_trace(const AccessTrace& trace, const std::string& path);

// Synthetic trace generators. Every generated address maps to one of
// target_sets under the given geometry.
struct CyclicSpec {
  uint64_t n_lines = 0;
};
struct ZipfSpec {
  uint64_t n_lines = 0;
  double exponent = 1.0;
  uint32_t pc_pool = 16;
};
struct PhasedSubSpec {
  std::variant<CyclicSpec, ZipfSpec> pattern;
  uint64_t length = 0;
};
struct PhasedSpec {
  std::vector<PhasedSubSpec> phases;  // repeated cyclically until length
};
using SyntheticKind = std::variant<CyclicSpec, ZipfSpec, PhasedSpec>;

AccessTrace generate_synthetic(const SyntheticKind& kind, uint64_t length,
                               const CacheGeometry& geometry,
                               const std::vector<uint64_t>& target_sets,
                               uint64_t seed);

// Emits exactly the accesses that miss in L1 and then miss in L2, both
// simulated with LRU replacement. Order preserved.
AccessTrace filter_to_llc(const AccessTrace& raw, const CacheGeometry& l1,
                          const CacheGeometry& l2);

// Keeps only accesses whose set index is in the selection.
AccessTrace sample_sets(const AccessTrace& trace, const CacheGeometry& geometry,
                        const std::vector<uint64_t>& set_ids);
AccessTrace sample_sets(const AccessTrace& trace, const CacheGeometry& geometry,
                        uint64_t count, uint64_t seed);

// The 64 LLC set ids used for the 16-way 2MB / 64B configuration.
const std::vector<uint64_t>& preset_llc_64_sets();

struct TraceSplits {
  AccessTrace train;
  AccessTrace valid;
  AccessTrace test;
};

// Contiguous prefix/middle/suffix split; boundaries rounded down, remainder
// goes to the test segment.
TraceSplits split(const AccessTrace& trace, const SplitSpec& spec);

}  // namespace cachelab

#endif  // CACHELAB_TRACE_HPP_
