#include <stdexcept>
#include <algorithm>
#include <random>
#include <vector>

#include "cachelab/cache.hpp"
#include "cachelab/oracle.hpp"
#include "cachelab/trace.hpp"
#include "doctest.h"

using namespace cachelab;

namespace {

CacheGeometry single_set(uint32_t ways) {
  CacheGeometry g;
  g.associativity = ways;
  g.line_size_bytes = 64;
  g.capacity_bytes = uint64_t(ways) * 64;
  g.validate();
  return g;
}

AccessTrace lines_trace(const std::vector<uint64_t>& lines) {
  AccessTrace t;
  for (uint64_t l : lines) t.accesses.push_back({0x100 + l, l * 64});
  return t;
}

// Independent O(T^2) reuse oracle: forward scan from each position.
uint64_t scan_reuse(const std::vector<uint64_t>& lines, size_t from, uint64_t now) {
  for (size_t j = now; j < lines.size(); ++j) {
    if (lines[j] == lines[from]) return j - now;
  }
  return kInfiniteReuse;
}

// Exhaustive search over every eviction decision tree: the true maximum
// number of hits attainable on a single-set trace.
uint64_t max_hits_brute(const std::vector<uint64_t>& lines, size_t index,
                        std::vector<uint64_t> cache, uint32_t ways) {
  if (index == lines.size()) return 0;
  const uint64_t line = lines[index];
  const auto it = std::find(cache.begin(), cache.end(), line);
  if (it != cache.end()) {
    return 1 + max_hits_brute(lines, index + 1, std::move(cache), ways);
  }
  if (cache.size() < ways) {
    cache.push_back(line);
    return max_hits_brute(lines, index + 1, std::move(cache), ways);
  }
  uint64_t best = 0;
  for (size_t w = 0; w < cache.size(); ++w) {
    std::vector<uint64_t> next = cache;
    next[w] = line;
    best = std::max(best, max_hits_brute(lines, index + 1, std::move(next), ways));
  }
  return best;
}

}  // namespace

TEST_CASE("reuse distance table matches an O(T^2) forward scan") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<uint64_t> lines;
    const size_t len = 50 + rng() % 100;
    for (size_t i = 0; i < len; ++i) lines.push_back(rng() % 12);
    const AccessTrace t = lines_trace(lines);
    const CacheGeometry g = single_set(4);
    const ReuseDistanceTable table(t, g);
    for (size_t i = 0; i < len; ++i) {
      // Distance of the line last accessed at i, evaluated at every later now.
      for (uint64_t now = i + 1; now < std::min(len, i + 10); ++now) {
        // Only valid while no intervening access to the same line.
        bool intervening = false;
        for (uint64_t j = i + 1; j < now; ++j) {
          if (lines[j] == lines[i]) intervening = true;
        }
        if (intervening) continue;
        CHECK(table.distance(i, now) == scan_reuse(lines, i, now));
      }
    }
  }
}

TEST_CASE("reuse distance semantics: an access one step ahead is distance one") {
  const AccessTrace t = lines_trace({7, 8, 7});
  const ReuseDistanceTable table(t, single_set(2));
  // Line 7 last accessed at 0, evaluated at now=1: next use is index 2,
  // one position ahead of now.
  CHECK(table.distance(0, 1) == 1);
  CHECK(table.distance(1, 2) == kInfiniteReuse);
  CHECK(table.cap(2) == 3 - 2 + 1);
  CHECK(table.capped_distance(1, 2) == 2);
}

TEST_CASE("belady equals the exhaustive eviction-tree maximum") {
  std::mt19937_64 rng(1234);
  int instances = 0;
  while (instances < 300) {
    const uint32_t ways = 2 + rng() % 2;            // W in {2, 3}
    const size_t len = 4 + rng() % 9;               // T in [4, 12]
    const uint64_t n_lines = 2 + rng() % 4;         // up to 5 distinct lines
    std::vector<uint64_t> lines;
    for (size_t i = 0; i < len; ++i) lines.push_back(rng() % n_lines);
    const AccessTrace t = lines_trace(lines);
    const CacheGeometry g = single_set(ways);
    const ReuseDistanceTable table(t, g);
    BeladyPolicy belady(table);
    const uint64_t got = rollout(t, g, belady).stats.hits;
    const uint64_t want = max_hits_brute(lines, 0, {}, ways);
    REQUIRE(got == want);
    ++instances;
  }
}

TEST_CASE("belady decisions pick the farthest next use with lowest-way ties") {
  // Trace: 0 1 2 3 | miss 4 -> distances from now=4: line0 next@5, line1 @7,
  // line2 never, line3 @6.
  const AccessTrace t = lines_trace({0, 1, 2, 3, 4, 0, 3, 1});
  const CacheGeometry g = single_set(4);
  const ReuseDistanceTable table(t, g);

  CacheSetState set;
  for (uint64_t w = 0; w < 4; ++w) {
    set.ways.push_back({w, w, w, w});  // line w last accessed at index w
  }
  const OracleDecision d =
      belady_decide(set, 4, table, std::nullopt, TieBreak::kLowestWay, nullptr);
  CHECK(d.way == 2);
  CHECK(d.distances[0] == 1);  // next use of line 0 at index 5
  CHECK(d.distances[1] == 3);
  CHECK(d.distances[2] == kInfiniteReuse);
  CHECK(d.distances[3] == 2);
  REQUIRE(d.optimal_set == std::vector<uint32_t>{2});

  SUBCASE("a window collapses far futures into ties") {
    // With window 2, line 1 (distance 3) also becomes INFINITE.
    const OracleDecision w2 =
        belady_decide(set, 4, table, 2, TieBreak::kLowestWay, nullptr);
    CHECK(w2.optimal_set == std::vector<uint32_t>{1, 2});
    CHECK(w2.way == 1);

    std::mt19937_64 tie_rng(0);
    const OracleDecision wr =
        belady_decide(set, 4, table, 2, TieBreak::kRandom, &tie_rng);
    CHECK((wr.way == 1 || wr.way == 2));
  }
}

TEST_CASE("windowed belady tie randomization is seed-deterministic") {
  std::mt19937_64 rng(5);
  std::vector<uint64_t> lines;
  for (int i = 0; i < 400; ++i) lines.push_back(rng() % 10);
  const AccessTrace t = lines_trace(lines);
  const CacheGeometry g = single_set(4);
  const ReuseDistanceTable table(t, g);

  BeladyPolicy a(table, 5, TieBreak::kRandom, 42);
  BeladyPolicy b(table, 5, TieBreak::kRandom, 42);
  BeladyPolicy c(table, 5, TieBreak::kRandom, 43);
  const uint64_t hits_a = rollout(t, g, a).stats.hits;
  const uint64_t hits_b = rollout(t, g, b).stats.hits;
  CHECK(hits_a == hits_b);
  // A different seed may legitimately give a different count; just ensure
  // the policy stays valid.
  CHECK(rollout(t, g, c).stats.total() == t.size());
}

TEST_CASE("smoothed oracle distribution is a temperature softmax") {
  const std::vector<uint64_t> d{1, 2, 4};
  const auto p = smoothed_oracle_distribution(d, 1.0);
  REQUIRE(p.size() == 3);
  double sum = 0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(p[2] > p[1]);
  CHECK(p[1] > p[0]);
  // Ratio check: p[1]/p[0] = exp((2-1)/T).
  CHECK(p[1] / p[0] == doctest::Approx(std::exp(1.0)));

  SUBCASE("high temperature flattens toward uniform") {
    const auto flat = smoothed_oracle_distribution(d, 1e6);
    CHECK(flat[0] == doctest::Approx(1.0 / 3).epsilon(1e-3));
  }

  SUBCASE("non-positive temperature is rejected") {
    CHECK_THROWS_AS(smoothed_oracle_distribution(d, 0.0), std::invalid_argument);
  }
}
