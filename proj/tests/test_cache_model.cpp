#include <gtest/gtest.h>

#include <random>
#include <set>

#include "pdmlab/cache_model.hpp"
#include "reference.hpp"

using namespace pdmlab;

TEST(DesignSpace, EighteenFeasibleConfigs) {
  const DesignSpace ds = enumerate_design_space();
  ASSERT_EQ(ds.size(), 18u);
  std::set<CacheConfig> seen(ds.configs.begin(), ds.configs.end());
  EXPECT_EQ(seen.size(), 18u);
  for (const auto& c : ds.configs) EXPECT_TRUE(is_feasible(c)) << c.to_string();
  EXPECT_FALSE(is_feasible({2048, 2, 16}));
  EXPECT_FALSE(is_feasible({2048, 4, 64}));
  EXPECT_FALSE(is_feasible({4096, 4, 32}));
  EXPECT_EQ(ds.configs.front(), (CacheConfig{2048, 1, 16}));
  EXPECT_EQ(ds.configs.back(), (CacheConfig{8192, 4, 64}));
  EXPECT_TRUE(std::is_sorted(ds.configs.begin(), ds.configs.end()));
}

TEST(DesignSpace, IndexOfRoundTrips) {
  const DesignSpace ds = enumerate_design_space();
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.index_of(ds.configs[i]), i);
  EXPECT_EQ(ds.index_of({2048, 4, 16}), ds.size());
}

TEST(CacheConfig, Geometry) {
  EXPECT_EQ(kBaseCacheConfig.sets(), 32u);
  EXPECT_EQ(kBaseCacheConfig.physical_lines_per_line(), 4u);
  EXPECT_EQ((CacheConfig{2048, 1, 16}).sets(), 128u);
  EXPECT_EQ(kBaseCacheConfig.to_string(), "8192:4:64");
}

TEST(CacheConfig, OutOfRangeAndNonPowerOfTwoAreInfeasible) {
  EXPECT_FALSE(is_feasible({1024, 1, 16}));
  EXPECT_FALSE(is_feasible({16384, 1, 16}));
  EXPECT_FALSE(is_feasible({8192, 8, 16}));
  EXPECT_FALSE(is_feasible({8192, 1, 128}));
  EXPECT_FALSE(is_feasible({6144, 1, 16}));
  EXPECT_FALSE(is_feasible({8192, 3, 16}));
  EXPECT_FALSE(is_feasible({8192, 1, 48}));
}

TEST(ParseConfig, AcceptsFeasibleText) {
  EXPECT_EQ(parse_config("4096:2:32"), (CacheConfig{4096, 2, 32}));
}

TEST(ParseConfig, RejectsMalformedAndInfeasible) {
  for (const char* bad : {"", "4096", "4096:2", "4096:2:32:1", "a:2:32", "4096:2:32x", "4096::32"}) {
    EXPECT_THROW(parse_config(bad), Error) << bad;
  }
  try {
    parse_config("2048:4:16");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("2048:4:16"), std::string::npos);
  }
}

TEST(NextValueUp, StopsAtBoundsAndInfeasibleCombos) {
  EXPECT_EQ(next_value_up({2048, 1, 16}, CacheParam::Size), (CacheConfig{4096, 1, 16}));
  EXPECT_FALSE(next_value_up({8192, 1, 16}, CacheParam::Size));
  EXPECT_FALSE(next_value_up({2048, 1, 16}, CacheParam::Assoc));
  EXPECT_EQ(next_value_up({4096, 1, 16}, CacheParam::Assoc), (CacheConfig{4096, 2, 16}));
  EXPECT_FALSE(next_value_up({4096, 2, 16}, CacheParam::Assoc));
  EXPECT_FALSE(next_value_up({8192, 4, 64}, CacheParam::Line));
  EXPECT_EQ(next_value_up({4096, 2, 16}, CacheParam::Size), (CacheConfig{8192, 2, 16}));
}

TEST(SnapToFeasible, ClampsAndLowersAssociativity) {
  EXPECT_EQ(snap_to_feasible(2048, 4, 16), (CacheConfig{2048, 1, 16}));
  EXPECT_EQ(snap_to_feasible(4096, 4, 64), (CacheConfig{4096, 2, 64}));
  EXPECT_EQ(snap_to_feasible(65536, 16, 8), (CacheConfig{8192, 4, 16}));
  EXPECT_EQ(snap_to_feasible(0, 0, 0), (CacheConfig{2048, 1, 16}));
  EXPECT_EQ(snap_to_feasible(5000, 3, 40), (CacheConfig{4096, 2, 32}));
}

TEST(LruCache, HitAfterMissAndLineGranularity) {
  LruCache c({2048, 1, 16});
  EXPECT_FALSE(c.access(0x100));
  EXPECT_TRUE(c.access(0x10f));
  EXPECT_FALSE(c.access(0x110));
  EXPECT_EQ(c.stats().accesses, 3u);
  EXPECT_EQ(c.stats().misses, 2u);
  EXPECT_EQ(c.stats().physical_line_fetches, 2u);
}

TEST(LruCache, EvictsLeastRecentlyUsed) {
  // 4096:2:64 has 32 sets; stride 2048 maps to set 0.
  LruCache c({4096, 2, 64});
  EXPECT_FALSE(c.access(0));
  EXPECT_FALSE(c.access(2048));
  EXPECT_TRUE(c.access(0));
  EXPECT_FALSE(c.access(4096));  // evicts 2048
  EXPECT_TRUE(c.access(0));
  EXPECT_FALSE(c.access(2048));
}

TEST(LruCache, LargeLineFetchesSeveralPhysicalLines) {
  LruCache c({8192, 4, 64});
  c.access(0);
  EXPECT_EQ(c.stats().physical_line_fetches, 4u);
}

TEST(LruCache, RejectsInfeasible) {
  EXPECT_THROW(LruCache({2048, 2, 16}), Error);
}

TEST(Simulate, RoutesByStream) {
  PhaseTrace t{"p", {{AccessKind::IFETCH, 0}, {AccessKind::LOAD, 0}, {AccessKind::STORE, 0}}};
  EXPECT_EQ(simulate(t, Stream::Instruction, kBaseCacheConfig).accesses, 1u);
  const CacheStats d = simulate(t, Stream::Data, kBaseCacheConfig);
  EXPECT_EQ(d.accesses, 2u);
  EXPECT_EQ(d.misses, 1u);  // write-allocate: the store hits the loaded line
}

TEST(Simulate, EmptyTraceHasZeroMissRate) {
  PhaseTrace t{"empty", {}};
  const CacheStats s = simulate(t, Stream::Data, kBaseCacheConfig);
  EXPECT_EQ(s.accesses, 0u);
  EXPECT_EQ(s.miss_rate(), 0.0);
}

TEST(Simulate, MatchesReferenceOnRandomTraces) {
  std::mt19937_64 rng(7);
  const DesignSpace ds = enumerate_design_space();
  for (int t = 0; t < 20; ++t) {
    const PhaseTrace trace = refmodel::random_trace(rng, 3000);
    for (const auto& c : ds.configs) {
      for (Stream s : {Stream::Instruction, Stream::Data}) {
        refmodel::ReferenceCache ref(c.size_bytes, c.associativity, c.line_bytes);
        for (const auto& a : trace.accesses) {
          if (stream_of(a.kind) == s) ref.access(a.address);
        }
        EXPECT_EQ(simulate(trace, s, c).misses, ref.misses()) << c.to_string();
      }
    }
  }
}

TEST(Simulate, MoreWaysWithSameSetsNeverHurt) {
  std::mt19937_64 rng(11);
  const PhaseTrace trace = refmodel::random_trace(rng, 5000);
  // Same set count and line size throughout, so LRU inclusion applies.
  const CacheConfig chain[] = {{2048, 1, 16}, {4096, 2, 16}, {8192, 4, 16}};
  for (int i = 0; i + 1 < 3; ++i) {
    LruCache small(chain[i]), big(chain[i + 1]);
    for (const auto& a : trace.accesses) {
      const bool hs = small.access(a.address);
      const bool hb = big.access(a.address);
      EXPECT_TRUE(!hs || hb);
    }
  }
}

TEST(ConfigPair, IndexesByStream) {
  ConfigPair p{{2048, 1, 16}, {4096, 2, 32}};
  EXPECT_EQ(p[Stream::Instruction], (CacheConfig{2048, 1, 16}));
  p[Stream::Data] = kBaseCacheConfig;
  EXPECT_EQ(p.dcache, kBaseCacheConfig);
}
