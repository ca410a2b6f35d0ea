#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "pdmlab/dynapdm.hpp"
#include "pdmlab/trace_io.hpp"
#include "reference.hpp"

using namespace pdmlab;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void expect_disjoint_sorted(const DistanceWindowTable& t) {
  const auto& ws = t.windows();
  for (const auto& w : ws) EXPECT_LT(w.win_l, w.win_u);
  for (std::size_t i = 0; i + 1 < ws.size(); ++i) EXPECT_LE(ws[i].win_u, ws[i + 1].win_l);
}

PhaseTrace small_phase(const std::string& id, std::uint64_t ws, std::uint64_t seed, bool random = false) {
  SyntheticSpec s;
  s.phase_id = id;
  s.working_set_bytes = ws;
  s.stride = 16;
  s.instruction_footprint_bytes = 1024;
  s.access_count = 40000;
  s.seed = seed;
  s.random_access = random;
  return generate_synthetic(s);
}

}  // namespace

TEST(ConfigDistance, ExponentDeltas) {
  const ConfigurationDistance d = configuration_distance({8192, 4, 64}, {2048, 1, 32});
  EXPECT_EQ(d, (ConfigurationDistance{-2, -2, -1}));
  EXPECT_EQ(apply_distance({8192, 4, 64}, d), (CacheConfig{2048, 1, 32}));
  for (const auto& a : enumerate_design_space().configs) {
    for (const auto& b : enumerate_design_space().configs) {
      EXPECT_EQ(apply_distance(a, configuration_distance(a, b)), b);
    }
  }
}

TEST(ConfigDistance, ApplyClampsAndSnaps) {
  EXPECT_EQ(apply_distance({2048, 1, 16}, {5, 5, 5}), (CacheConfig{8192, 4, 64}));
  EXPECT_EQ(apply_distance({8192, 4, 64}, {-1, 0, -9}), (CacheConfig{4096, 2, 16}));
}

TEST(CreateWindow, ThreeCases) {
  EXPECT_EQ(create_window(0.1, 0.25, kInf).win_l, 0.0);
  EXPECT_EQ(create_window(0.1, 0.25, kInf).win_u, 0.25);
  EXPECT_EQ(create_window(1.08, 0.25, kInf).win_l, 1.0);
  EXPECT_EQ(create_window(1.08, 0.25, kInf).win_u, 1.25);
  EXPECT_EQ(create_window(0.5, 0.25, kInf).win_l, 0.5);
  EXPECT_EQ(create_window(5.0, 0.25, 4.0).win_l, 4.0);
  EXPECT_TRUE(std::isinf(create_window(5.0, 0.25, 4.0).win_u));
  EXPECT_EQ(create_window(3.9, 0.5, 4.0).win_u, 4.0);
  EXPECT_EQ(create_window(kInf, 0.25, kInf).win_l, kInfiniteWindowFloor);
  EXPECT_TRUE(create_window(kInf, 0.25, kInf).contains(kInf));
  EXPECT_THROW(create_window(-1.0, 0.25, kInf), Error);
  EXPECT_THROW(create_window(1.0, 0.1, kInf), Error);
  EXPECT_THROW(create_window(1.0, 0.25, 0.0), Error);
}

TEST(CreateWindow, RandomPropertiesHold) {
  std::mt19937_64 rng(2024);
  auto u = [&] { return refmodel::uniform01(rng); };
  for (int i = 0; i < 10000; ++i) {
    const double s_d = 0.25 * static_cast<double>(1 + refmodel::uniform_below(rng, 12));
    const double win_u_max = u() < 0.3 ? kInf : 0.25 * static_cast<double>(1 + refmodel::uniform_below(rng, 40));
    const double d = u() < 0.01 ? kInf : (u() < 0.1 ? 0.25 * static_cast<double>(refmodel::uniform_below(rng, 50))
                                                    : u() * 12.0);
    const WindowBounds w = create_window(d, s_d, win_u_max);
    ASSERT_TRUE(w.contains(d)) << d << " " << s_d << " " << win_u_max;
    if (std::isinf(d) || d >= win_u_max) {
      EXPECT_TRUE(std::isinf(w.win_u));
    } else if (d < s_d) {
      EXPECT_EQ(w.win_l, 0.0);
      EXPECT_EQ(w.win_u, std::min(s_d, win_u_max));
    } else {
      EXPECT_DOUBLE_EQ(std::fmod(w.win_l, s_d), 0.0);
      EXPECT_LE(w.win_u - w.win_l, s_d);
      EXPECT_LE(w.win_u, win_u_max);
    }
  }
}

TEST(WindowTable, RandomInsertionsStayDisjoint) {
  std::mt19937_64 rng(77);
  auto u = [&] { return refmodel::uniform01(rng); };
  for (int trial = 0; trial < 200; ++trial) {
    const double s_d = 0.25 * static_cast<double>(1 + refmodel::uniform_below(rng, 4));
    const double cap = u() < 0.5 ? kInf : 0.25 * static_cast<double>(4 + refmodel::uniform_below(rng, 20));
    DistanceWindowTable t(s_d, cap, 1 + refmodel::uniform_below(rng, 16), u() < 0.5);
    for (int i = 0; i < 50; ++i) {
      const double d = u() < 0.05 ? kInf : u() * 8.0;
      const ConfigurationDistance dist{static_cast<int>(refmodel::uniform_below(rng, 2)), 0, 0};
      if (const DistanceWindow* hit = t.find(d)) {
        t.touch(hit->id);
      } else {
        const DistanceWindow& w = t.insert(d, dist);
        EXPECT_TRUE(w.bounds().contains(d));
      }
      t.merge_adjacent();
      expect_disjoint_sorted(t);
      EXPECT_LE(t.size(), t.capacity());
    }
  }
}

TEST(WindowTable, InsertTrimsToGap) {
  // Windows made at s_d = 0.25 survive the growth to 0.5; later, wider
  // windows must not overlap them.
  DistanceWindowTable t;
  t.insert(0.1, {1, 0, 0});
  t.insert(0.3, {1, 0, 0});
  t.insert(1.1, {2, 0, 0});
  t.insert(1.8, {3, 0, 0});
  ASSERT_EQ(t.merge_adjacent(), 1u);
  ASSERT_DOUBLE_EQ(t.window_size(), 0.5);
  const DistanceWindow& above = t.insert(1.3, {4, 0, 0});
  EXPECT_EQ(above.win_l, 1.25);
  EXPECT_EQ(above.win_u, 1.5);
  const DistanceWindow& below = t.insert(1.6, {5, 0, 0});
  EXPECT_EQ(below.win_l, 1.5);
  EXPECT_EQ(below.win_u, 1.75);
  EXPECT_THROW(t.insert(1.2, {}), Error);
  expect_disjoint_sorted(t);
}

TEST(WindowTable, EvictsLeastRecentlyHit) {
  DistanceWindowTable t(0.25, kInf, 2);
  const int a = t.insert(0.1, {}).id;
  t.insert(1.1, {1, 0, 0});
  t.touch(a);
  t.insert(2.1, {2, 0, 0});
  EXPECT_EQ(t.size(), 2u);
  EXPECT_TRUE(t.find(0.1));
  EXPECT_FALSE(t.find(1.1));
}

TEST(WindowTable, MergeGrowsWindowSizeAndIsIdempotent) {
  DistanceWindowTable t;
  t.insert(0.1, {1, 0, 0});
  t.insert(0.3, {1, 0, 0});
  t.insert(0.6, {1, 0, 0});
  t.insert(0.8, {0, 1, 0});
  EXPECT_EQ(t.merge_adjacent(), 2u);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(t.window_size(), 0.75);
  EXPECT_EQ(t.windows()[0].win_u, 0.75);
  EXPECT_EQ(t.merge_adjacent(), 0u);
  EXPECT_DOUBLE_EQ(t.window_size(), 0.75);
}

TEST(WindowTable, StaticSizeNeverMerges) {
  DistanceWindowTable t(0.25, kInf, 32, false);
  t.insert(0.1, {});
  t.insert(0.3, {});
  EXPECT_EQ(t.merge_adjacent(), 0u);
  EXPECT_EQ(t.size(), 2u);
}

TEST(WindowTable, RejectsOffGridParameters) {
  EXPECT_THROW(DistanceWindowTable(0.3), Error);
  EXPECT_THROW(DistanceWindowTable(0.0), Error);
  EXPECT_THROW(DistanceWindowTable(0.25, 1.1), Error);
  EXPECT_THROW(DistanceWindowTable(0.25, kInf, 0), Error);
}

TEST(Footprint, IdBits) {
  EXPECT_EQ(window_table_footprint_bits(16).id_bits, 4u);
  EXPECT_EQ(window_table_footprint_bits(32).id_bits, 5u);
  EXPECT_EQ(window_table_footprint_bits(1).id_bits, 0u);
  EXPECT_EQ(window_table_footprint_bits(17).id_bits, 5u);
  const FootprintBits f = window_table_footprint_bits(16);
  EXPECT_EQ(f.entry_bits, 4u + 16u + 10u);
  EXPECT_EQ(f.total_bits, 16u * 30u);
  EXPECT_THROW(window_table_footprint_bits(0), Error);
}

TEST(Adjust, GreedyStopsAtFirstWorseStep) {
  const PhaseTrace t = small_phase("p", 1024, 1);
  const EnergyParams p;
  IntervalEvaluator eval(t.accesses, p);
  const ConfigPair start{kSmallestCacheConfig, kSmallestCacheConfig};
  const CacheExploration x = adjust_cache(eval, Stream::Data, start);
  EXPECT_LE(x.explored.size(), 7u);
  EXPECT_EQ(x.explored.front().config, kSmallestCacheConfig);
  EXPECT_LE(x.best_edp, x.start_edp);
  // Each accepted step strictly improves on everything accepted before it.
  double incumbent = x.start_edp;
  for (std::size_t i = 1; i < x.explored.size(); ++i) {
    EXPECT_EQ(x.explored[i].accepted, x.explored[i].edp_Js < incumbent);
    if (x.explored[i].accepted) incumbent = x.explored[i].edp_Js;
  }
  EXPECT_DOUBLE_EQ(incumbent, x.best_edp);
}

TEST(Adjust, NeverExceedsSevenPerCache) {
  std::mt19937_64 rng(4);
  const EnergyParams p;
  for (int i = 0; i < 10; ++i) {
    const PhaseTrace t = refmodel::random_trace(rng, 4000);
    IntervalEvaluator eval(t.accesses, p);
    for (const auto& c : enumerate_design_space().configs) {
      const AdjustResult r = adjust_configuration(eval, {c, c});
      EXPECT_LE(r.icache.explored.size(), 7u);
      EXPECT_LE(r.dcache.explored.size(), 7u);
      EXPECT_LE(r.icache.best_edp, r.icache.start_edp);
    }
  }
}

TEST(Tuner, FirstPhaseBecomesBaseAndRepeatsHitHistory) {
  DynaPdmTuner tuner(EnergyParams{});
  const PhaseTrace a = small_phase("a", 1024, 1);
  const PhaseOutcome first = tuner.on_phase_enter(a);
  EXPECT_TRUE(first.base_phase);
  EXPECT_FALSE(first.history_hit);
  EXPECT_GE(first.evaluations, 3u);
  EXPECT_LE(first.evaluations, 15u);
  EXPECT_LE(first.recorded_edp, first.base_edp);
  EXPECT_EQ(tuner.base_phase(), std::optional<std::string>("a"));
  EXPECT_EQ(tuner.windows(Stream::Data).size(), 1u);

  const std::size_t log_before = tuner.log().size();
  const PhaseOutcome again = tuner.on_phase_enter(a);
  EXPECT_TRUE(again.history_hit);
  EXPECT_EQ(again.evaluations, 0u);
  EXPECT_EQ(again.pair, first.pair);
  EXPECT_EQ(tuner.log().size(), log_before);
}

TEST(Tuner, LaterPhasesRespectSafetyAndBudget) {
  DynaPdmTuner tuner(EnergyParams{});
  const std::vector<PhaseTrace> phases{small_phase("a", 1024, 1), small_phase("b", 65536, 2),
                                       small_phase("c", 6144, 3, true), small_phase("d", 2048, 4)};
  for (const auto& ph : phases) {
    const PhaseOutcome o = tuner.on_phase_enter(ph);
    EXPECT_LE(o.recorded_edp, o.base_edp) << ph.phase_id;
    EXPECT_LE(o.evaluations, 15u) << ph.phase_id;
    EXPECT_EQ(tuner.log()[tuner.log().size() - o.evaluations].decision, "characterize");
  }
  EXPECT_EQ(tuner.executed_count(), 4u);
  EXPECT_EQ(tuner.history().size(), 4u);
}

TEST(Tuner, ZeroDistanceReusesBaseWindow) {
  DynaPdmTuner tuner(EnergyParams{});
  const PhaseOutcome a = tuner.on_phase_enter(small_phase("a", 1024, 1));
  // Same access pattern under a different id: distance 0 lands in the base window.
  const PhaseOutcome b = tuner.on_phase_enter(small_phase("b", 1024, 1));
  EXPECT_EQ(b.d_data, 0.0);
  EXPECT_EQ(b.pair, a.pair);
  EXPECT_EQ(tuner.windows(Stream::Data).size(), 1u);
}

TEST(Tuner, RetunesOnlyWhenEdpDrifts) {
  TunerOptions o;
  o.retune_threshold = 0.10;
  DynaPdmTuner tuner(EnergyParams{}, o);
  const PhaseTrace a = small_phase("a", 1024, 1);
  const PhaseOutcome first = tuner.on_phase_enter(a);
  const std::size_t before = tuner.log().size();
  EXPECT_FALSE(tuner.monitor_and_retune(a, first.recorded_edp * 1.10));
  EXPECT_EQ(tuner.log().size(), before);
  const auto retuned = tuner.monitor_and_retune(a, first.recorded_edp * 1.5);
  ASSERT_TRUE(retuned);
  EXPECT_GT(tuner.log().size(), before);
  EXPECT_EQ(tuner.log()[before].decision, "retune-start");
  EXPECT_EQ(tuner.history().lookup("a")->best, *retuned);
  EXPECT_THROW(tuner.monitor_and_retune(small_phase("zz", 1024, 1), 1.0), Error);
}

TEST(Tuner, MeasuredEdpMatchesRecorded) {
  DynaPdmTuner tuner(EnergyParams{});
  const PhaseTrace a = small_phase("a", 1024, 1);
  const PhaseOutcome first = tuner.on_phase_enter(a);
  EXPECT_DOUBLE_EQ(tuner.measure_edp(a, first.pair), first.recorded_edp);
  EXPECT_FALSE(tuner.monitor_and_retune(a, tuner.measure_edp(a, first.pair)));
}

TEST(Tuner, RejectsBadOptions) {
  TunerOptions o;
  o.base_cfg = {2048, 4, 16};
  EXPECT_THROW(DynaPdmTuner(EnergyParams{}, o), Error);
  o = {};
  o.window_size = 0.3;
  EXPECT_THROW(DynaPdmTuner(EnergyParams{}, o), Error);
  o = {};
  o.retune_threshold = -1;
  EXPECT_THROW(DynaPdmTuner(EnergyParams{}, o), Error);
}

TEST(IntervalLog, JsonShape) {
  const IntervalRecord r{"p", "D", "2048:1:16", 1.5e-9, "accept"};
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["phase_id"], "p");
  EXPECT_EQ(j["cache"], "D");
  EXPECT_EQ(j["config"], "2048:1:16");
  EXPECT_EQ(j["decision"], "accept");
  EXPECT_DOUBLE_EQ(j["edp"].get<double>(), 1.5e-9);
}
