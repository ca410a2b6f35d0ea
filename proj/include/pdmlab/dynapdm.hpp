#pragma once

// Dynamic phase distance mapping. Distance windows are created at runtime as
// new phases arrive, each remembering how far (in base-2 parameter steps) its
// phases' best configurations sit from the base phase's best. New phases
// start from a window's distance, or from the most similar executed phase,
// and are refined by a short upward greedy search over tuning intervals.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmlab/cache_model.hpp"
#include "pdmlab/energy_model.hpp"
#include "pdmlab/phase_engine.hpp"

namespace pdmlab {

// Smallest distance-window width and the step windows grow by when merged.
inline constexpr double kMinWindowSize = 0.25;

// Lower bound used for the window of an infinite phase distance when no
// finite maximum upper bound is configured.
inline constexpr double kInfiniteWindowFloor = 1024.0;

// Signed base-2 exponent deltas, target relative to a reference config.
struct ConfigurationDistance {
  int size_exp = 0;
  int assoc_exp = 0;
  int line_exp = 0;

  friend bool operator==(const ConfigurationDistance&, const ConfigurationDistance&) = default;
};

inline int log2_exact(std::uint32_t v) { return std::countr_zero(v); }

inline ConfigurationDistance configuration_distance(const CacheConfig& from, const CacheConfig& to) {
  return {log2_exact(to.size_bytes) - log2_exact(from.size_bytes),
          log2_exact(to.associativity) - log2_exact(from.associativity),
          log2_exact(to.line_bytes) - log2_exact(from.line_bytes)};
}

inline CacheConfig apply_distance(const CacheConfig& base_best, const ConfigurationDistance& dist) {
  auto shifted = [](std::uint32_t v, int delta, ParamBounds b) {
    const int e = std::clamp(log2_exact(v) + delta, log2_exact(b.min), log2_exact(b.max));
    return std::uint32_t{1} << e;
  };
  return snap_to_feasible(shifted(base_best.size_bytes, dist.size_exp, DesignSpace::kSize),
                          shifted(base_best.associativity, dist.assoc_exp, DesignSpace::kAssoc),
                          shifted(base_best.line_bytes, dist.line_exp, DesignSpace::kLine));
}

struct WindowBounds {
  double win_l = 0.0;
  double win_u = 0.0;

  bool contains(PhaseDistance d) const {
    if (std::isinf(win_u) && std::isinf(d)) return true;
    return win_l <= d && d < win_u;
  }
};

// New window for a distance that no existing window covers.
//   d < s_d           -> [0, s_d)
//   d >= win_u_max    -> [win_u_max, inf)
//   otherwise         -> [x, x + s_d) with x the multiple of s_d at or below d
// A distance exactly on a multiple of s_d opens its own window. The upper
// bound never crosses win_u_max, so the last window stays disjoint.
inline WindowBounds create_window(PhaseDistance d, double s_d, double win_u_max) {
  if (!(d >= 0.0)) throw Error("phase distance must be non-negative");
  if (!(s_d >= kMinWindowSize)) throw Error("window size below 0.25");
  if (!(win_u_max > 0.0)) throw Error("maximum upper bound must be positive");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (std::isinf(d)) return {std::isinf(win_u_max) ? kInfiniteWindowFloor : win_u_max, kInf};
  if (d >= win_u_max) return {win_u_max, kInf};
  if (d < s_d) return {0.0, std::min(s_d, win_u_max)};
  const double x = std::floor(d / s_d) * s_d;
  return {x, std::min(x + s_d, win_u_max)};
}

struct DistanceWindow {
  int id = 0;
  double win_l = 0.0;
  double win_u = 0.0;
  ConfigurationDistance distance;
  std::uint64_t last_hit = 0;

  WindowBounds bounds() const { return {win_l, win_u}; }
};

// Disjoint distance windows kept sorted by lower bound.
class DistanceWindowTable {
 public:
  DistanceWindowTable(double s_d = kMinWindowSize,
                      double win_u_max = std::numeric_limits<double>::infinity(),
                      std::size_t capacity = 32, bool dynamic_size = true)
      : s_d_(s_d), win_u_max_(win_u_max), capacity_(capacity), dynamic_(dynamic_size) {
    if (!on_grid(s_d) || s_d < kMinWindowSize) {
      throw Error("window size must be a multiple of 0.25 and at least 0.25");
    }
    if (!(win_u_max > 0.0) || (!std::isinf(win_u_max) && !on_grid(win_u_max))) {
      throw Error("maximum upper bound must be a positive multiple of 0.25 or infinite");
    }
    if (capacity == 0) throw Error("window table capacity must be positive");
  }

  double window_size() const { return s_d_; }
  double win_u_max() const { return win_u_max_; }
  std::size_t capacity() const { return capacity_; }
  bool dynamic_size() const { return dynamic_; }
  std::size_t size() const { return windows_.size(); }
  const std::vector<DistanceWindow>& windows() const { return windows_; }

  const DistanceWindow* find(PhaseDistance d) const {
    for (const auto& w : windows_) {
      if (w.bounds().contains(d)) return &w;
    }
    return nullptr;
  }

  const DistanceWindow* by_id(int id) const {
    for (const auto& w : windows_) {
      if (w.id == id) return &w;
    }
    return nullptr;
  }

  void touch(int id) {
    if (auto* w = mutable_by_id(id)) w->last_hit = ++tick_;
  }

  void set_distance(int id, const ConfigurationDistance& dist) {
    if (auto* w = mutable_by_id(id)) w->distance = dist;
  }

  // Creates a window around a distance no window covers, trimmed to the gap
  // between its neighbours. Evicts the least recently hit window when full.
  const DistanceWindow& insert(PhaseDistance d, const ConfigurationDistance& dist) {
    if (find(d) != nullptr) throw Error("distance already covered by a window");
    if (windows_.size() >= capacity_) {
      auto victim = std::min_element(windows_.begin(), windows_.end(), [](const auto& a, const auto& b) {
        return a.last_hit < b.last_hit;
      });
      windows_.erase(victim);
    }
    WindowBounds b = create_window(d, s_d_, win_u_max_);
    for (const auto& w : windows_) {
      if (w.win_u <= d) b.win_l = std::max(b.win_l, w.win_u);
      if (w.win_l > d) b.win_u = std::min(b.win_u, w.win_l);
    }
    DistanceWindow w{next_id_++, b.win_l, b.win_u, dist, ++tick_};
    auto pos = std::upper_bound(windows_.begin(), windows_.end(), w.win_l,
                                [](double lo, const DistanceWindow& x) { return lo < x.win_l; });
    return *windows_.insert(pos, w);
  }

  // Fuses contiguous windows carrying the same configuration distance. Each
  // fusion grows the window size by 0.25 when the size is dynamic; with a
  // static size nothing is merged. Returns the number of fusions.
  std::size_t merge_adjacent() {
    if (!dynamic_) return 0;
    std::size_t merges = 0;
    for (std::size_t i = 0; i + 1 < windows_.size();) {
      DistanceWindow& a = windows_[i];
      const DistanceWindow& b = windows_[i + 1];
      if (a.win_u == b.win_l && a.distance == b.distance) {
        a.win_u = b.win_u;
        a.last_hit = std::max(a.last_hit, b.last_hit);
        windows_.erase(windows_.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        s_d_ += kMinWindowSize;
        ++merges;
      } else {
        ++i;
      }
    }
    return merges;
  }

 private:
  static bool on_grid(double v) { return std::fmod(v, kMinWindowSize) == 0.0; }

  DistanceWindow* mutable_by_id(int id) {
    for (auto& w : windows_) {
      if (w.id == id) return &w;
    }
    return nullptr;
  }

  double s_d_;
  double win_u_max_;
  std::size_t capacity_;
  bool dynamic_;
  int next_id_ = 0;
  std::uint64_t tick_ = 0;
  std::vector<DistanceWindow> windows_;
};

struct ExploredConfig {
  CacheConfig config;
  double edp_Js = 0.0;
  bool accepted = false;
};

// Greedy upward search for one cache.
struct CacheExploration {
  CacheConfig best;
  double best_edp = 0.0;
  double start_edp = 0.0;
  std::vector<ExploredConfig> explored;
};

// Searches one cache with the other held at its starting configuration:
// evaluate the start, then double size, then associativity, then line size,
// keeping a step while it lowers the EDP and moving to the next parameter at
// the first step that does not.
inline CacheExploration adjust_cache(IntervalEvaluator& eval, Stream stream, const ConfigPair& start) {
  CacheExploration out;
  ConfigPair pair = start;
  out.best = start[stream];
  out.best_edp = out.start_edp = eval.evaluate(pair).edp_Js;
  out.explored.push_back({out.best, out.best_edp, true});

  for (CacheParam param : kAdjustOrder) {
    while (auto up = next_value_up(out.best, param)) {
      pair[stream] = *up;
      const double edp = eval.evaluate(pair).edp_Js;
      const bool keep = edp < out.best_edp;
      out.explored.push_back({*up, edp, keep});
      if (!keep) break;
      out.best = *up;
      out.best_edp = edp;
    }
  }
  return out;
}

struct AdjustResult {
  ConfigPair best;
  double best_edp = 0.0;
  CacheExploration icache;
  CacheExploration dcache;

  const CacheExploration& exploration(Stream s) const {
    return s == Stream::Instruction ? icache : dcache;
  }
};

// The two caches are searched independently; best_edp is the EDP of the
// combined pair on the same interval.
inline AdjustResult adjust_configuration(IntervalEvaluator& eval, const ConfigPair& start) {
  AdjustResult r;
  r.icache = adjust_cache(eval, Stream::Instruction, start);
  r.dcache = adjust_cache(eval, Stream::Data, start);
  r.best = {r.icache.best, r.dcache.best};
  r.best_edp = eval.evaluate(r.best).edp_Js;
  return r;
}

inline AdjustResult adjust_configuration(const PhaseTrace& phase, const ConfigPair& start,
                                         std::uint64_t interval_accesses, const EnergyParams& p) {
  IntervalEvaluator eval(interval_prefix(phase, interval_accesses), p);
  return adjust_configuration(eval, start);
}

// One line of the tuner run log: a single tuning-interval evaluation.
struct IntervalRecord {
  std::string phase_id;
  std::string cache;  // "I", "D", or "ID" for a characterization interval
  std::string config;
  double edp_Js = 0.0;
  std::string decision;  // characterize | start | accept | reject | retune-start
};

inline nlohmann::json to_json(const IntervalRecord& r) {
  return {{"phase_id", r.phase_id}, {"cache", r.cache}, {"config", r.config},
          {"edp", r.edp_Js},        {"decision", r.decision}};
}

inline std::string pair_string(const ConfigPair& p) {
  return p.icache.to_string() + "/" + p.dcache.to_string();
}

struct TunerOptions {
  CacheConfig base_cfg = kBaseCacheConfig;
  // Tuning interval as a cycle budget on the base configuration; the
  // resulting access count is reused for every candidate (equal work).
  double interval_cycles = 500000.0;
  // Overrides interval_cycles when set.
  std::optional<std::uint64_t> interval_accesses;
  double window_size = kMinWindowSize;
  bool static_window_size = false;
  double win_u_max = std::numeric_limits<double>::infinity();
  std::size_t window_capacity = 32;
  std::size_t history_capacity = 64;
  // Relative EDP increase that triggers re-tuning of a known phase.
  double retune_threshold = 0.10;
};

struct PhaseOutcome {
  ConfigPair pair;
  double recorded_edp = 0.0;
  double base_edp = 0.0;
  std::size_t evaluations = 0;
  bool history_hit = false;
  bool base_phase = false;
  std::uint64_t interval_accesses = 0;
  PhaseDistance d_instruction = 0.0;
  PhaseDistance d_data = 0.0;
};

struct ExecutedPhase {
  PhaseCharacteristics characteristics;
  ConfigPair best;
  std::uint64_t interval_accesses = 0;
};

class DynaPdmTuner {
 public:
  explicit DynaPdmTuner(EnergyParams params, TunerOptions options = {})
      : params_(std::move(params)),
        options_(options),
        history_(options.history_capacity),
        tables_{make_table(options), make_table(options)} {
    if (!is_feasible(options_.base_cfg)) throw Error("infeasible base cache configuration");
    if (!(options_.retune_threshold >= 0.0)) throw Error("retune threshold must be non-negative");
    if (!(options_.interval_cycles > 0.0)) throw Error("interval cycles must be positive");
  }

  const EnergyParams& params() const { return params_; }
  const TunerOptions& options() const { return options_; }
  const PhaseHistoryTable& history() const { return history_; }
  const DistanceWindowTable& windows(Stream s) const { return tables_[static_cast<std::size_t>(s)]; }
  const std::vector<IntervalRecord>& log() const { return log_; }
  const std::vector<ExecutedPhase>& executed() const { return executed_; }
  std::size_t executed_count() const { return executed_.size(); }
  std::optional<std::string> base_phase() const { return base_id_; }
  ConfigPair base_pair() const { return {options_.base_cfg, options_.base_cfg}; }

  std::size_t window_count() const { return tables_[0].size() + tables_[1].size(); }

  // Argmin over executed phases of the summed per-stream distance from
  // `phase`; ties go to the earliest executed.
  std::size_t most_similar_phase(const PhaseCharacteristics& phase) const {
    if (executed_.empty()) throw Error("no executed phase to compare against");
    std::size_t best = 0;
    double best_d = kInfiniteDistance;
    for (std::size_t j = 0; j < executed_.size(); ++j) {
      const auto& other = executed_[j].characteristics;
      const double d = phase_distance(phase, other, Stream::Instruction) +
                       phase_distance(phase, other, Stream::Data);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    return best;
  }

  std::uint64_t interval_for(const PhaseTrace& trace) const {
    if (options_.interval_accesses) {
      return std::min<std::uint64_t>(*options_.interval_accesses, trace.accesses.size());
    }
    return interval_accesses_for_cycles(trace, base_pair(), params_, options_.interval_cycles);
  }

  PhaseOutcome on_phase_enter(const PhaseTrace& trace) {
    PhaseOutcome out;
    if (auto hit = history_.lookup(trace.phase_id)) {
      history_.touch(trace.phase_id);
      out.pair = hit->best;
      out.recorded_edp = hit->recorded_edp;
      out.history_hit = true;
      return out;
    }

    const std::size_t log_start = log_.size();
    out.interval_accesses = interval_for(trace);
    IntervalEvaluator eval(interval_prefix(trace, out.interval_accesses), params_);

    const ConfigPair base = base_pair();
    const PhaseCharacteristics ch{trace.phase_id,
                                  eval.stats(Stream::Instruction, base.icache).miss_rate(),
                                  eval.stats(Stream::Data, base.dcache).miss_rate()};
    out.base_edp = eval.evaluate(base).edp_Js;
    record(trace.phase_id, "ID", pair_string(base), out.base_edp, "characterize");

    if (!base_id_) {
      // No distances exist yet: search the whole range upward from the
      // smallest configuration. The base configuration stays the fallback.
      out.base_phase = true;
      const AdjustResult adjusted =
          adjust_configuration(eval, {kSmallestCacheConfig, kSmallestCacheConfig});
      log_exploration(trace.phase_id, adjusted, "start");
      commit(out, adjusted, base);
      base_id_ = trace.phase_id;
      base_characteristics_ = ch;
      base_best_ = out.pair;
      for (auto& t : tables_) t.insert(0.0, ConfigurationDistance{});
    } else {
      out.d_instruction = phase_distance(ch, base_characteristics_, Stream::Instruction);
      out.d_data = phase_distance(ch, base_characteristics_, Stream::Data);

      ConfigPair init;
      std::array<std::optional<int>, 2> hit_window;
      std::optional<std::size_t> msp;
      for (Stream s : {Stream::Instruction, Stream::Data}) {
        auto& table = tables_[static_cast<std::size_t>(s)];
        const PhaseDistance d = s == Stream::Instruction ? out.d_instruction : out.d_data;
        if (const DistanceWindow* w = table.find(d)) {
          hit_window[static_cast<std::size_t>(s)] = w->id;
          init[s] = apply_distance(base_best_[s], w->distance);
          table.touch(w->id);
        } else {
          if (!msp) msp = most_similar_phase(ch);
          init[s] = executed_[*msp].best[s];
        }
      }

      const AdjustResult adjusted = adjust_configuration(eval, init);
      log_exploration(trace.phase_id, adjusted, "start");
      commit(out, adjusted, base);

      for (Stream s : {Stream::Instruction, Stream::Data}) {
        const std::size_t k = static_cast<std::size_t>(s);
        const ConfigurationDistance dist = configuration_distance(base_best_[s], out.pair[s]);
        const PhaseDistance d = s == Stream::Instruction ? out.d_instruction : out.d_data;
        if (hit_window[k]) {
          const CacheExploration& x = adjusted.exploration(s);
          if (x.best_edp < x.start_edp * (1.0 - kUpdateNoiseFloor)) {
            tables_[k].set_distance(*hit_window[k], dist);
          }
        } else {
          tables_[k].insert(d, dist);
        }
      }
    }

    history_.insert(trace.phase_id, out.pair, out.recorded_edp);
    executed_.push_back({ch, out.pair, out.interval_accesses});
    for (auto& t : tables_) t.merge_adjacent();
    out.evaluations = log_.size() - log_start;
    return out;
  }

  // EDP of a configuration pair over the phase's tuning interval.
  double measure_edp(const PhaseTrace& trace, const ConfigPair& pair) const {
    IntervalEvaluator eval(interval_prefix(trace, interval_for(trace)), params_);
    return eval.evaluate(pair).edp_Js;
  }

  // Re-tunes a known phase when its measured EDP exceeds the recorded one by
  // more than the retune threshold, starting from the stored pair.
  std::optional<ConfigPair> monitor_and_retune(const PhaseTrace& trace, double measured_edp) {
    auto entry = history_.lookup(trace.phase_id);
    if (!entry) throw Error("phase '" + trace.phase_id + "' has not been characterized");
    if (!(measured_edp > (1.0 + options_.retune_threshold) * entry->recorded_edp)) {
      return std::nullopt;
    }
    IntervalEvaluator eval(interval_prefix(trace, interval_for(trace)), params_);
    const AdjustResult adjusted = adjust_configuration(eval, entry->best);
    log_exploration(trace.phase_id, adjusted, "retune-start");
    PhaseOutcome out;
    out.base_edp = eval.evaluate(base_pair()).edp_Js;
    commit(out, adjusted, base_pair());
    history_.insert(trace.phase_id, out.pair, out.recorded_edp);
    for (auto& e : executed_) {
      if (e.characteristics.phase_id == trace.phase_id) e.best = out.pair;
    }
    return out.pair;
  }

 private:
  static constexpr double kUpdateNoiseFloor = 1e-6;

  static DistanceWindowTable make_table(const TunerOptions& o) {
    return DistanceWindowTable(o.window_size, o.win_u_max, o.window_capacity, !o.static_window_size);
  }

  void record(const std::string& id, std::string cache, std::string config, double edp,
              std::string decision) {
    log_.push_back({id, std::move(cache), std::move(config), edp, std::move(decision)});
  }

  void log_exploration(const std::string& id, const AdjustResult& r, const char* start_label) {
    for (Stream s : {Stream::Instruction, Stream::Data}) {
      const auto& explored = r.exploration(s).explored;
      for (std::size_t i = 0; i < explored.size(); ++i) {
        const char* decision = i == 0 ? start_label : explored[i].accepted ? "accept" : "reject";
        record(id, stream_name(s), explored[i].config.to_string(), explored[i].edp_Js, decision);
      }
    }
  }

  // Keeps the adjusted pair only if it is no worse than the base pair.
  void commit(PhaseOutcome& out, const AdjustResult& adjusted, const ConfigPair& base) const {
    if (adjusted.best_edp <= out.base_edp) {
      out.pair = adjusted.best;
      out.recorded_edp = adjusted.best_edp;
    } else {
      out.pair = base;
      out.recorded_edp = out.base_edp;
    }
  }

  EnergyParams params_;
  TunerOptions options_;
  PhaseHistoryTable history_;
  std::array<DistanceWindowTable, 2> tables_;
  std::optional<std::string> base_id_;
  PhaseCharacteristics base_characteristics_;
  ConfigPair base_best_;
  std::vector<ExecutedPhase> executed_;
  std::vector<IntervalRecord> log_;
};

struct FootprintBits {
  std::uint32_t id_bits = 0;
  std::uint32_t bound_bits = 0;
  std::uint32_t distance_bits = 0;
  std::uint32_t entry_bits = 0;
  std::uint64_t total_bits = 0;
};

// Storage for a distance window table: an id, two 8-bit window bounds
// (multiples of 0.25) and one 5-bit configuration field per cache.
inline FootprintBits window_table_footprint_bits(std::uint64_t entries) {
  if (entries == 0) throw Error("window table needs at least one entry");
  FootprintBits f;
  f.id_bits = static_cast<std::uint32_t>(std::bit_width(entries - 1));
  f.bound_bits = 8;
  f.distance_bits = 5;
  f.entry_bits = f.id_bits + 2 * f.bound_bits + 2 * f.distance_bits;
  f.total_bits = entries * f.entry_bits;
  return f;
}

}  // namespace pdmlab
