#pragma once

// Phase characterization under the base cache configuration, phase
// distance, the phase history table, and fixed-work interval evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdmlab/cache_model.hpp"
#include "pdmlab/energy_model.hpp"
#include "pdmlab/types.hpp"

namespace pdmlab {

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

// Miss rates of both streams measured under the base cache configuration.
struct PhaseCharacteristics {
  std::string phase_id;
  double i_miss_rate = 0.0;
  double d_miss_rate = 0.0;

  double miss_rate(Stream s) const { return s == Stream::Instruction ? i_miss_rate : d_miss_rate; }
};

// Normalized miss-rate difference; +inf when the reference rate is zero but
// the phase's is not.
using PhaseDistance = double;

inline std::span<const MemoryAccess> interval_prefix(const PhaseTrace& trace,
                                                     std::uint64_t interval_accesses) {
  const std::size_t n =
      static_cast<std::size_t>(std::min<std::uint64_t>(interval_accesses, trace.accesses.size()));
  return std::span<const MemoryAccess>(trace.accesses).first(n);
}

inline PhaseCharacteristics characterize(const PhaseTrace& trace, const CacheConfig& base_cfg,
                                         std::uint64_t interval_accesses) {
  const auto prefix = interval_prefix(trace, interval_accesses);
  return {trace.phase_id, simulate(prefix, Stream::Instruction, base_cfg).miss_rate(),
          simulate(prefix, Stream::Data, base_cfg).miss_rate()};
}

// |m_phase - m_ref| / m_ref for the named stream. Not symmetric.
inline PhaseDistance phase_distance(const PhaseCharacteristics& phase,
                                    const PhaseCharacteristics& reference, Stream stream) {
  const double m_i = phase.miss_rate(stream);
  const double m_b = reference.miss_rate(stream);
  if (m_b == 0.0) return m_i == 0.0 ? 0.0 : kInfiniteDistance;
  return std::abs(m_i - m_b) / m_b;
}

// Number of leading accesses the configuration pair needs to spend
// `cycle_budget` cycles (the whole trace if it finishes sooner). Used to size
// the fixed-work tuning interval from a cycle budget on the base config.
inline std::uint64_t interval_accesses_for_cycles(const PhaseTrace& trace, const ConfigPair& pair,
                                                  const EnergyParams& p, double cycle_budget) {
  LruCache icache(pair.icache);
  LruCache dcache(pair.dcache);
  const double ipenalty = p.miss_penalty_cycles(pair.icache);
  const double dpenalty = p.miss_penalty_cycles(pair.dcache);
  double cycles = 0.0;
  std::uint64_t n = 0;
  for (const MemoryAccess& a : trace.accesses) {
    if (cycles >= cycle_budget) break;
    cycles += p.hit_latency_cycles;
    if (stream_of(a.kind) == Stream::Instruction) {
      if (!icache.access(a.address)) cycles += ipenalty;
    } else if (!dcache.access(a.address)) {
      cycles += dpenalty;
    }
    ++n;
  }
  return n;
}

// Scores configuration pairs on one fixed span of accesses. Per-stream
// statistics are memoized by configuration, so every pair costs at most two
// simulations the first time either of its caches is seen.
class IntervalEvaluator {
 public:
  IntervalEvaluator(std::span<const MemoryAccess> accesses, const EnergyParams& params)
      : accesses_(accesses), params_(params), space_(enumerate_design_space()) {
    for (auto& s : stats_) s.resize(space_.size());
  }

  const CacheStats& stats(Stream s, const CacheConfig& c) {
    const std::size_t idx = space_.index_of(c);
    if (idx == space_.size()) throw Error("infeasible cache configuration " + c.to_string());
    auto& slot = stats_[static_cast<std::size_t>(s)][idx];
    if (!slot) slot = simulate(accesses_, s, c);
    return *slot;
  }

  PhaseCost evaluate(const ConfigPair& pair) {
    return cost(stats(Stream::Instruction, pair.icache), stats(Stream::Data, pair.dcache), pair,
                params_);
  }

  std::size_t length() const { return accesses_.size(); }
  const EnergyParams& params() const { return params_; }

 private:
  std::span<const MemoryAccess> accesses_;
  const EnergyParams& params_;
  DesignSpace space_;
  std::array<std::vector<std::optional<CacheStats>>, 2> stats_;
};

struct HistoryEntry {
  ConfigPair best;
  double recorded_edp = 0.0;
  std::uint64_t last_used_tick = 0;
};

// Best-known configuration pair per phase, LRU-evicted at capacity.
class PhaseHistoryTable {
 public:
  explicit PhaseHistoryTable(std::size_t capacity = 64) : capacity_(capacity) {
    if (capacity_ == 0) throw Error("phase history capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }

  std::optional<HistoryEntry> lookup(const std::string& phase_id) const {
    auto it = entries_.find(phase_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  // Replaces an existing entry, otherwise evicts the least recently used
  // entry when full. Returns the evicted id, if any.
  std::optional<std::string> insert(const std::string& phase_id, const ConfigPair& best,
                                    double recorded_edp) {
    if (!is_feasible(best.icache) || !is_feasible(best.dcache)) {
      throw Error("history insert with infeasible configuration");
    }
    std::optional<std::string> evicted;
    if (!entries_.contains(phase_id) && entries_.size() >= capacity_) {
      auto victim = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        return a.second.last_used_tick < b.second.last_used_tick;
      });
      evicted = victim->first;
      entries_.erase(victim);
    }
    entries_[phase_id] = HistoryEntry{best, std::max(0.0, recorded_edp), ++tick_};
    return evicted;
  }

  bool touch(const std::string& phase_id) {
    auto it = entries_.find(phase_id);
    if (it == entries_.end()) return false;
    it->second.last_used_tick = ++tick_;
    return true;
  }

 private:
  std::size_t capacity_;
  std::uint64_t tick_ = 0;
  std::unordered_map<std::string, HistoryEntry> entries_;
};

}  // namespace pdmlab
