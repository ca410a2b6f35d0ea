#pragma once

// Exhaustive ground truth: every instruction/data configuration pair
// evaluated over a whole phase.

#include <array>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "pdmlab/cache_model.hpp"
#include "pdmlab/energy_model.hpp"

namespace pdmlab {

struct OracleEntry {
  ConfigPair pair;
  PhaseCost cost;
};

struct OracleResult {
  std::string phase_id;
  ConfigPair best;
  double best_edp = 0.0;
  // Instruction-config-major, both in design-space order: 18 x 18 entries.
  std::vector<OracleEntry> table;

  const OracleEntry& at(const ConfigPair& pair) const {
    for (const auto& e : table) {
      if (e.pair == pair) return e;
    }
    throw Error("configuration pair " + pair.icache.to_string() + "/" + pair.dcache.to_string() +
                " not in oracle table");
  }
};

// Whole-phase statistics for every configuration of both caches.
struct PhaseProfile {
  std::string phase_id;
  DesignSpace space;
  std::array<std::vector<CacheStats>, 2> stats;

  const CacheStats& of(Stream s, const CacheConfig& c) const {
    const std::size_t idx = space.index_of(c);
    if (idx == space.size()) throw Error("infeasible cache configuration " + c.to_string());
    return stats[static_cast<std::size_t>(s)][idx];
  }

  PhaseCost cost_of(const ConfigPair& pair, const EnergyParams& p) const {
    return cost(of(Stream::Instruction, pair.icache), of(Stream::Data, pair.dcache), pair, p);
  }
};

inline PhaseProfile profile_phase(const PhaseTrace& phase) {
  PhaseProfile prof{phase.phase_id, enumerate_design_space(), {}};
  for (Stream s : {Stream::Instruction, Stream::Data}) {
    auto& out = prof.stats[static_cast<std::size_t>(s)];
    out.reserve(prof.space.size());
    for (const CacheConfig& c : prof.space.configs) out.push_back(simulate(phase, s, c));
  }
  return prof;
}

// Ties keep the earliest pair in design-space order.
inline OracleResult exhaustive_search(const PhaseProfile& prof, const EnergyParams& p) {
  OracleResult r;
  r.phase_id = prof.phase_id;
  r.best_edp = std::numeric_limits<double>::infinity();
  r.table.reserve(prof.space.size() * prof.space.size());
  for (const CacheConfig& ic : prof.space.configs) {
    for (const CacheConfig& dc : prof.space.configs) {
      const ConfigPair pair{ic, dc};
      const PhaseCost c = prof.cost_of(pair, p);
      r.table.push_back({pair, c});
      if (c.edp_Js < r.best_edp) {
        r.best_edp = c.edp_Js;
        r.best = pair;
      }
    }
  }
  return r;
}

inline OracleResult exhaustive_search(const PhaseTrace& phase, const EnergyParams& p) {
  if (phase.accesses.empty()) throw Error("oracle needs a non-empty phase");
  return exhaustive_search(profile_phase(phase), p);
}

// Relative EDP excess of a tuner's choice over the oracle optimum.
inline double gap(double tuner_edp, double oracle_best_edp) {
  if (!(oracle_best_edp > 0.0)) throw Error("oracle EDP must be positive");
  return (tuner_edp - oracle_best_edp) / oracle_best_edp;
}

// Minimizes each cache separately (the other held at the base configuration)
// and compares the combined pair with the joint optimum. The caches interact
// only through shared execution time, so the two can disagree.
struct IndependenceCheck {
  ConfigPair independent;
  double independent_edp = 0.0;
  ConfigPair joint;
  double joint_edp = 0.0;

  bool agrees() const { return independent == joint; }
};

inline IndependenceCheck independence_check(const PhaseProfile& prof, const EnergyParams& p,
                                            const CacheConfig& base = kBaseCacheConfig) {
  IndependenceCheck r;
  for (Stream s : {Stream::Instruction, Stream::Data}) {
    double best = std::numeric_limits<double>::infinity();
    for (const CacheConfig& c : prof.space.configs) {
      ConfigPair pair{base, base};
      pair[s] = c;
      const double edp = prof.cost_of(pair, p).edp_Js;
      if (edp < best) {
        best = edp;
        r.independent[s] = c;
      }
    }
  }
  r.independent_edp = prof.cost_of(r.independent, p).edp_Js;
  const OracleResult joint = exhaustive_search(prof, p);
  r.joint = joint.best;
  r.joint_edp = joint.best_edp;
  return r;
}

inline void write_oracle_csv_header(std::ostream& out) {
  out << "phase_id,icfg,dcfg,cycles,energy,edp\n";
}

inline void write_oracle_csv(const OracleResult& r, std::ostream& out) {
  const auto old_precision = out.precision(17);
  for (const auto& e : r.table) {
    out << r.phase_id << ',' << e.pair.icache.to_string() << ',' << e.pair.dcache.to_string() << ','
        << e.cost.cycles << ',' << e.cost.energy_J << ',' << e.cost.edp_Js << '\n';
  }
  out.precision(old_precision);
}

}  // namespace pdmlab
