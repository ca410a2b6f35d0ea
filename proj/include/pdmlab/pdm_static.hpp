#pragma once

// Static phase distance mapping: seven fixed distance windows and the
// configuration estimation rules attached to them.

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pdmlab/cache_model.hpp"
#include "pdmlab/energy_model.hpp"
#include "pdmlab/phase_engine.hpp"

namespace pdmlab {

struct Thresholds {
  std::uint32_t c_thr = 8192;
  std::uint32_t a_thr = 2;
  // Carried for completeness; no estimation rule reads it.
  std::uint32_t l_thr = 64;
};

enum class StaticWindow : std::uint8_t { R1 = 1, R2, R3, R4, R5, R6, R7 };

struct WindowRange {
  double lo;
  double hi;
};

// Half-open [lo, hi) ranges partitioning [0, inf).
inline constexpr std::array<WindowRange, 7> kStaticWindows{{
    {0.0, 0.25},
    {0.25, 0.5},
    {0.5, 0.75},
    {0.75, 1.25},
    {1.25, 1.5},
    {1.5, 2.5},
    {2.5, std::numeric_limits<double>::infinity()},
}};

inline StaticWindow map_to_window(PhaseDistance d) {
  if (!(d >= 0.0)) throw Error("phase distance must be non-negative");
  for (std::size_t i = 0; i + 1 < kStaticWindows.size(); ++i) {
    if (d < kStaticWindows[i].hi) return static_cast<StaticWindow>(i + 1);
  }
  return StaticWindow::R7;
}

// Starts from the base phase's best configuration and changes only the
// parameters the window's rule names; the result is snapped to a feasible
// point (associativity is lowered, size kept).
inline CacheConfig estimate_configuration(const CacheConfig& base_best, PhaseDistance d,
                                          const Thresholds& t) {
  constexpr auto kSize = DesignSpace::kSize;
  constexpr auto kAssoc = DesignSpace::kAssoc;
  constexpr auto kLine = DesignSpace::kLine;

  std::uint32_t size = base_best.size_bytes;
  std::uint32_t assoc = base_best.associativity;
  std::uint32_t line = base_best.line_bytes;

  switch (map_to_window(d)) {
    case StaticWindow::R1:
    case StaticWindow::R2:
    case StaticWindow::R7:
      size = t.c_thr;
      break;
    case StaticWindow::R3:
      size = base_best.size_bytes == kSize.min ? base_best.size_bytes * 2 : t.c_thr;
      if (base_best.associativity == kAssoc.min) assoc = base_best.associativity * 2;
      break;
    case StaticWindow::R4:
      size = t.c_thr;
      if (base_best.associativity != kAssoc.max) assoc = base_best.associativity * 2;
      if (base_best.line_bytes != kLine.min) line = base_best.line_bytes / 2;
      break;
    case StaticWindow::R5:
      size = t.c_thr;
      if (base_best.associativity == 1) assoc = t.a_thr;
      break;
    case StaticWindow::R6:
      if (base_best.size_bytes != kSize.max) size = kSize.max / 2;
      break;
  }
  return snap_to_feasible(size, assoc, line);
}

inline ConfigPair estimate_pair(const ConfigPair& base_best, PhaseDistance d_instruction,
                                PhaseDistance d_data, const Thresholds& t) {
  return {estimate_configuration(base_best.icache, d_instruction, t),
          estimate_configuration(base_best.dcache, d_data, t)};
}

// Sweeps one parameter of the given stream's cache, the other cache held at
// the base configuration, and returns the value with the lowest mean
// whole-phase EDP. Associativity is lowered where a size cannot hold it;
// values that cannot be reached that way are skipped. Ties go to the smaller
// value.
inline std::uint32_t calibrate_threshold(CacheParam param, std::span<const PhaseTrace> phases,
                                         const CacheConfig& fixed, const EnergyParams& p,
                                         Stream stream = Stream::Data) {
  if (phases.empty()) throw Error("threshold calibration needs at least one phase");
  const ParamBounds b = bounds_of(param);

  std::uint32_t best_value = 0;
  double best_edp = std::numeric_limits<double>::infinity();
  for (std::uint32_t v = b.min; v <= b.max; v *= 2) {
    CacheConfig c = fixed;
    param_ref(c, param) = v;
    c = snap_to_feasible(c.size_bytes, c.associativity, c.line_bytes);
    if (param_value(c, param) != v) continue;
    ConfigPair pair = kBasePair;
    pair[stream] = c;
    double sum = 0.0;
    for (const PhaseTrace& phase : phases) {
      sum += cost(simulate(phase, Stream::Instruction, pair.icache),
                  simulate(phase, Stream::Data, pair.dcache), pair, p)
                 .edp_Js;
    }
    const double mean = sum / static_cast<double>(phases.size());
    if (mean < best_edp) {
      best_edp = mean;
      best_value = v;
    }
  }
  if (best_value == 0) throw Error("no feasible value to calibrate against " + fixed.to_string());
  return best_value;
}

// What static PDM needs to know about its base phase.
struct BasePhaseInfo {
  PhaseCharacteristics characteristics;
  ConfigPair best;
};

struct PdmResult {
  ConfigPair pair;
  PhaseCharacteristics characteristics;
  PhaseDistance d_instruction = 0.0;
  PhaseDistance d_data = 0.0;
};

inline PdmResult pdm_tune(const PhaseTrace& phase, const BasePhaseInfo& base, const Thresholds& t,
                          std::uint64_t interval_accesses,
                          const CacheConfig& base_cfg = kBaseCacheConfig) {
  PdmResult r;
  r.characteristics = characterize(phase, base_cfg, interval_accesses);
  r.d_instruction = phase_distance(r.characteristics, base.characteristics, Stream::Instruction);
  r.d_data = phase_distance(r.characteristics, base.characteristics, Stream::Data);
  r.pair = estimate_pair(base.best, r.d_instruction, r.d_data, t);
  return r;
}

}  // namespace pdmlab
