#pragma once

// Cycle, energy and energy-delay-product model for one core with private
// instruction and data caches. Misses stall the core (no overlap) and each
// fetched physical line costs off-chip energy.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>

#include <json.hpp>

#include "pdmlab/cache_model.hpp"

namespace pdmlab {

// Environment variable naming the default parameter file for the CLI.
inline constexpr const char* kParamsEnvVar = "PDMLAB_PARAMS";

struct EnergyParams {
  double frequency_hz = 2.0e9;
  double hit_latency_cycles = 1.0;
  double miss_penalty_base_cycles = 40.0;
  double extra_cycles_per_physical_line = 4.0;
  double offchip_energy_per_physical_line_J = 0.3e-9;
  double core_power_W = 0.04;

  // Per-access dynamic energy keyed by (size, associativity). Missing keys
  // use hit_energy_base_J * sqrt(size/2048) * assoc^0.6.
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> hit_energy_J{
      {{2048, 1}, 5.0e-12},  {{4096, 1}, 6.5e-12},  {{4096, 2}, 9.0e-12},
      {{8192, 1}, 8.5e-12},  {{8192, 2}, 11.5e-12}, {{8192, 4}, 17.0e-12},
  };
  double hit_energy_base_J = 5.0e-12;

  // Leakage keyed by active size. Missing keys scale linearly from
  // static_power_per_kb_W.
  std::map<std::uint32_t, double> static_power_W{
      {2048, 0.5e-3}, {4096, 1.0e-3}, {8192, 2.0e-3}};
  double static_power_per_kb_W = 0.25e-3;

  double hit_energy(const CacheConfig& c) const {
    auto it = hit_energy_J.find({c.size_bytes, c.associativity});
    if (it != hit_energy_J.end()) return it->second;
    return hit_energy_base_J * std::sqrt(c.size_bytes / 2048.0) *
           std::pow(static_cast<double>(c.associativity), 0.6);
  }

  double static_power(const CacheConfig& c) const {
    auto it = static_power_W.find(c.size_bytes);
    if (it != static_power_W.end()) return it->second;
    return static_power_per_kb_W * (c.size_bytes / 1024.0);
  }

  // Cycles one miss stalls the core for under configuration c.
  double miss_penalty_cycles(const CacheConfig& c) const {
    return miss_penalty_base_cycles +
           (c.physical_lines_per_line() - 1.0) * extra_cycles_per_physical_line;
  }

  // Throws naming the first field that is non-positive or breaks the
  // monotonicity the model relies on.
  void validate() const {
    auto positive = [](const char* name, double v) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(std::string("energy params: ") + name + " must be > 0");
      }
    };
    positive("frequency_hz", frequency_hz);
    positive("hit_latency_cycles", hit_latency_cycles);
    positive("miss_penalty_base_cycles", miss_penalty_base_cycles);
    positive("extra_cycles_per_physical_line", extra_cycles_per_physical_line);
    positive("offchip_energy_per_physical_line_J", offchip_energy_per_physical_line_J);
    positive("core_power_W", core_power_W);
    positive("hit_energy_base_J", hit_energy_base_J);
    positive("static_power_per_kb_W", static_power_per_kb_W);
    for (const auto& [key, v] : hit_energy_J) positive("hit_energy_J", v);
    for (const auto& [key, v] : static_power_W) positive("static_power_W", v);

    const DesignSpace space = enumerate_design_space();
    for (const CacheConfig& a : space.configs) {
      for (const CacheConfig& b : space.configs) {
        const bool bigger_assoc = a.size_bytes == b.size_bytes && a.associativity < b.associativity;
        const bool bigger_size = a.associativity == b.associativity && a.size_bytes < b.size_bytes;
        if ((bigger_assoc || bigger_size) && hit_energy(a) > hit_energy(b)) {
          throw Error("energy params: hit_energy_J must be non-decreasing in size and associativity");
        }
        if (a.size_bytes < b.size_bytes && static_power(a) > static_power(b)) {
          throw Error("energy params: static_power_W must be non-decreasing in size");
        }
      }
    }
  }
};

inline nlohmann::json to_json(const EnergyParams& p) {
  nlohmann::json hit = nlohmann::json::object();
  for (const auto& [key, v] : p.hit_energy_J) {
    hit[std::to_string(key.first) + ":" + std::to_string(key.second)] = v;
  }
  nlohmann::json leak = nlohmann::json::object();
  for (const auto& [size, v] : p.static_power_W) leak[std::to_string(size)] = v;
  return {
      {"frequency_hz", p.frequency_hz},
      {"hit_latency_cycles", p.hit_latency_cycles},
      {"miss_penalty_base_cycles", p.miss_penalty_base_cycles},
      {"extra_cycles_per_physical_line", p.extra_cycles_per_physical_line},
      {"offchip_energy_per_physical_line_J", p.offchip_energy_per_physical_line_J},
      {"core_power_W", p.core_power_W},
      {"hit_energy_J", hit},
      {"hit_energy_base_J", p.hit_energy_base_J},
      {"static_power_W", leak},
      {"static_power_per_kb_W", p.static_power_per_kb_W},
  };
}

inline EnergyParams params_from_json(const nlohmann::json& j) {
  EnergyParams p;
  auto number = [&](const char* name, double& field) {
    if (!j.contains(name)) return;
    if (!j[name].is_number()) throw Error(std::string("energy params: ") + name + " must be a number");
    field = j[name].get<double>();
  };
  number("frequency_hz", p.frequency_hz);
  number("hit_latency_cycles", p.hit_latency_cycles);
  number("miss_penalty_base_cycles", p.miss_penalty_base_cycles);
  number("extra_cycles_per_physical_line", p.extra_cycles_per_physical_line);
  number("offchip_energy_per_physical_line_J", p.offchip_energy_per_physical_line_J);
  number("core_power_W", p.core_power_W);
  number("hit_energy_base_J", p.hit_energy_base_J);
  number("static_power_per_kb_W", p.static_power_per_kb_W);

  if (j.contains("hit_energy_J")) {
    p.hit_energy_J.clear();
    for (const auto& [key, v] : j["hit_energy_J"].items()) {
      const auto colon = key.find(':');
      if (colon == std::string::npos || !v.is_number()) {
        throw Error("energy params: hit_energy_J entries must be \"size:assoc\": number");
      }
      try {
        p.hit_energy_J[{static_cast<std::uint32_t>(std::stoul(key.substr(0, colon))),
                        static_cast<std::uint32_t>(std::stoul(key.substr(colon + 1)))}] =
            v.get<double>();
      } catch (const std::logic_error&) {
        throw Error("energy params: bad hit_energy_J key '" + key + "'");
      }
    }
  }
  if (j.contains("static_power_W")) {
    p.static_power_W.clear();
    for (const auto& [key, v] : j["static_power_W"].items()) {
      if (!v.is_number()) throw Error("energy params: static_power_W values must be numbers");
      try {
        p.static_power_W[static_cast<std::uint32_t>(std::stoul(key))] = v.get<double>();
      } catch (const std::logic_error&) {
        throw Error("energy params: bad static_power_W key '" + key + "'");
      }
    }
  }
  p.validate();
  return p;
}

// Missing fields keep their defaults.
inline EnergyParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open energy parameter file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed energy parameter file " + path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

struct PhaseCost {
  double cycles = 0.0;
  double time_s = 0.0;
  double energy_J = 0.0;
  double avg_power_W = 0.0;
  double edp_Js = 0.0;
};

inline PhaseCost cost(const CacheStats& istats, const CacheStats& dstats, const CacheConfig& icfg,
                      const CacheConfig& dcfg, const EnergyParams& p) {
  PhaseCost out;
  if (istats.accesses == 0 && dstats.accesses == 0) return out;

  out.cycles = static_cast<double>(istats.accesses + dstats.accesses) * p.hit_latency_cycles +
               static_cast<double>(istats.misses) * p.miss_penalty_cycles(icfg) +
               static_cast<double>(dstats.misses) * p.miss_penalty_cycles(dcfg);
  out.time_s = out.cycles / p.frequency_hz;

  auto cache_energy = [&](const CacheStats& s, const CacheConfig& c) {
    return static_cast<double>(s.accesses) * p.hit_energy(c) +
           static_cast<double>(s.physical_line_fetches) * p.offchip_energy_per_physical_line_J +
           p.static_power(c) * out.time_s;
  };
  out.energy_J = cache_energy(istats, icfg) + cache_energy(dstats, dcfg) + p.core_power_W * out.time_s;
  out.avg_power_W = out.energy_J / out.time_s;
  out.edp_Js = out.avg_power_W * out.time_s * out.time_s;
  return out;
}

inline PhaseCost cost(const CacheStats& istats, const CacheStats& dstats, const ConfigPair& pair,
                      const EnergyParams& p) {
  return cost(istats, dstats, pair.icache, pair.dcache, p);
}

}  // namespace pdmlab
