#pragma once

// Runtime-configurable L1 cache: the 18-point design space and a
// trace-driven true-LRU simulator.

#include <algorithm>
#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdmlab/types.hpp"

namespace pdmlab {

// Width of one physical cache line. Larger logical lines are built by
// fetching several physical lines.
inline constexpr std::uint32_t kPhysicalLineBytes = 16;

struct CacheConfig {
  std::uint32_t size_bytes = 8192;
  std::uint32_t associativity = 4;
  std::uint32_t line_bytes = 64;

  std::uint32_t sets() const { return size_bytes / (associativity * line_bytes); }
  std::uint32_t physical_lines_per_line() const { return line_bytes / kPhysicalLineBytes; }

  // "size:assoc:line", e.g. "8192:4:64".
  std::string to_string() const {
    return std::to_string(size_bytes) + ":" + std::to_string(associativity) + ":" +
           std::to_string(line_bytes);
  }

  friend auto operator<=>(const CacheConfig&, const CacheConfig&) = default;
};

// The reference hardware point every saving is normalized against.
inline constexpr CacheConfig kBaseCacheConfig{8192, 4, 64};

// Smallest configuration; the starting point of an upward greedy search.
inline constexpr CacheConfig kSmallestCacheConfig{2048, 1, 16};

struct ParamBounds {
  std::uint32_t min = 0;
  std::uint32_t max = 0;
};

enum class CacheParam : std::uint8_t { Size, Assoc, Line };

inline constexpr std::array<CacheParam, 3> kAdjustOrder{CacheParam::Size, CacheParam::Assoc,
                                                        CacheParam::Line};

inline constexpr const char* param_name(CacheParam p) {
  switch (p) {
    case CacheParam::Size: return "size";
    case CacheParam::Assoc: return "assoc";
    case CacheParam::Line: return "line";
  }
  return "?";
}

struct DesignSpace {
  static constexpr ParamBounds kSize{2048, 8192};
  static constexpr ParamBounds kAssoc{1, 4};
  static constexpr ParamBounds kLine{16, 64};

  std::vector<CacheConfig> configs;

  std::size_t size() const { return configs.size(); }

  // Position in the deterministic ordering; configs.size() if absent.
  std::size_t index_of(const CacheConfig& c) const {
    auto it = std::find(configs.begin(), configs.end(), c);
    return static_cast<std::size_t>(it - configs.begin());
  }
};

inline constexpr ParamBounds bounds_of(CacheParam p) {
  switch (p) {
    case CacheParam::Size: return DesignSpace::kSize;
    case CacheParam::Assoc: return DesignSpace::kAssoc;
    case CacheParam::Line: return DesignSpace::kLine;
  }
  return {};
}

inline bool is_feasible(const CacheConfig& c) {
  auto in_set = [](std::uint32_t v, ParamBounds b) {
    return std::has_single_bit(v) && v >= b.min && v <= b.max;
  };
  if (!in_set(c.size_bytes, DesignSpace::kSize) || !in_set(c.associativity, DesignSpace::kAssoc) ||
      !in_set(c.line_bytes, DesignSpace::kLine)) {
    return false;
  }
  // Way shutdown works on whole banks: 2 KB is one bank, 4 KB is two.
  if (c.size_bytes == 2048 && c.associativity != 1) return false;
  if (c.size_bytes == 4096 && c.associativity > 2) return false;
  return c.line_bytes % kPhysicalLineBytes == 0;
}

// Size-major, then associativity, then line size.
inline DesignSpace enumerate_design_space() {
  DesignSpace space;
  for (std::uint32_t size = DesignSpace::kSize.min; size <= DesignSpace::kSize.max; size *= 2) {
    for (std::uint32_t assoc = DesignSpace::kAssoc.min; assoc <= DesignSpace::kAssoc.max;
         assoc *= 2) {
      for (std::uint32_t line = DesignSpace::kLine.min; line <= DesignSpace::kLine.max;
           line *= 2) {
        CacheConfig c{size, assoc, line};
        if (is_feasible(c)) space.configs.push_back(c);
      }
    }
  }
  return space;
}

inline std::uint32_t& param_ref(CacheConfig& c, CacheParam p) {
  switch (p) {
    case CacheParam::Size: return c.size_bytes;
    case CacheParam::Assoc: return c.associativity;
    case CacheParam::Line: break;
  }
  return c.line_bytes;
}

inline std::uint32_t param_value(const CacheConfig& c, CacheParam p) {
  CacheConfig copy = c;
  return param_ref(copy, p);
}

// Doubles one parameter. Empty when that leaves the bounds or lands on an
// infeasible size/associativity combination.
inline std::optional<CacheConfig> next_value_up(const CacheConfig& c, CacheParam p) {
  CacheConfig up = c;
  std::uint32_t& v = param_ref(up, p);
  if (v >= bounds_of(p).max) return std::nullopt;
  v *= 2;
  if (!is_feasible(up)) return std::nullopt;
  return up;
}

// Clamps each parameter into its bounds, then lowers associativity to the
// largest value the chosen size supports. Size is never changed by snapping.
inline CacheConfig snap_to_feasible(std::uint32_t size, std::uint32_t assoc, std::uint32_t line) {
  auto clamp_pow2 = [](std::uint32_t v, ParamBounds b) {
    v = std::clamp(v, b.min, b.max);
    return std::bit_floor(v);
  };
  CacheConfig c{clamp_pow2(size, DesignSpace::kSize), clamp_pow2(assoc, DesignSpace::kAssoc),
                clamp_pow2(line, DesignSpace::kLine)};
  while (!is_feasible(c) && c.associativity > DesignSpace::kAssoc.min) c.associativity /= 2;
  return c;
}

struct CacheStats {
  std::uint64_t accesses = 0;
  std::uint64_t misses = 0;
  std::uint64_t physical_line_fetches = 0;

  double miss_rate() const {
    return accesses == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(accesses);
  }

  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

// Physically indexed set-associative cache, true LRU, write-allocate.
// Each set keeps its tags ordered most- to least-recently used.
class LruCache {
 public:
  explicit LruCache(const CacheConfig& c)
      : config_(c),
        sets_(c.sets()),
        line_shift_(static_cast<unsigned>(std::countr_zero(c.line_bytes))),
        tags_(static_cast<std::size_t>(c.sets()) * c.associativity, kInvalid) {
    if (!is_feasible(c)) throw Error("infeasible cache configuration " + c.to_string());
  }

  const CacheConfig& config() const { return config_; }
  const CacheStats& stats() const { return stats_; }

  // Returns true on a hit.
  bool access(std::uint64_t address) {
    const std::uint64_t line = address >> line_shift_;
    const std::size_t set = static_cast<std::size_t>(line % sets_);
    std::uint64_t* ways = tags_.data() + set * config_.associativity;
    const std::uint32_t n = config_.associativity;

    ++stats_.accesses;
    std::uint32_t hit_way = n;
    for (std::uint32_t w = 0; w < n; ++w) {
      if (ways[w] == line) {
        hit_way = w;
        break;
      }
    }
    const bool hit = hit_way != n;
    if (!hit) {
      ++stats_.misses;
      stats_.physical_line_fetches += config_.physical_lines_per_line();
      hit_way = n - 1;  // victim is the LRU way
    }
    for (std::uint32_t w = hit_way; w > 0; --w) ways[w] = ways[w - 1];
    ways[0] = line;
    return hit;
  }

  void reset() {
    std::fill(tags_.begin(), tags_.end(), kInvalid);
    stats_ = {};
  }

 private:
  static constexpr std::uint64_t kInvalid = ~std::uint64_t{0};

  CacheConfig config_;
  std::uint32_t sets_;
  unsigned line_shift_;
  std::vector<std::uint64_t> tags_;
  CacheStats stats_;
};

inline CacheStats simulate(std::span<const MemoryAccess> accesses, Stream stream,
                           const CacheConfig& c) {
  LruCache cache(c);
  for (const MemoryAccess& a : accesses) {
    if (stream_of(a.kind) == stream) cache.access(a.address);
  }
  return cache.stats();
}

inline CacheStats simulate(const PhaseTrace& trace, Stream stream, const CacheConfig& c) {
  return simulate(std::span<const MemoryAccess>(trace.accesses), stream, c);
}

// Parses "size:assoc:line". Throws on malformed text or an infeasible result.
inline CacheConfig parse_config(const std::string& text) {
  CacheConfig c;
  std::uint32_t* fields[3] = {&c.size_bytes, &c.associativity, &c.line_bytes};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t end = text.find(':', pos);
    if ((i < 2) != (end != std::string::npos)) throw Error("malformed cache config '" + text + "'");
    std::string part = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    try {
      std::size_t used = 0;
      unsigned long v = std::stoul(part, &used);
      if (used != part.size()) throw Error("");
      *fields[i] = static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
      throw Error("malformed cache config '" + text + "'");
    }
    pos = end + 1;
  }
  if (!is_feasible(c)) throw Error("infeasible cache config '" + text + "'");
  return c;
}

// An instruction-cache / data-cache configuration pair.
struct ConfigPair {
  CacheConfig icache = kBaseCacheConfig;
  CacheConfig dcache = kBaseCacheConfig;

  const CacheConfig& operator[](Stream s) const { return s == Stream::Instruction ? icache : dcache; }
  CacheConfig& operator[](Stream s) { return s == Stream::Instruction ? icache : dcache; }

  friend auto operator<=>(const ConfigPair&, const ConfigPair&) = default;
};

inline constexpr ConfigPair kBasePair{kBaseCacheConfig, kBaseCacheConfig};

}  // namespace pdmlab
