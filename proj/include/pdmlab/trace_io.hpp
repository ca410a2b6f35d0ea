#pragma once

// Trace files, workload manifests and the synthetic phase generator.
//
// Trace format (UTF-8 text, one access per line):
//
//   # phase: <id>        optional header naming the phase
//   I 0x400000           IFETCH
//   L 0x10000040         LOAD
//   S 0x10000080         STORE
//
// Lines starting with '#' are comments. Without a header the phase id is the
// file name stem. Desk-scale traces of 10^7 accesses stay under ~150 MB.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pdmlab/types.hpp"

namespace pdmlab {

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline char kind_letter(AccessKind k) {
  switch (k) {
    case AccessKind::IFETCH: return 'I';
    case AccessKind::LOAD: return 'L';
    case AccessKind::STORE: return 'S';
  }
  return '?';
}

}  // namespace detail

inline constexpr std::string_view kPhaseHeader = "# phase:";

inline PhaseTrace parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path.string());

  PhaseTrace trace;
  trace.phase_id = path.stem().string();
  const std::string file = path.string();

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.substr(0, kPhaseHeader.size()) == kPhaseHeader) {
        std::string_view id = detail::trim(line.substr(kPhaseHeader.size()));
        if (id.empty()) throw ParseError(file, lineno, "empty phase id in header");
        trace.phase_id = std::string(id);
      }
      continue;
    }

    MemoryAccess a;
    switch (line.front()) {
      case 'I': a.kind = AccessKind::IFETCH; break;
      case 'L': a.kind = AccessKind::LOAD; break;
      case 'S': a.kind = AccessKind::STORE; break;
      default:
        throw ParseError(file, lineno, "unknown access kind '" + std::string(1, line.front()) + "'");
    }
    if (line.size() < 2 || (line[1] != ' ' && line[1] != '\t')) {
      throw ParseError(file, lineno, "expected '<K> <hex-address>'");
    }
    std::string_view addr = detail::trim(line.substr(2));
    if (addr.size() > 2 && addr[0] == '0' && (addr[1] == 'x' || addr[1] == 'X')) addr.remove_prefix(2);
    if (addr.empty()) throw ParseError(file, lineno, "missing address");
    auto [end, ec] = std::from_chars(addr.data(), addr.data() + addr.size(), a.address, 16);
    if (ec != std::errc{} || end != addr.data() + addr.size()) {
      throw ParseError(file, lineno, "malformed address '" + std::string(addr) + "'");
    }
    if (a.address >= MemoryAccess::kAddressLimit) {
      throw ParseError(file, lineno, "address exceeds 48 bits");
    }
    trace.accesses.push_back(a);
  }
  if (trace.phase_id.empty()) throw Error("trace " + file + " has no phase id");
  return trace;
}

inline void write_trace(const PhaseTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trace file " + path.string());
  out << kPhaseHeader << ' ' << trace.phase_id << '\n';
  char buf[32];
  for (const MemoryAccess& a : trace.accesses) {
    buf[0] = detail::kind_letter(a.kind);
    buf[1] = ' ';
    buf[2] = '0';
    buf[3] = 'x';
    auto [end, ec] = std::to_chars(buf + 4, buf + sizeof(buf) - 1, a.address, 16);
    *end++ = '\n';
    out.write(buf, end - buf);
  }
  out.flush();
  if (!out) throw Error("I/O failure writing " + path.string());
}

// Parameters for one synthetic phase. Data accesses walk `data_regions`
// equally sized arrays that are 1 MiB apart, so they alias onto the same
// cache sets; with two or more regions a direct-mapped cache thrashes.
struct SyntheticSpec {
  std::string phase_id = "synthetic";
  std::uint64_t working_set_bytes = 4096;
  std::uint64_t stride = 16;
  std::uint64_t instruction_footprint_bytes = 1024;
  std::uint64_t access_count = 100000;
  double load_fraction = 0.7;
  std::uint64_t seed = 1;
  // Share of accesses that are data accesses; the rest are IFETCHes.
  double data_fraction = 0.4;
  std::uint32_t data_regions = 1;
  // Random offsets inside the working set instead of a sequential walk.
  bool random_access = false;
};

inline constexpr std::uint64_t kCodeBase = 0x400000;
inline constexpr std::uint64_t kDataBase = 0x10000000;
inline constexpr std::uint64_t kRegionSpacing = 0x100000;
inline constexpr std::uint64_t kInstructionBytes = 4;

inline void validate(const SyntheticSpec& s) {
  auto fail = [&](const std::string& what) {
    throw Error("synthetic phase '" + s.phase_id + "': " + what);
  };
  if (s.phase_id.empty()) throw Error("synthetic phase has empty id");
  if (s.working_set_bytes == 0 || s.instruction_footprint_bytes == 0 || s.access_count == 0 ||
      s.stride == 0 || s.data_regions == 0) {
    fail("counts must be positive");
  }
  if ((s.stride & (s.stride - 1)) != 0) fail("stride must be a power of two");
  if (s.working_set_bytes / s.data_regions < s.stride) fail("region smaller than stride");
  if (s.working_set_bytes / s.data_regions > kRegionSpacing) fail("region exceeds 1 MiB");
  if (!(s.load_fraction >= 0.0 && s.load_fraction <= 1.0)) fail("load_fraction outside [0,1]");
  if (!(s.data_fraction >= 0.0 && s.data_fraction <= 1.0)) fail("data_fraction outside [0,1]");
}

// Bit-identical across platforms: only raw mt19937_64 output is used, never
// the implementation-defined std distributions.
inline PhaseTrace generate_synthetic(const SyntheticSpec& s) {
  validate(s);
  std::mt19937_64 rng(s.seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  const std::uint64_t region_bytes = s.working_set_bytes / s.data_regions;
  const std::uint64_t slots = region_bytes / s.stride;

  PhaseTrace trace;
  trace.phase_id = s.phase_id;
  trace.accesses.reserve(s.access_count);
  std::uint64_t pc = 0;
  std::uint64_t data_index = 0;
  for (std::uint64_t i = 0; i < s.access_count; ++i) {
    if (uniform() < s.data_fraction) {
      const AccessKind kind = uniform() < s.load_fraction ? AccessKind::LOAD : AccessKind::STORE;
      const std::uint64_t region = data_index % s.data_regions;
      const std::uint64_t slot =
          s.random_access ? rng() % slots : (data_index / s.data_regions) % slots;
      ++data_index;
      trace.accesses.push_back({kind, kDataBase + region * kRegionSpacing + slot * s.stride});
    } else {
      trace.accesses.push_back({AccessKind::IFETCH, kCodeBase + pc});
      pc = (pc + kInstructionBytes) % s.instruction_footprint_bytes;
    }
  }
  return trace;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  try {
    s.phase_id = j.at("id").get<std::string>();
    s.working_set_bytes = j.at("working_set_bytes").get<std::uint64_t>();
    s.stride = j.at("stride").get<std::uint64_t>();
    s.instruction_footprint_bytes = j.at("instruction_footprint_bytes").get<std::uint64_t>();
    s.access_count = j.at("access_count").get<std::uint64_t>();
    s.load_fraction = j.value("load_fraction", s.load_fraction);
    s.seed = j.value("seed", s.seed);
    s.data_fraction = j.value("data_fraction", s.data_fraction);
    s.data_regions = j.value("data_regions", s.data_regions);
    s.random_access = j.value("random_access", s.random_access);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("synthetic phase spec: ") + e.what());
  }
  validate(s);
  return s;
}

// A suite file: synthetic phase specs plus the order they run in.
struct SuiteSpec {
  std::vector<SyntheticSpec> phases;
  std::vector<std::string> schedule;
};

inline SuiteSpec load_suite_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open suite file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed suite file " + path.string() + ": " + e.what());
  }
  SuiteSpec suite;
  for (const auto& p : j.value("phases", nlohmann::json::array())) {
    suite.phases.push_back(synthetic_spec_from_json(p));
  }
  for (const auto& id : j.value("schedule", nlohmann::json::array())) {
    suite.schedule.push_back(id.get<std::string>());
  }
  for (const auto& id : suite.schedule) {
    bool found = false;
    for (const auto& p : suite.phases) found = found || p.phase_id == id;
    if (!found) throw Error("suite schedule references unknown phase '" + id + "'");
  }
  return suite;
}

// Ordered phase references plus where each phase's trace lives.
struct WorkloadSchedule {
  std::vector<std::string> schedule;
  std::unordered_map<std::string, std::filesystem::path> traces;

  // Phase ids in order of first appearance.
  std::vector<std::string> distinct_phases() const {
    std::vector<std::string> out;
    for (const auto& id : schedule) {
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    return out;
  }
};

// Manifest: { "phases": [{"id": ..., "path": ...}], "schedule": [id, ...] }.
// Relative paths resolve against the manifest's directory.
inline WorkloadSchedule parse_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open workload manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  WorkloadSchedule w;
  if (detail::trim(buf.str()).empty()) return w;

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed workload manifest " + path.string() + ": " + e.what());
  }
  const auto dir = path.parent_path();
  try {
    for (const auto& p : j.value("phases", nlohmann::json::array())) {
      const auto id = p.at("id").get<std::string>();
      std::filesystem::path trace_path = p.at("path").get<std::string>();
      if (trace_path.is_relative()) trace_path = dir / trace_path;
      if (!w.traces.emplace(id, trace_path).second) {
        throw Error("workload manifest " + path.string() + ": duplicate phase id '" + id + "'");
      }
    }
    for (const auto& id : j.value("schedule", nlohmann::json::array())) {
      w.schedule.push_back(id.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed workload manifest " + path.string() + ": " + e.what());
  }
  for (const auto& id : w.schedule) {
    auto it = w.traces.find(id);
    if (it == w.traces.end()) {
      throw Error("workload manifest " + path.string() + ": unknown phase id '" + id + "'");
    }
    if (!std::filesystem::exists(it->second)) {
      throw Error("workload manifest " + path.string() + ": trace for phase '" + id +
                  "' not found at " + it->second.string());
    }
  }
  return w;
}

inline void write_workload(const WorkloadSchedule& w, const std::filesystem::path& path) {
  nlohmann::json j;
  j["phases"] = nlohmann::json::array();
  for (const auto& id : w.distinct_phases()) {
    j["phases"].push_back({{"id", id}, {"path", w.traces.at(id).string()}});
  }
  j["schedule"] = w.schedule;
  std::ofstream out(path);
  if (!out) throw Error("cannot write workload manifest " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace pdmlab
