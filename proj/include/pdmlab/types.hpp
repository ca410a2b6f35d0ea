#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmlab {

// Base class for every error the library reports. Validation failures carry
// the offending field or file in the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AccessKind : std::uint8_t { IFETCH, LOAD, STORE };

// Which L1 cache an access is routed to.
enum class Stream : std::uint8_t { Instruction, Data };

inline constexpr const char* stream_name(Stream s) {
  return s == Stream::Instruction ? "I" : "D";
}

inline constexpr Stream stream_of(AccessKind k) {
  return k == AccessKind::IFETCH ? Stream::Instruction : Stream::Data;
}

struct MemoryAccess {
  AccessKind kind = AccessKind::IFETCH;
  std::uint64_t address = 0;

  static constexpr std::uint64_t kAddressLimit = std::uint64_t{1} << 48;

  friend bool operator==(const MemoryAccess&, const MemoryAccess&) = default;
};

// One execution phase, as an ordered access sequence.
struct PhaseTrace {
  std::string phase_id;
  std::vector<MemoryAccess> accesses;
};

}  // namespace pdmlab
