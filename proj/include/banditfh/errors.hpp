#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace banditfh {

/// Refusal to allocate: the estimated working set exceeds the configured cap.
struct MemoryCapError : std::runtime_error {
  MemoryCapError(std::uint64_t required, std::uint64_t cap)
      : std::runtime_error("memory cap exceeded: required " + std::to_string(required) +
                           " bytes, cap " + std::to_string(cap) + " bytes"),
        required_bytes(required),
        cap_bytes(cap) {}
  std::uint64_t required_bytes;
  std::uint64_t cap_bytes;
};

/// Malformed or corrupted action-table file (magic, version, truncation, CRC).
struct TableFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent run configuration (e.g. table horizon/prior does not match the request).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical integrity violation (e.g. probability mass drift in a forward sweep).
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace banditfh
