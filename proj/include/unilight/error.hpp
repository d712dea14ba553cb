#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace unilight {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unknown magic, malformed header, version mismatch.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorruptFile : FormatError {
  CorruptFile(const std::string& what, std::uint64_t offset)
      : FormatError(what + " at byte offset " + std::to_string(offset)), byte_offset(offset) {}
  std::uint64_t byte_offset;
};

struct NoLightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IsotropicLightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace unilight
