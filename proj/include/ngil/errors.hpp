#pragma once

#include <stdexcept>
#include <string>

namespace ngil {

// Malformed graph input: unknown vertex, duplicate edge, self loop,
// edge between two pre-existing vertices at accumulation time.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// A referenced entity (vertex, task head) does not exist.
struct NotFoundError : std::runtime_error {
  explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradient during training.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-format violations: checksum mismatch, bad line, out-of-range id.
struct BundleError : std::runtime_error {
  explicit BundleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ngil
