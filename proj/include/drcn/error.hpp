#pragma once

#include <stdexcept>
#include <string>

namespace drcn {

// Error taxonomy used across the library. Callers that want to distinguish
// bad inputs from bad files from mid-training blowups catch the subtype;
// everything still lands in std::runtime_error for coarse handling.

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller passed values that violate a documented precondition.
struct ArgumentError : Error {
  explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Tensor shapes disagree with what an operation requires.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// A file's bytes do not match the declared on-disk format.
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Filesystem-level failure (missing file, short write, rename failure).
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Training diverged: a loss or gradient stopped being finite.
struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

}  // namespace drcn
