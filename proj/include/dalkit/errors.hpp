#ifndef DALKIT_ERRORS_HPP_
#define DALKIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dalkit {

/// Invalid experiment configuration. Maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or missing input data (datasets, model files). Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Model file problems: bad magic, version mismatch, truncation, checksum.
struct FormatError : DataError {
  explicit FormatError(const std::string& what) : DataError(what) {}
};

/// Everything below maps to CLI exit code 3.

/// Shape or extent mismatch between operands.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Value outside the mathematical domain of an operation (ln of a
/// non-positive number, alpha outside [0.5, 1], non-finite result).
struct ValueError : std::runtime_error {
  explicit ValueError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation called in the wrong lifecycle state (frozen layer without
/// stored statistics, freeze before any moving-average update).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

/// Out-of-range index (class label, layer index).
struct IndexError : std::runtime_error {
  explicit IndexError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dalkit

#endif  // DALKIT_ERRORS_HPP_
