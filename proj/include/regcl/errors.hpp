#pragma once

#include <stdexcept>
#include <string>

namespace regcl {

// Error taxonomy; the CLI maps these onto exit codes
// (configuration -> 1, runtime/numeric -> 2, I/O -> 3).

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ArgumentError : std::runtime_error {
  explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IngestionError : std::runtime_error {
  explicit IngestionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace regcl
